"""Transition chains of plane-wave tori linked by transversal intersections.

Chains are stepped in amplitude ``a`` (monotone in both modes) and every
level is reported in the conserved coordinate used by the intersection
equations: ``I`` in the nonresonant case and ``H_0`` on the plane in the
resonant case.  ``H_0`` on the plane is stationary at ``a = omega``, which
is where the resonant chain inserts its bridging torus.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from . import darboux as dx
from . import lattice as lat
from . import melnikov as mel
from .lattice import LatticeParams

MAX_DENOMINATOR = 64
MIN_DISTANCE = 1e-6


class ChainError(RuntimeError):
    def __init__(self, message: str, level: float | None = None):
        super().__init__(message)
        self.level = level


def level(mode: str, a: float, params: LatticeParams) -> float:
    if mode == "nonresonant":
        return lat.level_I(a, params)
    if mode == "resonant":
        return lat.level_H0(a, params)
    raise ValueError(f"unknown mode {mode!r}")


def amplitude_from_I(value: float, params: LatticeParams) -> float:
    """Inverse of ``I = h^-3 ln(1 + h^2 a^2)`` on the plane."""
    h = params.h
    return float(np.sqrt(np.expm1(value * h ** 3)) / h)


def separatrix_halfwidth(epsilon: float, alpha: float, params: LatticeParams) -> float:
    """Leading-order half-width in ``a`` of the resonance zone around ``a = omega``.

    Expanding ``H_0 + eps H_1`` on the plane about ``a = omega`` gives a
    pendulum with ``d2H_0/da2 = 8 N omega^2 / rho`` and potential amplitude
    ``2 N eps |alpha| omega``, so the separatrix reaches ``sqrt(eps |alpha| rho / omega)``.
    """
    w = params.omega
    rho = 1.0 + params.h ** 2 * w * w
    return float(np.sqrt(epsilon * abs(alpha) * rho / w))


@dataclass(frozen=True)
class FrequencyCheck:
    a: float
    frequency: float
    nearest: str
    distance: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(a=self.a, frequency=self.frequency, nearest=self.nearest, distance=self.distance, passed=self.passed)


def frequency_check(a: float, omega: float = 0.0, max_denominator: int = MAX_DENOMINATOR,
                    min_distance: float = MIN_DISTANCE) -> FrequencyCheck:
    """Rational-proximity test of the torus frequency ``1 / (2 |a^2 - omega^2|)``.

    Exact irrationality cannot be decided in floating point; the proxy
    rejects frequencies within ``min_distance`` of a fraction with
    denominator at most ``max_denominator``.
    """
    x = 1.0 / (2.0 * abs(a * a - omega * omega))
    fr = Fraction(x).limit_denominator(max_denominator)
    dist = abs(x - float(fr))
    return FrequencyCheck(float(a), x, f"{fr.numerator}/{fr.denominator}", dist, dist > min_distance)


@dataclass
class TransitionChain:
    mode: str
    amplitudes: list
    levels: list
    links: list
    frequency_checks: list
    epsilon: float
    alpha: float
    bridging: list = field(default_factory=list)   # indices of bridging levels
    alpha0: list = field(default_factory=list)     # per-link threshold

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "levels": [
                {"index": i, "a": a, "level": L, "bridging": i in self.bridging,
                 "frequency": self.frequency_checks[i].to_dict()}
                for i, (a, L) in enumerate(zip(self.amplitudes, self.levels))
            ],
            "links": [dict(lk.to_dict(), alpha0=a0) for lk, a0 in zip(self.links, self.alpha0)],
        }


def _nudge(a, lower, omega, step):
    """Move ``a`` down towards ``lower`` until its frequency passes the filter."""
    x = a
    while not frequency_check(x, omega).passed:
        x -= step
        if x <= lower:
            raise ChainError(f"no admissible frequency between {lower} and {a}", a)
    return x


def build_chain(mode: str, A1: float, A2: float, epsilon: float, alpha: float, params: LatticeParams,
                margin: float = 0.1, branch: int = 1, max_links: int = 100000) -> TransitionChain:
    """Greedy chain of amplitudes from ``A1`` to ``A2``.

    Each step goes as far as the level gap allows,
    ``|L(a_{j+1}) - L(a_j)| <= 2 eps amp56(a_j) (1 - margin)``, every level
    passes the frequency filter, and every link is solved and checked for
    transversality.  In resonant mode the step that crosses ``a = omega``
    is shortened to land on a bridging torus in ``(omega, omega + w)`` with
    ``w`` from :func:`separatrix_halfwidth`.
    """
    if mode not in mel.MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if not (0 <= margin < 1):
        raise ValueError("margin must lie in [0, 1)")
    lo, hi = dx.amplitude_range(params.N)
    if not (lo < A1 <= A2 < hi):
        raise ValueError(f"need {lo:.6g} < A1 <= A2 < {hi:.6g}")
    omega = params.omega
    for end in (A1, A2):
        fc = frequency_check(end, omega)
        if not fc.passed:
            raise ChainError(f"endpoint a={end} has frequency within {fc.distance:.2e} of {fc.nearest}", end)

    cache: dict[float, mel.MelnikovResult] = {}

    def M(a):
        if a not in cache:
            cache[a] = mel.compute_M(mode, a, params, branch=branch)
        return cache[a]

    L = lambda a: level(mode, a, params)  # noqa: E731
    width = separatrix_halfwidth(epsilon, alpha, params) if mode == "resonant" else 0.0
    bridged = not (mode == "resonant" and A1 < omega < A2)

    amps, bridging = [float(A1)], []
    while amps[-1] < A2:
        if len(amps) > max_links:
            raise ChainError("link budget exhausted", amps[-1])
        a = amps[-1]
        res = M(a)
        if res.amp56 <= mel.VANISH_TOL:
            raise ChainError(f"amp56 vanishes at a={a:.17g}; A2 unreachable", a)
        gap = 2 * epsilon * res.amp56 * (1 - margin)
        La = L(a)
        excess = lambda b: abs(L(b) - La) - gap  # noqa: E731
        nxt = _first_exceedance(excess, a, A2)
        is_bridge = False
        if not bridged and a < omega < nxt:
            nxt = min(nxt, omega + 0.5 * width)
            is_bridge = bridged = True
        if nxt < A2:
            nxt = _nudge(nxt, omega if is_bridge else a, omega, max(1e-12, 1e-7 * (nxt - a)))
        if nxt <= a:
            raise ChainError(f"cannot advance beyond a={a:.17g}", a)
        amps.append(float(nxt))
        if is_bridge:
            bridging.append(len(amps) - 1)

    levels = [L(a) for a in amps]
    links, a0s = [], []
    for j in range(len(amps) - 1):
        res = M(amps[j])
        a0 = mel.alpha_threshold(res)
        try:
            sol = mel.solve_intersection(mode, levels[j], levels[j + 1], epsilon, alpha, res)
        except mel.SolvabilityError as e:
            raise ChainError(f"link {j} (a={amps[j]:.17g}) not solvable: {e}", amps[j]) from e
        links.append(sol)
        a0s.append(a0)
    checks = [frequency_check(a, omega) for a in amps]
    return TransitionChain(mode, amps, levels, links, checks, float(epsilon), float(alpha), bridging, a0s)


def _first_exceedance(excess, a, b, samples=256) -> float:
    """Largest ``x`` such that the gap constraint holds on all of ``[a, x]``."""
    while True:
        xs = np.linspace(a, b, samples + 1)
        vals = np.array([excess(x) for x in xs[1:]])
        bad = np.flatnonzero(vals > 0)
        if bad.size == 0:
            return float(b)
        if bad[0] > 0:
            break
        # the constraint binds inside the first cell
        b = xs[1]
        if b - a <= 1e-13 * max(1.0, abs(a)):
            return float(a)
    k = bad[0] + 1
    root = brentq(excess, xs[k - 1], xs[k], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    step = 1e-15 * max(1.0, abs(root))
    while excess(root) > 0:
        root -= step
        step *= 2
    return float(root)
