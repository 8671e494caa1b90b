"""Melnikov-Arnold integrals along the homoclinic family and the intersection equations.

Along the homoclinic orbit write ``q_n = qhat_n exp(i gamma_hat)`` and
``dF_1/dq_n = V_n exp(-i gamma_hat)`` where ``gamma_hat = gamma + Omega t0``,
``t0 = p / mu`` and ``Omega = 2 (a^2 - omega^2)``; ``qhat`` and ``V`` are
functions of ``tau = t + t0`` alone.  The integrals are then six real
numbers per amplitude and the leading-order intersection conditions become
two trigonometric equations in ``(gamma_hat, t0)``.

Kernels, with ``Lap`` the periodic second difference:

nonresonant (``H_1 = alpha sin t sum |d|^2 + sum (d^2 + conj d^2)``)
    ``-i {F_1, H_1} = -2 alpha sin(t) k_1 - 2 sum rho Im(V G2 e^{-2i gamma_hat})``
    ``-i {I, H_1}   =  2 sum Im(G3 e^{-2i gamma_hat})``
    with ``k_1 = sum rho Im(V G1)``, ``G1 = Lap qhat``, ``G2 = 2 Lap conj(qhat)``,
    ``G3 = -2 conj(qhat) Lap conj(qhat)``.
resonant (``H_1 = alpha sum (q + conj q)``, ``H_2 = sin t sum |d|^2``)
    ``-i {F_1, H_1 + H_2} = 2 alpha sum rho Im(V e^{-i gamma_hat}) - 2 sin(t) k_1``
    ``-i {H_0, H_2}       = -2 sin(t) sum Im(G1 G2)``
    with ``G2 = conj(rho dH_0/dconj q)`` evaluated on ``qhat``.

``V`` is the closed-form vector of :func:`darboux.homoclinic_melnikov_vector`.
The intersection equations are homogeneous in ``V``, so its overall sign
(see ``darboux.CLOSED_FORM_GRADIENT_SCALE``) moves theta_1 and theta_2 by
pi without changing the solution set.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import darboux as dx
from . import lattice as lat
from .lattice import LatticeParams, PerturbationSpec
from .quadrature import integrate_sech_decaying, sech_window

MODES = ("nonresonant", "resonant")
VANISH_TOL = 1e-12
RESIDUAL_TOL = 1e-10
THREADS_ENV = "DNLS_ARNOLD_THREADS"


def hatted_orbit(hp: dx.HomoclinicParams, tau, check: bool = True):
    """``(qhat_n(tau), V_n(tau))`` with the ``gamma_hat`` phase removed.

    With ``check`` the decomposition is repeated at a shifted ``gamma`` and
    the two results compared.
    """
    c = hp.const
    t0 = hp.p / c.mu
    tau = np.asarray(tau, dtype=float)

    def strip(h):
        g_hat = h.gamma + h.Omega * t0
        q = dx.homoclinic_orbit(h, tau - t0) * np.exp(-1j * g_hat)
        V = dx.homoclinic_melnikov_vector(h, tau - t0).d_dq * np.exp(1j * g_hat)
        return q, V

    q, V = strip(hp)
    if check:
        q2, V2 = strip(dx.HomoclinicParams(hp.a, hp.gamma + 1.2345, hp.p, hp.branch, hp.params))
        dev = max(np.max(np.abs(q2 - q)), np.max(np.abs(V2 - V)) / max(np.max(np.abs(V)), 1e-300))
        if dev > 1e-10:
            raise RuntimeError(f"hatted variables depend on gamma_hat (deviation {dev:.3e})")
    return q, V


def _base(a, params, branch):
    return dx.HomoclinicParams(a, 0.0, 0.0, branch, params)


def _hatted_fast(base, tau):
    """``(qhat, Lap qhat, V)`` for ``p = gamma = 0``; the Laplacian acts on the fluctuation only."""
    uni, fl = dx.homoclinic_parts(base, tau)
    V = dx.homoclinic_melnikov_vector(base, tau).d_dq
    return uni + fl, lat.laplacian(fl, base.params), V


def _nonresonant_kernels(qh, lap, V, params):
    r = lat.rho(qh, params)
    k1 = np.sum(r * np.imag(V * lap), axis=-1)
    VG2 = V * 2.0 * np.conj(lap)
    G3 = -2.0 * np.conj(qh) * np.conj(lap)
    return k1, np.sum(r * VG2.real, axis=-1), np.sum(r * VG2.imag, axis=-1), np.sum(G3.real, axis=-1), np.sum(G3.imag, axis=-1)


def _resonant_G2(qh, lap, params):
    qb = np.conj(qh)
    s = np.roll(qb, -1, axis=-1) + np.roll(qb, 1, axis=-1)
    return np.conj(lap) + np.abs(qh) ** 2 * s - 2.0 * params.omega ** 2 * qb


def _resonant_kernels(qh, lap, V, params):
    r = lat.rho(qh, params)
    G1 = lap
    k1 = np.sum(r * np.imag(V * G1), axis=-1)
    k5 = np.sum(np.imag(G1 * _resonant_G2(qh, lap, params)), axis=-1)
    return k1, np.sum(r * V.real, axis=-1), np.sum(r * V.imag, axis=-1), k5


def integrands(mode: str, a: float, params: LatticeParams, branch: int = 1):
    """Vectorized ``tau -> (6, len(tau))`` array of the six integrands."""
    base = _base(a, params, branch)

    def f(tau):
        qh, lap, V = _hatted_fast(base, tau)
        c, s = np.cos(tau), np.sin(tau)
        if mode == "nonresonant":
            k1, re2, im2, re3, im3 = _nonresonant_kernels(qh, lap, V, params)
            return np.array([c * k1, -s * k1, re2, -im2, -re3, im3])
        k1, reV, imV, k5 = _resonant_kernels(qh, lap, V, params)
        return np.array([c * k1, -s * k1, -reV, imV, c * k5, -s * k5])

    return f


@dataclass(frozen=True)
class MelnikovResult:
    a: float
    mode: str
    M: tuple
    amp12: float
    amp34: float
    amp56: float
    th1: float
    th2: float
    th3: float
    omega: float = 0.0
    N: int = 3
    branch: int = 1
    error: float = 0.0
    T: float = 0.0

    @classmethod
    def from_integrals(cls, a, mode, M, **kw) -> "MelnikovResult":
        M = tuple(float(m) for m in M)
        if not all(np.isfinite(M)):
            raise FloatingPointError(f"non-finite Melnikov integrals at a={a}")
        amps = [float(np.hypot(M[2 * k], M[2 * k + 1])) for k in range(3)]
        ths = [float(np.arctan2(M[2 * k + 1], M[2 * k])) for k in range(3)]
        return cls(float(a), mode, M, *amps, *ths, **kw)

    def reconstruction_error(self) -> float:
        pairs = ((self.amp12, self.th1), (self.amp34, self.th2), (self.amp56, self.th3))
        rebuilt = np.concatenate([[A * np.cos(t), A * np.sin(t)] for A, t in pairs])
        return float(np.max(np.abs(rebuilt - np.array(self.M))))

    def row(self) -> list[float]:
        return [self.a, *self.M, self.amp12, self.amp34, self.amp56, self.th1, self.th2, self.th3]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["M"] = list(self.M)
        return d


CSV_COLUMNS = ["a", "M1", "M2", "M3", "M4", "M5", "M6", "amp12", "amp34", "amp56", "th1", "th2", "th3"]


def _check_range(a, params):
    lo, hi = dx.amplitude_range(params.N)
    if not (lo < a < hi):
        raise ValueError(f"a={a} outside the admissible range ({lo:.6g}, {hi:.6g})")


def compute_M(mode: str, a: float, params: LatticeParams, branch: int = 1,
              T: float | None = None, tol: float = 1e-11) -> MelnikovResult:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    _check_range(a, params)
    mu = dx.derived_constants(a, params).mu
    T = sech_window(mu) if T is None else T
    res = integrate_sech_decaying(integrands(mode, a, params, branch), mu, T=T, tol=tol)
    return MelnikovResult.from_integrals(a, mode, res.value, omega=params.omega, N=params.N,
                                         branch=branch, error=res.error, T=T)


def compute_M_nonresonant(a: float, params: LatticeParams, **kw) -> MelnikovResult:
    if params.omega != 0.0:
        raise ValueError("the nonresonant integrals assume omega = 0")
    return compute_M("nonresonant", a, params, **kw)


def compute_M_resonant(a: float, params: LatticeParams, **kw) -> MelnikovResult:
    lo, _ = dx.amplitude_range(params.N)
    if not params.omega > lo:
        raise ValueError(f"the resonant integrals need omega > {lo:.6g}")
    return compute_M("resonant", a, params, **kw)


def bracket_kernel_check(mode: str, a: float, params: LatticeParams, tau, t0: float = 0.37,
                         gamma_hat: float = 0.8, alpha: float = 1.3, branch: int = 1) -> tuple[float, float]:
    """Compare brute-force Poisson brackets with the assembled kernels on a ``tau`` grid.

    Returns the largest relative deviation for the ``F_1`` equation and for
    the level equation.
    """
    base = _base(a, params, branch)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    qh, V = hatted_orbit(base, tau, check=False)
    _, lap, _ = _hatted_fast(base, tau)
    eg = np.exp(1j * gamma_hat)
    pert = PerturbationSpec(mode, 1.0, alpha)
    devF, devL, scaleF, scaleL = 0.0, 0.0, 0.0, 0.0
    for k, s in enumerate(tau):
        t = s - t0
        q = qh[k] * eg
        gF = lat.GradientField(V[k] / eg, np.conj(V[k]) * eg)
        gH = lat.perturbation_gradient(q, t, params, pert)
        brute_F = -1j * lat.poisson_bracket(gF, gH, q, params)
        if mode == "nonresonant":
            k1, re2, im2, _, _ = _nonresonant_kernels(qh[k], lap[k], V[k], params)
            VG2 = re2 + 1j * im2
            kern_F = -2 * alpha * np.sin(t) * k1 - 2 * np.imag(VG2 * np.exp(-2j * gamma_hat))
            gI = lat.I_gradient(q, params)
            brute_L = -1j * lat.poisson_bracket(gI, gH, q, params)
            G3 = -2.0 * np.conj(qh[k]) * np.conj(lap[k])
            kern_L = 2 * np.sum(np.imag(G3 * np.exp(-2j * gamma_hat)))
        else:
            k1, reV, imV, k5 = _resonant_kernels(qh[k], lap[k], V[k], params)
            kern_F = 2 * alpha * np.imag((reV + 1j * imV) / eg) - 2 * np.sin(t) * k1
            h2 = PerturbationSpec("resonant", 1.0, 0.0)
            brute_L = -1j * lat.poisson_bracket(lat.h0_gradient(q, params),
                                                lat.perturbation_gradient(q, t, params, h2), q, params)
            kern_L = -2 * np.sin(t) * k5
        devF = max(devF, abs(brute_F - kern_F))
        devL = max(devL, abs(brute_L - kern_L))
        scaleF = max(scaleF, abs(kern_F))
        scaleL = max(scaleL, abs(kern_L))
    return devF / max(scaleF, 1e-300), devL / max(scaleL, 1e-300)


# -- intersection equations ------------------------------------------------------------

class SolvabilityError(ValueError):
    """A precondition of the intersection equations fails.

    ``reason`` is one of ``amp12``, ``amp34``, ``amp56`` (a vanishing
    amplitude), ``gap`` (level difference too large) or ``alpha`` (below
    threshold); ``required`` carries the bound that was violated.
    """

    def __init__(self, reason: str, message: str, required: float | None = None):
        super().__init__(message)
        self.reason = reason
        self.required = required


def alpha_threshold(res: MelnikovResult) -> float:
    """Smallest ``|alpha|`` for which the first equation is solvable for every phase."""
    if res.mode == "nonresonant":
        return res.amp34 / res.amp12
    return res.amp12 / res.amp34


@dataclass(frozen=True)
class IntersectionSolution:
    a1: float
    a2: float
    gamma_hat: float
    t0: float
    residuals: tuple
    jacobian_det: float
    mode: str = "nonresonant"
    alternatives: tuple = field(default=(), compare=False)

    def to_dict(self) -> dict:
        return {"a1": self.a1, "a2": self.a2, "gamma_hat": self.gamma_hat, "t0": self.t0,
                "residuals": list(self.residuals), "jacobian_det": self.jacobian_det,
                "alternatives": [list(x) for x in self.alternatives]}


def _wrap_pi(x):
    return float((x + np.pi) % (2 * np.pi) - np.pi)


def _wrap_2pi(x):
    return float(x % (2 * np.pi))


def equations(mode, a1, a2, epsilon, alpha, res: MelnikovResult, gamma_hat, t0):
    """Residuals of the two leading-order intersection equations."""
    if mode == "nonresonant":
        e1 = alpha * res.amp12 * np.sin(t0 + res.th1) + res.amp34 * np.sin(2 * gamma_hat + res.th2)
        e2 = (a1 - a2) - 2 * epsilon * res.amp56 * np.sin(2 * gamma_hat + res.th3)
    else:
        e1 = res.amp12 * np.sin(t0 + res.th1) + alpha * res.amp34 * np.sin(gamma_hat + res.th2)
        e2 = (a1 - a2) - 2 * epsilon * res.amp56 * np.sin(t0 + res.th3)
    return float(e1), float(e2)


def jacobian_det(mode, epsilon, alpha, res: MelnikovResult, gamma_hat, t0) -> float:
    """Determinant of d(e1, e2)/d(gamma_hat, t0)."""
    if mode == "nonresonant":
        return float(alpha * res.amp12 * np.cos(t0 + res.th1) * 4 * epsilon * res.amp56 * np.cos(2 * gamma_hat + res.th3))
    return float(-alpha * res.amp34 * np.cos(gamma_hat + res.th2) * 2 * epsilon * res.amp56 * np.cos(t0 + res.th3))


def check_solvable(mode, a1, a2, epsilon, alpha, res: MelnikovResult) -> None:
    if mode not in MODES or res.mode != mode:
        raise ValueError(f"mode {mode!r} does not match the Melnikov data ({res.mode!r})")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    first = "amp12" if mode == "nonresonant" else "amp34"
    if getattr(res, first) <= VANISH_TOL:
        raise SolvabilityError(first, f"{first} vanishes at a={res.a:.17g}")
    if res.amp56 <= VANISH_TOL:
        raise SolvabilityError("amp56", f"amp56 vanishes at a={res.a:.17g}")
    bound = 2 * epsilon * res.amp56
    if not abs(a1 - a2) < bound:
        raise SolvabilityError("gap", f"|a1 - a2| = {abs(a1 - a2):.6g} must be below 2 eps amp56 = {bound:.6g} (a={res.a:.17g})", bound)
    a0 = alpha_threshold(res)
    if not abs(alpha) > a0:
        raise SolvabilityError("alpha", f"|alpha| = {abs(alpha):.6g} must exceed alpha_0 = {a0:.6g} (a={res.a:.17g})", a0)


def solve_intersection(mode: str, a1: float, a2: float, epsilon: float, alpha: float,
                       res: MelnikovResult) -> IntersectionSolution:
    """Solve the intersection equations by arcsine with both branches enumerated.

    Nonresonant: the level equation fixes ``gamma_hat``, then the ``F_1``
    equation fixes ``t0``.  Resonant: the level equation fixes ``t0``, then
    ``gamma_hat``.  Every residual-passing, transversal pair is kept; the
    one with smallest ``|t0|`` is primary.
    """
    check_solvable(mode, a1, a2, epsilon, alpha, res)
    s = (a1 - a2) / (2 * epsilon * res.amp56)
    outer = (np.arcsin(s), np.pi - np.arcsin(s))
    found = []
    for u in outer:
        if mode == "nonresonant":
            for g in ((u - res.th3) / 2, (u - res.th3) / 2 + np.pi):
                r = -res.amp34 * np.sin(2 * g + res.th2) / (alpha * res.amp12)
                for v in (np.arcsin(r), np.pi - np.arcsin(r)):
                    found.append((_wrap_2pi(g), _wrap_pi(v - res.th1)))
        else:
            t0 = u - res.th3
            r = -res.amp12 * np.sin(t0 + res.th1) / (alpha * res.amp34)
            for v in (np.arcsin(r), np.pi - np.arcsin(r)):
                found.append((_wrap_2pi(v - res.th2), _wrap_pi(t0)))
    good = []
    for g, t0 in found:
        e = equations(mode, a1, a2, epsilon, alpha, res, g, t0)
        det = jacobian_det(mode, epsilon, alpha, res, g, t0)
        if max(abs(e[0]), abs(e[1])) <= RESIDUAL_TOL and abs(det) > 0:
            good.append((abs(t0), g, t0, e, det))
    if not good:
        raise SolvabilityError("residual", "no branch satisfies both equations to tolerance")
    good.sort(key=lambda x: (x[0], x[1]))
    _, g, t0, e, det = good[0]
    alts = tuple((gg, tt) for _, gg, tt, _, _ in good[1:])
    return IntersectionSolution(float(a1), float(a2), g, t0, e, det, mode, alts)


# -- sweeps -------------------------------------------------------------------------------

@dataclass
class Sweep:
    mode: str
    results: list
    flags: list

    def amplitudes(self) -> np.ndarray:
        return np.array([[r.amp12, r.amp34, r.amp56] for r in self.results])


def _workers(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def sweep_curves(mode: str, a_grid, params: LatticeParams, branch: int = 1, tol: float = 1e-11,
                 workers: int | None = None, T: float | None = None) -> Sweep:
    """Melnikov data over an amplitude grid, with solvability flags.

    A flag is raised for any amplitude curve that comes within ``VANISH_TOL``
    of zero or whose underlying integrals change sign between neighbours.
    """
    grid = [float(a) for a in a_grid]
    for a in grid:
        _check_range(a, params)
    job = (lambda a: compute_M(mode, a, params, branch=branch, T=T, tol=tol))
    n = _workers(workers)
    if n > 1 and len(grid) > 1:
        with ThreadPoolExecutor(n) as ex:
            results = list(ex.map(job, grid))
    else:
        results = [job(a) for a in grid]
    flags = []
    names = ("amp12", "amp34", "amp56")
    for k, name in enumerate(names):
        vals = np.array([getattr(r, name) for r in results])
        for i in np.flatnonzero(vals <= VANISH_TOL):
            flags.append(f"{name} near zero at a={grid[i]:.17g}")
        pair = np.array([r.M[2 * k:2 * k + 2] for r in results])
        both = np.all(np.sign(pair[1:]) != np.sign(pair[:-1]), axis=1)
        for i in np.flatnonzero(both):
            flags.append(f"{name}: both integrals change sign between a={grid[i]:.17g} and a={grid[i + 1]:.17g}")
    return Sweep(mode, results, flags)
