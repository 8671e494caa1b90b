"""Phase space, vector fields and classical invariants of the periodic, even DNLS lattice.

States are plain complex numpy arrays ``q`` of length ``N``.  Indices wrap
modulo ``N`` and physical states satisfy ``q[N - n] == q[n]``.

Gradients use Wirtinger calculus: ``q_n`` and ``conj(q_n)`` are treated as
independent variables and both partial derivatives are stored explicitly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

PERTURBATION_MODES = ("none", "nonresonant", "resonant")


@dataclass(frozen=True)
class LatticeParams:
    N: int
    omega: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise ValueError(f"N must be an integer >= 3, got {self.N!r}")
        if not np.isfinite(self.omega) or self.omega < 0:
            raise ValueError(f"omega must be finite and >= 0, got {self.omega!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def h(self) -> float:
        return 1.0 / self.N


@dataclass(frozen=True)
class PerturbationSpec:
    """Which Hamiltonian perturbation is switched on, and how strongly.

    ``nonresonant``: ``alpha sin(t) sum |d_n|^2 + sum (d_n^2 + conj(d_n)^2)``
    ``resonant``:    ``alpha sum (q_n + conj(q_n)) + sin(t) sum |d_n|^2``
    with ``d_n = (q_n - q_{n-1}) / h``.
    """

    mode: str = "none"
    epsilon: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.mode not in PERTURBATION_MODES:
            raise ValueError(f"unknown perturbation mode {self.mode!r}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon!r}")
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if self.mode == "none" and self.epsilon != 0:
            raise ValueError("mode='none' with nonzero epsilon is ambiguous")


@dataclass(frozen=True)
class GradientField:
    """Per-site Wirtinger gradient ``(dF/dq_n, dF/dconj(q_n))``."""

    d_dq: np.ndarray
    d_dqbar: np.ndarray

    def __post_init__(self):
        d_dq = np.asarray(self.d_dq, dtype=complex)
        d_dqbar = np.asarray(self.d_dqbar, dtype=complex)
        if d_dq.shape != d_dqbar.shape:
            raise ValueError("gradient components have different lengths")
        object.__setattr__(self, "d_dq", d_dq)
        object.__setattr__(self, "d_dqbar", d_dqbar)

    def symmetrized(self) -> "GradientField":
        """Project onto the even subspace: average site n with site N - n."""
        return GradientField(even_part(self.d_dq), even_part(self.d_dqbar))

    def scaled(self, c) -> "GradientField":
        return GradientField(c * self.d_dq, c * self.d_dqbar)

    def norm(self) -> float:
        return float(max(np.max(np.abs(self.d_dq)), np.max(np.abs(self.d_dqbar))))

    def __sub__(self, other: "GradientField") -> "GradientField":
        return GradientField(self.d_dq - other.d_dq, self.d_dqbar - other.d_dqbar)


def reflect(q: np.ndarray) -> np.ndarray:
    """Return ``q[-n mod N]`` along the last axis."""
    return np.roll(np.flip(q, axis=-1), 1, axis=-1)


def even_part(q: np.ndarray) -> np.ndarray:
    return 0.5 * (q + reflect(q))


def even_defect(q: np.ndarray) -> float:
    q = np.asarray(q)
    return float(np.max(np.abs(q - reflect(q))))


def lattice_state(q, params: LatticeParams | None = None) -> np.ndarray:
    """Validate a state and project it onto the even subspace.

    The projection is applied once here; evolution never re-imposes it.
    """
    q = np.array(q, dtype=complex)
    if q.ndim != 1:
        raise ValueError("state must be one-dimensional")
    if params is not None and q.size != params.N:
        raise ValueError(f"state has {q.size} sites, params say N={params.N}")
    if q.size < 3:
        raise ValueError("need at least 3 sites")
    if not np.all(np.isfinite(q)):
        raise ValueError("state has non-finite entries")
    return even_part(q)


def plane_wave(params: LatticeParams, a: float, gamma: float = 0.0) -> np.ndarray:
    return np.full(params.N, a * np.exp(1j * gamma), dtype=complex)


def random_even_state(params: LatticeParams, rng: np.random.Generator, amplitude: float = 1.0) -> np.ndarray:
    z = rng.normal(size=params.N) + 1j * rng.normal(size=params.N)
    return lattice_state(amplitude * z / np.sqrt(2.0))


def rho(q: np.ndarray, params: LatticeParams) -> np.ndarray:
    h = params.h
    return 1.0 + h * h * (q.real ** 2 + q.imag ** 2)


def _neighbour_sum(q: np.ndarray) -> np.ndarray:
    # q[n+1] + q[n-1]; addition is commutative so mirrored sites see identical arithmetic
    s = np.empty_like(q)
    s[..., 1:-1] = q[..., 2:] + q[..., :-2]
    s[..., 0] = q[..., 1] + q[..., -1]
    s[..., -1] = q[..., 0] + q[..., -2]
    return s


def laplacian(q: np.ndarray, params: LatticeParams) -> np.ndarray:
    h = params.h
    return (_neighbour_sum(q) - 2.0 * q) / (h * h)


def rhs_unperturbed(q: np.ndarray, params: LatticeParams) -> np.ndarray:
    s = _neighbour_sum(q)
    h = params.h
    w2 = params.omega ** 2
    return -1j * ((s - 2.0 * q) / (h * h) + (q.real ** 2 + q.imag ** 2) * s - 2.0 * w2 * q)


def hamiltonian_h0(q: np.ndarray, params: LatticeParams) -> float:
    h = params.h
    hop = 2.0 * np.real(np.sum(np.conj(q) * np.roll(q, -1)))
    logs = np.sum(np.log(rho(q, params)))
    return float((hop - 2.0 / h ** 2 * (1.0 + params.omega ** 2 * h ** 2) * logs) / h ** 2)


def h0_gradient(q: np.ndarray, params: LatticeParams) -> GradientField:
    h = params.h
    c = 2.0 * (1.0 + params.omega ** 2 * h ** 2)
    r = rho(q, params)
    d_dqbar = (_neighbour_sum(q) - c * q / r) / h ** 2
    d_dq = (_neighbour_sum(np.conj(q)) - c * np.conj(q) / r) / h ** 2
    return GradientField(d_dq, d_dqbar)


def invariant_I(q: np.ndarray, params: LatticeParams) -> float:
    return float(np.sum(np.log(rho(q, params))) / params.h ** 2)


def I_gradient(q: np.ndarray, params: LatticeParams) -> GradientField:
    r = rho(q, params)
    return GradientField(np.conj(q) / r, q / r)


def invariant_D(q: np.ndarray, params: LatticeParams) -> float:
    # positive root; every factor is >= 1
    return float(np.exp(0.5 * np.sum(np.log(rho(q, params)))))


def level_I(a: float, params: LatticeParams) -> float:
    """Value of I on the uniform plane of amplitude ``a``."""
    h = params.h
    return float(np.log1p(h * h * a * a) / h ** 3)


def level_H0(a: float, params: LatticeParams) -> float:
    """Value of H0 on the uniform plane of amplitude ``a``."""
    h = params.h
    return float((2.0 * a * a - 2.0 / h ** 2 * (1.0 + params.omega ** 2 * h ** 2) * np.log1p(h * h * a * a)) / h ** 3)


# -- perturbations -------------------------------------------------------------

def _differences(q: np.ndarray, params: LatticeParams) -> np.ndarray:
    return (q - np.roll(q, 1)) / params.h


def perturbation_value(q: np.ndarray, t: float, params: LatticeParams, pert: PerturbationSpec) -> float:
    """The perturbing Hamiltonian (without the epsilon prefactor)."""
    if pert.mode == "none":
        return 0.0
    d = _differences(q, params)
    dirichlet = float(np.sum(np.abs(d) ** 2))
    if pert.mode == "nonresonant":
        return pert.alpha * np.sin(t) * dirichlet + float(np.sum(2.0 * np.real(d * d)))
    return pert.alpha * float(np.sum(2.0 * q.real)) + np.sin(t) * dirichlet


def perturbation_gradient(q: np.ndarray, t: float, params: LatticeParams, pert: PerturbationSpec) -> GradientField:
    """Hand-derived Wirtinger gradient of :func:`perturbation_value`.

    With ``Lap`` the periodic second difference,
    ``d/dconj(q_n) sum |d|^2 = -Lap(q)_n`` and
    ``d/dconj(q_n) sum conj(d)^2 = -2 Lap(conj q)_n``.
    """
    if pert.mode == "none":
        z = np.zeros(params.N, dtype=complex)
        return GradientField(z, z.copy())
    lap = laplacian(q, params)
    lap_bar = np.conj(lap)
    s = np.sin(t)
    if pert.mode == "nonresonant":
        d_dqbar = -pert.alpha * s * lap - 2.0 * lap_bar
        d_dq = -pert.alpha * s * lap_bar - 2.0 * lap
    else:
        d_dqbar = pert.alpha - s * lap
        d_dq = pert.alpha - s * lap_bar
    return GradientField(d_dq, d_dqbar)


def rhs_perturbed(q: np.ndarray, t: float, params: LatticeParams, pert: PerturbationSpec) -> np.ndarray:
    base = rhs_unperturbed(q, params)
    if pert.epsilon == 0.0:
        return base
    g = perturbation_gradient(q, t, params, pert)
    return base - 1j * pert.epsilon * rho(q, params) * g.d_dqbar


def vector_field(params: LatticeParams, pert: PerturbationSpec | None = None) -> Callable[[float, np.ndarray], np.ndarray]:
    """``f(t, q)`` suitable for ODE solvers."""
    if pert is None or pert.epsilon == 0.0:
        return lambda t, q: rhs_unperturbed(q, params)
    return lambda t, q: rhs_perturbed(q, t, params, pert)


def poisson_bracket(grad_f: GradientField, grad_g: GradientField, q: np.ndarray, params: LatticeParams) -> complex:
    """``{f, g} = sum_n rho_n (df/dq_n dg/dconj(q_n) - df/dconj(q_n) dg/dq_n)``.

    With this bracket ``dF/dt = -i {F, H}`` along ``i dq_n/dt = rho_n dH/dconj(q_n)``.
    """
    n = np.asarray(q).size
    for g in (grad_f, grad_g):
        if g.d_dq.size != n or g.d_dqbar.size != n:
            raise ValueError("gradient length does not match the state")
    r = rho(q, params)
    return complex(np.sum(r * (grad_f.d_dq * grad_g.d_dqbar - grad_f.d_dqbar * grad_g.d_dq)))


def wirtinger_fd(f: Callable[[np.ndarray], float], q: np.ndarray, step: float = 1e-5) -> GradientField:
    """Central-difference Wirtinger gradient of a scalar function of the state."""
    q = np.asarray(q, dtype=complex)
    d_dq = np.empty(q.size, dtype=complex)
    d_dqbar = np.empty(q.size, dtype=complex)
    for n in range(q.size):
        e = np.zeros(q.size, dtype=complex)
        e[n] = step
        fx = (f(q + e) - f(q - e)) / (2 * step)
        fy = (f(q + 1j * e) - f(q - 1j * e)) / (2 * step)
        d_dq[n] = 0.5 * (fx - 1j * fy)
        d_dqbar[n] = 0.5 * (fx + 1j * fy)
    return GradientField(d_dq, d_dqbar)


def continuum_hamiltonian(profile: Callable, derivative: Callable, omega: float = 0.0, samples: int = 4096) -> float:
    """``-int_0^1 (|q_x|^2 + 2 omega^2 |q|^2 - |q|^4) dx`` by the composite trapezoid rule.

    ``profile`` must be 1-periodic so the trapezoid rule is spectrally accurate.
    """
    x = np.arange(samples) / samples
    q = profile(x)
    qx = derivative(x)
    integrand = np.abs(qx) ** 2 + 2 * omega ** 2 * np.abs(q) ** 2 - np.abs(q) ** 4
    return float(-np.mean(integrand))
