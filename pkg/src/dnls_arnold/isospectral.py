"""Floquet theory of the spatial Lax operator.

The transfer matrix at site n is ``L_n(z) = [[z, i h q_n], [i h conj(q_n), 1/z]]``,
the monodromy is ``M_N = L_{N-1} ... L_0`` and the Floquet discriminant is
``Delta(z) = trace(M_N) / D`` with ``D^2 = prod rho_n``.  Public functions
take the spectral parameter ``z``; ``lambda = log(z) / (i h)`` only appears
inside the temporal Lax matrix.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import lattice as lat
from .lattice import GradientField, LatticeParams

__all__ = [
    "SpectralScan", "BlochPair", "GradientField", "DegenerateSpectrumError", "CriticalPointLost",
    "transfer_matrix", "monodromy", "discriminant", "discriminant_derivative",
    "find_critical_points", "refine_critical_point", "constant_F", "spectral_classes",
    "bloch_solutions", "melnikov_gradient", "gradient_fd_oracle", "lax_B",
    "lax_compatibility_check",
]

CRITICAL_TOL = 1e-10
DEDUP_TOL = 1e-9
SIMPLE_TOL = 1e-8


class DegenerateSpectrumError(ValueError):
    """The monodromy has (numerically) coincident eigenvalues."""


class CriticalPointLost(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralScan:
    z: complex
    delta: complex
    ddelta_dz: complex
    is_critical: bool
    d2delta_dz2: complex = np.nan
    is_simple: bool = False


@dataclass(frozen=True)
class BlochPair:
    """Eigenvector-seeded solutions of ``psi_{n+1} = L_n psi_n`` for n = 0..N.

    ``psi_plus[n + N] = D zeta psi_plus[n]`` and ``psi_minus[n + N] = D / zeta psi_minus[n]``.
    """

    z: complex
    psi_plus: np.ndarray   # (N + 1, 2)
    psi_minus: np.ndarray  # (N + 1, 2)
    zeta: complex
    multipliers: tuple
    wronskian: np.ndarray  # (N + 1,)
    D: float


def _check_z(z):
    if np.any(np.asarray(z) == 0):
        raise ValueError("spectral parameter z must be nonzero")


def transfer_matrix(z: complex, qn: complex, params: LatticeParams) -> np.ndarray:
    _check_z(z)
    ih = 1j * params.h
    return np.array([[z, ih * qn], [ih * np.conj(qn), 1.0 / z]], dtype=complex)


def _monodromy_entries(z, q, h, order=0):
    """Forward product over sites, vectorized in ``z``.

    Returns a list (length ``order + 1``) of 4-tuples ``(m00, m01, m10, m11)``
    holding M_N and its first ``order`` z-derivatives.
    """
    z = np.asarray(z, dtype=complex)
    one, zero = np.ones_like(z), np.zeros_like(z)
    zi = 1.0 / z
    M = [one, zero, zero, one]
    dM = [zero] * 4
    d2M = [zero] * 4
    # dL/dz = diag(1, -1/z^2), d2L/dz2 = diag(0, 2/z^3)
    l11p = -zi * zi
    l11pp = 2.0 * zi ** 3
    for qn in q:
        c = 1j * h * qn
        cb = 1j * h * np.conj(qn)
        if order >= 2:
            d2M = [
                z * d2M[0] + c * d2M[2] + 2 * dM[0],
                z * d2M[1] + c * d2M[3] + 2 * dM[1],
                cb * d2M[0] + zi * d2M[2] + 2 * l11p * dM[2] + l11pp * M[2],
                cb * d2M[1] + zi * d2M[3] + 2 * l11p * dM[3] + l11pp * M[3],
            ]
        if order >= 1:
            dM = [
                z * dM[0] + c * dM[2] + M[0],
                z * dM[1] + c * dM[3] + M[1],
                cb * dM[0] + zi * dM[2] + l11p * M[2],
                cb * dM[1] + zi * dM[3] + l11p * M[3],
            ]
        M = [
            z * M[0] + c * M[2],
            z * M[1] + c * M[3],
            cb * M[0] + zi * M[2],
            cb * M[1] + zi * M[3],
        ]
    return [M, dM, d2M][: order + 1]


def monodromy(z: complex, q: np.ndarray, params: LatticeParams) -> np.ndarray:
    _check_z(z)
    m00, m01, m10, m11 = _monodromy_entries(z, q, params.h)[0]
    return np.array([[m00, m01], [m10, m11]], dtype=complex)


def discriminant(z, q: np.ndarray, params: LatticeParams):
    _check_z(z)
    M = _monodromy_entries(z, q, params.h)[0]
    out = (M[0] + M[3]) / lat.invariant_D(q, params)
    return out[()] if np.ndim(out) == 0 else out


def discriminant_derivative(z, q: np.ndarray, params: LatticeParams):
    """dDelta/dz by the product rule over the transfer-matrix factors."""
    _check_z(z)
    _, dM = _monodromy_entries(z, q, params.h, order=1)
    out = (dM[0] + dM[3]) / lat.invariant_D(q, params)
    return out[()] if np.ndim(out) == 0 else out


def _derivatives(z, q, params):
    M, dM, d2M = _monodromy_entries(z, q, params.h, order=2)
    D = lat.invariant_D(q, params)
    return (M[0] + M[3]) / D, (dM[0] + dM[3]) / D, (d2M[0] + d2M[3]) / D


def second_derivative_fd(z: complex, q: np.ndarray, params: LatticeParams) -> complex:
    """Central difference of the analytic first derivative."""
    dz = 1e-5 * max(abs(z), 1e-3)
    return (discriminant_derivative(z + dz, q, params) - discriminant_derivative(z - dz, q, params)) / (2 * dz)


def refine_critical_point(z0: complex, q: np.ndarray, params: LatticeParams,
                          max_iter: int = 50, max_move: float = 0.5) -> complex:
    """Newton iteration on dDelta/dz started at ``z0``."""
    z = complex(z0)
    for _ in range(max_iter):
        _, d1, d2 = _derivatives(z, q, params)
        if d2 == 0 or not np.isfinite(d2):
            break
        step = d1 / d2
        z -= step
        if abs(z - z0) > max_move * max(1.0, abs(z0)) or z == 0:
            raise CriticalPointLost(f"Newton left the neighbourhood of {z0}")
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            break
    return z


def find_critical_points(q: np.ndarray, params: LatticeParams, r_min: float = 0.2, r_max: float = 5.0,
                         n_radial: int = 64, n_angular: int = 64, max_iter: int = 80) -> list[SpectralScan]:
    """All critical points of Delta reachable by Newton from a polar seed grid.

    Returns points inside the annulus ``r_min <= |z| <= r_max`` with
    ``|dDelta/dz| <= 1e-10``, deduplicated to 1e-9, sorted by modulus then angle.
    """
    if not (0 < r_min < r_max):
        raise ValueError("annulus must satisfy 0 < r_min < r_max")
    r = np.geomspace(r_min, r_max, n_radial)
    th = (np.arange(n_angular) + 0.5) * 2 * np.pi / n_angular
    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    alive = np.ones(z.size, dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            _, d1, d2 = _derivatives(z, q, params)
            step = d1 / d2
            z = np.where(alive, z - step, z)
            alive &= np.isfinite(z) & (np.abs(z) > 0.25 * r_min) & (np.abs(z) < 4 * r_max)
            z = np.where(alive, z, 1.0)
        _, d1, _ = _derivatives(z, q, params)
    ok = alive & (np.abs(d1) <= CRITICAL_TOL) & (np.abs(z) >= r_min) & (np.abs(z) <= r_max)
    roots: list[complex] = []
    for zz in z[ok]:
        if all(abs(zz - w) > DEDUP_TOL * max(1.0, abs(w)) for w in roots):
            roots.append(complex(zz))
    if not roots:
        warnings.warn("no critical point converged from any seed", RuntimeWarning)
        return []
    roots.sort(key=lambda w: (round(abs(w), 9), np.angle(w)))
    scans = []
    for zz in roots:
        delta, d1, _ = _derivatives(zz, q, params)
        d2 = second_derivative_fd(zz, q, params)
        scans.append(SpectralScan(zz, complex(delta), complex(d1), bool(abs(d1) <= CRITICAL_TOL),
                                  complex(d2), bool(abs(d2) > SIMPLE_TOL)))
    return scans


def spectral_classes(points, tol: float = 1e-7) -> list[list[complex]]:
    """Group critical points under ``z -> -z`` and ``z -> 1/z``.

    For even states Delta(1/z) = Delta(z) and Delta(-z) = (-1)^N Delta(z),
    so each class carries one independent constant of motion.
    """
    zs = [complex(getattr(p, "z", p)) for p in points]
    classes: list[list[complex]] = []
    for z in zs:
        images = (z, -z, 1 / z, -1 / z)
        for cls in classes:
            if any(abs(w - img) <= tol * max(1.0, abs(img)) for w in cls for img in images):
                cls.append(z)
                break
        else:
            classes.append([z])
    return classes


def constant_F(q: np.ndarray, params: LatticeParams, z_c: complex) -> complex:
    """``F = Delta(z_c(q), q)`` at a converged critical point."""
    d1 = discriminant_derivative(z_c, q, params)
    if abs(d1) > 1e-8 * max(1.0, abs(z_c)) ** params.N:
        raise ValueError(f"z_c={z_c} is not a critical point (|dDelta/dz| = {abs(d1):.2e})")
    return complex(discriminant(z_c, q, params))


def bloch_solutions(z: complex, q: np.ndarray, params: LatticeParams, collision_tol: float = 1e-10) -> BlochPair:
    """Bloch solutions seeded by the unit eigenvectors of the monodromy.

    The ``+`` solution carries the multiplier of larger modulus (ties broken
    by the larger argument).
    """
    M = monodromy(z, q, params)
    D = lat.invariant_D(q, params)
    w, V = np.linalg.eig(M)
    if abs(w[0] - w[1]) <= collision_tol * D:
        raise DegenerateSpectrumError(f"monodromy eigenvalues collide at z={z}: {w}")
    key = [(round(abs(m) / D, 12), np.angle(m)) for m in w]
    ip, im = (0, 1) if key[0] > key[1] else (1, 0)
    N = params.N
    psi = np.empty((2, N + 1, 2), dtype=complex)
    psi[0, 0] = V[:, ip] / np.linalg.norm(V[:, ip])
    psi[1, 0] = V[:, im] / np.linalg.norm(V[:, im])
    for n in range(N):
        L = transfer_matrix(z, q[n], params)
        psi[:, n + 1] = psi[:, n] @ L.T
    W = psi[0, :, 0] * psi[1, :, 1] - psi[0, :, 1] * psi[1, :, 0]
    return BlochPair(complex(z), psi[0], psi[1], complex(w[ip] / D), (complex(w[ip]), complex(w[im])), W, D)


def _bloch_gradient(bp: BlochPair, params: LatticeParams) -> GradientField:
    pp, pm = bp.psi_plus, bp.psi_minus
    W = bp.wronskian
    if np.any(np.abs(W[1:]) < 1e-300):
        raise DegenerateSpectrumError("vanishing Wronskian")
    pre = 1j * params.h * (bp.zeta - 1.0 / bp.zeta) / (2.0 * W[1:])
    d_dq = pre * (pp[1:, 1] * pm[:-1, 1] + pp[:-1, 1] * pm[1:, 1])
    d_dqbar = -pre * (pp[1:, 0] * pm[:-1, 0] + pp[:-1, 0] * pm[1:, 0])
    return GradientField(d_dq, d_dqbar)


def melnikov_gradient(q: np.ndarray, params: LatticeParams, z_c: complex,
                      separation: float = 1e-4, radius: float = 0.1, nodes: int = 32) -> GradientField:
    """Gradient of ``F = Delta(z_c)`` from the Bloch-solution formula.

    The formula equals dDelta/dq at fixed z for every z, so it is a Laurent
    polynomial in z.  At a double point (multipliers coincide, e.g. on the
    uniform plane or along its homoclinic orbits) it is a 0/0 limit; there
    the formula is evaluated on a circle of radius ``radius |z_c|`` and the
    mean taken, which reproduces the value at the centre.
    """
    D = lat.invariant_D(q, params)
    m = np.linalg.eigvals(monodromy(z_c, q, params))
    if abs(m[0] - m[1]) > separation * D:
        return _bloch_gradient(bloch_solutions(z_c, q, params), params)
    acc_q = np.zeros(params.N, dtype=complex)
    acc_qb = np.zeros(params.N, dtype=complex)
    for k in range(nodes):
        zk = z_c + radius * abs(z_c) * np.exp(2j * np.pi * (k + 0.5) / nodes)
        g = _bloch_gradient(bloch_solutions(zk, q, params), params)
        acc_q += g.d_dq
        acc_qb += g.d_dqbar
    return GradientField(acc_q / nodes, acc_qb / nodes)


def gradient_fd_oracle(q: np.ndarray, params: LatticeParams, z_c: complex, step: float = 1e-5,
                       reconverge: bool = True) -> GradientField:
    """Central-difference gradient of F under independent perturbations of each site.

    With ``reconverge`` the critical point is re-found after every
    perturbation; otherwise it is frozen at ``z_c``.
    """
    if not (1e-7 <= step <= 1e-4):
        raise ValueError("step must lie in [1e-7, 1e-4]")
    q = np.asarray(q, dtype=complex)

    def F(qq):
        z = z_c
        if reconverge:
            z = refine_critical_point(z_c, qq, params, max_move=1e-2)
            if abs(discriminant_derivative(z, qq, params)) > 1e-8:
                raise CriticalPointLost(f"critical point near {z_c} lost under perturbation")
        return discriminant(z, qq, params)

    return lat.wirtinger_fd(F, q, step)


def lax_B(z: complex, qn: complex, qprev: complex, params: LatticeParams) -> np.ndarray:
    """Temporal Lax matrix ``B_n``; uses ``2 i lambda h = 2 log z`` on the principal branch."""
    _check_z(z)
    h, w2 = params.h, params.omega ** 2
    two_il_h = 2.0 * np.log(complex(z))
    b11 = 1 - z * z + two_il_h - h * h * qn * np.conj(qprev) + w2 * h * h
    b12 = -1j * z * h * qn + 1j * h * qprev / z
    b21 = -1j * z * h * np.conj(qprev) + 1j * h * np.conj(qn) / z
    b22 = 1 / (z * z) - 1 + two_il_h + h * h * np.conj(qn) * qprev - w2 * h * h
    return (1j / h ** 2) * np.array([[b11, b12], [b21, b22]], dtype=complex)


def lax_residual(q: np.ndarray, z: complex, params: LatticeParams) -> float:
    """``max_n |dL_n/dt - (B_{n+1} L_n - L_n B_n)|`` with dL_n/dt from the DNLS field."""
    N, h = params.N, params.h
    qdot = lat.rhs_unperturbed(q, params)
    B = [lax_B(z, q[n], q[n - 1], params) for n in range(N)]
    worst = 0.0
    for n in range(N):
        L = transfer_matrix(z, q[n], params)
        Ldot = np.array([[0, 1j * h * qdot[n]], [1j * h * np.conj(qdot[n]), 0]])
        r = Ldot - (B[(n + 1) % N] @ L - L @ B[n])
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def lax_compatibility_check(traj, z: complex) -> float:
    """Largest Lax-representation residual over all samples of an unperturbed trajectory."""
    _check_z(z)
    return max(lax_residual(q, z, traj.params) for q in traj.states)
