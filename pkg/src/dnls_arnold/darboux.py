"""Darboux dressing of the plane wave and the explicit homoclinic family.

Two routes produce the same orbits: :func:`darboux_transform` applies the
dressing to any state and pair of Lax eigenfunctions, while
:func:`homoclinic_orbit` evaluates the closed form.  The scalar called
``Gamma`` in the closed form is :func:`_gamma_scalar` here, distinct from
the dressing matrix :meth:`DarbouxData.gamma_matrix`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from . import isospectral as iso
from . import lattice as lat
from .lattice import GradientField, LatticeParams

# Ratio between the closed-form Melnikov vector and the even projection of
# the Bloch-formula gradient of F_1: closed_form = SCALE * sym(bloch).
CLOSED_FORM_GRADIENT_SCALE = -1.0


class SingularDressing(ValueError):
    pass


def amplitude_range(N: int) -> tuple[float, float]:
    """Open interval of amplitudes whose plane wave has exactly one unstable direction."""
    lo = N * np.tan(np.pi / N)
    hi = np.inf if N <= 4 else N * np.tan(2 * np.pi / N)
    return float(lo), float(hi)


@dataclass(frozen=True)
class DerivedConstants:
    a: float
    beta: float
    rho: float
    s: float          # sqrt(rho cos^2 beta - 1)
    mu: float
    z_hat: float
    phi: float
    K: float

    @property
    def z_d(self) -> float:
        return self.z_hat


def derived_constants(a: float, params: LatticeParams) -> DerivedConstants:
    h, N = params.h, params.N
    beta = np.pi / N
    rho = 1.0 + h * h * a * a
    disc = rho * np.cos(beta) ** 2 - 1.0
    if not disc > 0:
        raise ValueError(f"a={a} is below the admissible range (rho cos^2 beta = {disc + 1:.6g} <= 1)")
    s = np.sqrt(disc)
    sr = np.sqrt(rho)
    mu = 2.0 / h ** 2 * sr * np.sin(beta) * s
    z_hat = sr * np.cos(beta) + s
    phi = float(np.angle(s + 1j * sr * np.sin(beta)))
    K = -2.0 * N * (1.0 - z_hat ** 4) / (8.0 * a * rho ** 1.5 * z_hat ** 2) * s
    return DerivedConstants(float(a), beta, rho, float(s), float(mu), float(z_hat), phi, float(K))


@dataclass(frozen=True)
class HomoclinicParams:
    a: float
    gamma: float = 0.0
    p: float = 0.0
    branch: int = 1
    params: LatticeParams = LatticeParams(3)

    def __post_init__(self):
        if self.branch not in (1, -1):
            raise ValueError("branch must be +1 or -1")
        lo, hi = amplitude_range(self.params.N)
        if not (lo < self.a < hi):
            raise ValueError(f"a={self.a} outside the admissible range ({lo:.6g}, {hi:.6g}) for N={self.params.N}")
        for name in ("gamma", "p"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def const(self) -> DerivedConstants:
        return derived_constants(self.a, self.params)

    @property
    def Omega(self) -> float:
        """Rotation rate of the underlying plane wave, ``2 (a^2 - omega^2)``."""
        return 2.0 * (self.a ** 2 - self.params.omega ** 2)

    def theta(self, t):
        return (self.a ** 2 - self.params.omega ** 2) * np.asarray(t) - self.gamma / 2.0

    def plane_wave(self, t) -> np.ndarray:
        """``q_c(t)``, broadcast over ``t``."""
        return self.a * np.exp(-1j * (self.Omega * np.asarray(t, dtype=float) - self.gamma))


# -- closed form ---------------------------------------------------------------

def _sites(params):
    return np.arange(params.N)


def _sech(x):
    # overflow-free for large |x|
    e = np.exp(-np.abs(x))
    return 2.0 * e / (1.0 + e * e)


def _gamma_scalar(c: DerivedConstants, x):
    return 1.0 - np.cos(2 * c.phi) - 1j * np.sin(2 * c.phi) * np.tanh(x)


def _lambda_n(c: DerivedConstants, x, n, branch):
    return 1.0 + branch * np.cos(c.phi) / np.cos(c.beta) * _sech(x) * np.cos(2 * n * c.beta)


def homoclinic_orbit(hp: HomoclinicParams, t) -> np.ndarray:
    """Closed-form homoclinic orbit; shape ``(N,)`` for scalar ``t``, ``(len(t), N)`` otherwise."""
    c = hp.const
    tt = np.asarray(t, dtype=float)
    x = (2 * c.mu * tt + 2 * hp.p)[..., None]
    n = _sites(hp.params)
    lam = _lambda_n(c, x, n, hp.branch)
    if np.any(np.abs(lam) < 1e-14):
        raise ZeroDivisionError("Lambda_n vanished")
    qc = hp.plane_wave(tt)[..., None]
    return qc * (_gamma_scalar(c, x) / lam - 1.0)


def homoclinic_parts(hp: HomoclinicParams, t) -> tuple[np.ndarray, np.ndarray]:
    """Split the orbit as ``uniform + fluct`` with ``uniform`` independent of n.

    ``fluct = -q_c Gamma e_n / Lambda_n`` with ``Lambda_n = 1 + e_n`` keeps full
    relative precision as the orbit approaches the plane wave, so spatial
    differences of it do not cancel catastrophically.
    """
    c = hp.const
    tt = np.asarray(t, dtype=float)
    x = (2 * c.mu * tt + 2 * hp.p)[..., None]
    n = _sites(hp.params)
    e = hp.branch * np.cos(c.phi) / np.cos(c.beta) * _sech(x) * np.cos(2 * n * c.beta)
    qc = hp.plane_wave(tt)[..., None]
    G = _gamma_scalar(c, x)
    return qc * (G - 1.0), -qc * G * e / (1.0 + e)


def homoclinic_time_derivative(hp: HomoclinicParams, t) -> np.ndarray:
    """Analytic d/dt of :func:`homoclinic_orbit`."""
    c = hp.const
    tt = np.asarray(t, dtype=float)
    x = (2 * c.mu * tt + 2 * hp.p)[..., None]
    n = _sites(hp.params)
    sech, tanh = _sech(x), np.tanh(x)
    dx = 2 * c.mu
    G = _gamma_scalar(c, x)
    dG = -1j * np.sin(2 * c.phi) * sech ** 2 * dx
    lam = _lambda_n(c, x, n, hp.branch)
    dlam = -hp.branch * np.cos(c.phi) / np.cos(c.beta) * sech * tanh * np.cos(2 * n * c.beta) * dx
    qc = hp.plane_wave(tt)[..., None]
    dqc = -1j * hp.Omega * qc
    return dqc * (G / lam - 1.0) + qc * (dG * lam - G * dlam) / lam ** 2


def homoclinic_residual(hp: HomoclinicParams, t) -> float:
    """``max |dQ/dt - rhs(Q)|`` over the given times."""
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    Q = homoclinic_orbit(hp, ts)
    dQ = homoclinic_time_derivative(hp, ts)
    return float(max(np.max(np.abs(dQ[k] - lat.rhs_unperturbed(Q[k], hp.params))) for k in range(ts.size)))


def asymptotic_states(hp: HomoclinicParams, t) -> tuple[np.ndarray, np.ndarray]:
    """``q_c(t) e^{i(pi + 2 phi)}`` and ``q_c(t) e^{i(pi - 2 phi)}``: the limits as ``t -> +inf`` and ``-inf``."""
    c = hp.const
    qc = hp.plane_wave(t)
    return qc * np.exp(1j * (np.pi + 2 * c.phi)), qc * np.exp(1j * (np.pi - 2 * c.phi))


def homoclinic_melnikov_vector(hp: HomoclinicParams, t) -> GradientField:
    """Closed-form gradient of F_1 along the homoclinic orbit, broadcast over ``t`` like :func:`homoclinic_orbit`."""
    c = hp.const
    tt = np.asarray(t, dtype=float)
    x = (2 * c.mu * tt + 2 * hp.p)[..., None]
    n = _sites(hp.params)
    sech, tanh = _sech(x), np.tanh(x)
    sg = hp.branch
    cb, cp, sp = np.cos(c.beta), np.cos(c.phi), np.sin(c.phi)
    Kn = (cb + sg * cp * sech * np.cos(2 * (n - 1) * c.beta)) * (cb + sg * cp * sech * np.cos(2 * (n + 1) * c.beta))
    if np.any(np.abs(Kn) < 1e-14):
        raise ZeroDivisionError("K_n vanished")
    th = hp.theta(tt)[..., None]
    X1 = (cb * sech + sg * (cp - 1j * sp * tanh) * np.cos(2 * n * c.beta)) * np.exp(2j * th)
    X2 = (cb * sech + sg * (cp + 1j * sp * tanh) * np.cos(2 * n * c.beta)) * np.exp(-2j * th)
    pref = c.K / Kn * sech
    return GradientField(pref * X1, pref * X2)


def bloch_gradient_on_orbit(hp: HomoclinicParams, t) -> GradientField:
    """Bloch-formula gradient of F_1 at the orbit point, projected onto even states."""
    Q = homoclinic_orbit(hp, float(t))
    return iso.melnikov_gradient(Q, hp.params, hp.const.z_hat).symmetrized()


# -- Darboux transformation --------------------------------------------------------

@dataclass(frozen=True)
class DarbouxData:
    z_d: complex
    phi: np.ndarray    # (N + 1, 2)
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    delta: np.ndarray

    def gamma_matrix(self, n: int, z: complex) -> np.ndarray:
        return np.array([[z + self.a[n] / z, self.b[n]], [self.c[n], -1.0 / z + z * self.d[n]]], dtype=complex)


def darboux_data(phi: np.ndarray, z_d: complex) -> DarbouxData:
    phi = np.asarray(phi, dtype=complex)
    z_d = complex(z_d)
    if abs(abs(z_d) - 1.0) < 1e-12:
        raise ValueError("|z_d| must differ from 1")
    p1, p2 = phi[:, 0], phi[:, 1]
    m1, m2 = np.abs(p1) ** 2, np.abs(p2) ** 2
    zb, az2 = np.conj(z_d), abs(z_d) ** 2
    delta = -(m1 + az2 * m2) / zb
    if np.any(np.abs(delta) < 1e-300):
        raise SingularDressing("Delta_n vanished")
    A = m2 + az2 * m1
    a = z_d / (zb ** 2 * delta) * A
    d = -A / (z_d * delta)
    b = (az2 ** 2 - 1) / (zb ** 2 * delta) * p1 * np.conj(p2)
    c = (az2 ** 2 - 1) / (az2 * delta) * np.conj(p1) * p2
    return DarbouxData(z_d, phi, a, b, c, d, delta)


def lax_solution(q: np.ndarray, z: complex, params: LatticeParams, psi0) -> np.ndarray:
    """Solution of ``psi_{n+1} = L_n psi_n`` for n = 0..N."""
    out = np.empty((params.N + 1, 2), dtype=complex)
    out[0] = psi0
    for n in range(params.N):
        out[n + 1] = iso.transfer_matrix(z, q[n], params) @ out[n]
    return out


def periodic_eigenfunctions(q: np.ndarray, z_d: complex, params: LatticeParams, tol: float = 1e-8):
    """Two independent solutions with ``phi_{n+N} = +-D phi_n``.

    On the uniform plane the monodromy at the critical point is a multiple of
    the identity, so the eigenvectors of the (site-independent) transfer
    matrix are used; they diagonalize the monodromy too.
    """
    D = lat.invariant_D(q, params)
    M = iso.monodromy(z_d, q, params)
    w = np.linalg.eigvals(M)
    if not all(min(abs(m - D), abs(m + D)) <= tol * D for m in w):
        raise ValueError(f"monodromy eigenvalues {w} at z_d={z_d} are not +-D (D={D})")
    if np.allclose(q, q[0], rtol=0, atol=1e-14):
        _, V = np.linalg.eig(iso.transfer_matrix(z_d, q[0], params))
    else:
        _, V = np.linalg.eig(M)
    return lax_solution(q, z_d, params, V[:, 0]), lax_solution(q, z_d, params, V[:, 1])


def darboux_transform(q: np.ndarray, phi_pm, z_d: complex, c_plus: complex, c_minus: complex,
                      params: LatticeParams, psi: np.ndarray | None = None, z: complex | None = None):
    """Dress ``q`` with ``phi = c_plus phi_plus + c_minus phi_minus``.

    Returns ``(Q, Psi)`` where ``Psi_n = Gamma_n psi_n`` for a Lax solution
    ``psi`` at spectral parameter ``z`` (``Psi`` is ``None`` when no ``psi``
    is given).
    """
    phi_plus, phi_minus = phi_pm
    dd = darboux_data(c_plus * np.asarray(phi_plus) + c_minus * np.asarray(phi_minus), z_d)
    N = params.N
    Q = (1j / params.h) * dd.b[1:N + 1] - dd.a[1:N + 1] * np.asarray(q)
    Psi = None
    if psi is not None:
        if z is None:
            raise ValueError("psi needs its spectral parameter z")
        Psi = np.array([dd.gamma_matrix(n, z) @ psi[n] for n in range(N + 1)])
    return Q, Psi


# -- time-dependent dressing of the plane wave ----------------------------------------

@dataclass(frozen=True)
class PlaneWaveFrame:
    """Lax eigenfunctions of the rotating plane wave at ``z_hat``.

    In the co-rotating gauge both Lax matrices are constant; the transfer
    matrix has eigenvalues ``sqrt(rho) e^{+-i beta}`` with eigenvectors
    ``(i, -e^{-+i phi})`` and the temporal matrix acts on them with rates
    ``kappa``.
    """

    hp: HomoclinicParams
    w: np.ndarray       # spatial multipliers
    V: np.ndarray       # columns are eigenvectors
    kappa: np.ndarray   # temporal rates

    @classmethod
    def build(cls, hp: HomoclinicParams) -> "PlaneWaveFrame":
        c = hp.const
        P = hp.params
        sr = np.sqrt(c.rho)
        w = sr * np.exp(np.array([1j, -1j]) * c.beta)
        V = np.array([[1j, 1j], [-np.exp(-1j * c.phi), -np.exp(1j * c.phi)]])
        C = iso.lax_B(c.z_hat, hp.a, hp.a, P) + 0.5j * hp.Omega * np.diag([1.0, -1.0])
        kappa = np.array([(C @ V[:, k])[0] / V[0, k] for k in range(2)])
        return cls(hp, w, V, kappa)

    def eigenfunctions(self, t: float):
        """``(phi_plus, phi_minus, dphi_plus/dt, dphi_minus/dt)``, each of shape (N + 1, 2)."""
        hp = self.hp
        psi = hp.gamma - hp.Omega * t
        S = np.array([np.exp(0.5j * psi), np.exp(-0.5j * psi)])
        dS = -0.5j * hp.Omega * np.array([1.0, -1.0]) * S
        n = np.arange(hp.params.N + 1)[:, None]
        out = []
        for k in range(2):
            chi = np.exp(self.kappa[k] * t) * self.w[k] ** n * self.V[:, k]
            out.append((S * chi, dS * chi + self.kappa[k] * S * chi))
        return out[0][0], out[1][0], out[0][1], out[1][1]


def dressed_plane_wave(hp: HomoclinicParams, c_plus: complex, c_minus: complex, t: float,
                       frame: PlaneWaveFrame | None = None):
    """Darboux image of the rotating plane wave and its analytic time derivative."""
    frame = frame or PlaneWaveFrame.build(hp)
    P = hp.params
    N, h = P.N, P.h
    pp, pm, dpp, dpm = frame.eigenfunctions(t)
    phi = c_plus * pp + c_minus * pm
    dphi = c_plus * dpp + c_minus * dpm
    zd = hp.const.z_hat
    dd = darboux_data(phi, zd)
    q = np.full(N, hp.plane_wave(t))
    dq = -1j * hp.Omega * q
    p1, p2 = phi[:, 0], phi[:, 1]
    dm1 = 2 * np.real(np.conj(p1) * dphi[:, 0])
    dm2 = 2 * np.real(np.conj(p2) * dphi[:, 1])
    az2 = zd * zd
    A = np.abs(p2) ** 2 + az2 * np.abs(p1) ** 2
    dA = dm2 + az2 * dm1
    ddelta = -(dm1 + az2 * dm2) / zd
    da = zd / zd ** 2 * (dA * dd.delta - A * ddelta) / dd.delta ** 2
    prod = p1 * np.conj(p2)
    dprod = dphi[:, 0] * np.conj(p2) + p1 * np.conj(dphi[:, 1])
    db = (az2 ** 2 - 1) / zd ** 2 * (dprod * dd.delta - prod * ddelta) / dd.delta ** 2
    Q = (1j / h) * dd.b[1:] - dd.a[1:] * q
    dQ = (1j / h) * db[1:] - da[1:] * q - dd.a[1:] * dq
    return Q, dQ


def closed_form_coefficients(hp: HomoclinicParams) -> tuple[complex, complex]:
    """``(c_plus, c_minus)`` whose dressing reproduces :func:`homoclinic_orbit` for ``hp``.

    With the eigenvector normalization of :class:`PlaneWaveFrame` the ratio
    is ``branch * exp(i (beta - phi) - 2 p)``, independent of ``gamma`` and
    ``omega`` (confirmed against :func:`fit_darboux_ratio` in the tests).
    """
    c = hp.const
    return 1.0 + 0j, complex(hp.branch * np.exp(1j * (c.beta - c.phi) - 2.0 * hp.p))


def fit_darboux_ratio(hp: HomoclinicParams) -> complex:
    """Least-squares fit of ``c_minus / c_plus`` to the closed-form orbit at ``t = 0``."""
    target = homoclinic_orbit(hp, 0.0)
    frame = PlaneWaveFrame.build(hp)

    def resid(x):
        Q, _ = dressed_plane_wave(hp, 1.0, np.exp(x[0] + 1j * x[1]), 0.0, frame)
        d = Q - target
        return np.concatenate([d.real, d.imag])

    best = None
    for lr in (-2.0 * hp.p - 1.0, -2.0 * hp.p, -2.0 * hp.p + 1.0):
        for ph in np.linspace(0, 2 * np.pi, 8, endpoint=False):
            r = least_squares(resid, [lr, ph], xtol=1e-15, ftol=1e-15, gtol=1e-15)
            if best is None or r.cost < best.cost:
                best = r
    if best.cost > 1e-18 * max(1.0, hp.a) ** 2:
        raise RuntimeError(f"no dressing coefficient reproduces the closed form (cost {best.cost:.3e})")
    return complex(np.exp(best.x[0] + 1j * best.x[1]))


def fit_homoclinic_params(Q0: np.ndarray, a: float, gamma: float, params: LatticeParams,
                          p_range: tuple[float, float] = (-15.0, 15.0)) -> HomoclinicParams:
    """Fit ``(p, branch)`` so the closed form at ``t = 0`` matches ``Q0`` (a dressing output)."""
    best = None
    for branch in (1, -1):
        def err(p):
            return float(np.sum(np.abs(homoclinic_orbit(HomoclinicParams(a, gamma, p, branch, params), 0.0) - Q0) ** 2))

        grid = np.linspace(*p_range, 601)
        vals = [err(p) for p in grid]
        k = int(np.argmin(vals))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        r = minimize_scalar(err, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})

        def resid(x):
            d = homoclinic_orbit(HomoclinicParams(a, gamma, x[0], branch, params), 0.0) - Q0
            return np.concatenate([d.real, d.imag])

        ls = least_squares(resid, [r.x], xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if best is None or ls.cost < best[0]:
            best = (ls.cost, ls.x[0], branch)
    return HomoclinicParams(a, gamma, float(best[1]), best[2], params)
