import dataclasses

import numpy as np
import pytest

from dnls_arnold import darboux as dx
from dnls_arnold import lattice as lat
from dnls_arnold import melnikov as mel

P0 = lat.LatticeParams(3)
P10 = lat.LatticeParams(3, 10.0)


def test_hatted_orbit_gamma_independent():
    hp = dx.HomoclinicParams(6.0, 0.8, 0.6, 1, P0)
    tau = np.linspace(-0.2, 0.2, 9)
    q, V = mel.hatted_orbit(hp, tau)
    q0, V0 = mel.hatted_orbit(dx.HomoclinicParams(6.0, 0.0, 0.0, 1, P0), tau)
    np.testing.assert_allclose(q, q0, atol=1e-10)
    np.testing.assert_allclose(V, V0, rtol=1e-9, atol=1e-9 * np.abs(V0).max())


@pytest.mark.parametrize("params, a", [(P0, 6.0), (P10, 11.0)])
def test_F1_and_I_commute_with_H0_on_orbit(params, a):
    hp = dx.HomoclinicParams(a, 0.3, 0.0, 1, params)
    for t in np.linspace(-2, 2, 5) / hp.const.mu:
        q = dx.homoclinic_orbit(hp, t)
        V = dx.homoclinic_melnikov_vector(hp, t)
        gH = lat.h0_gradient(q, params)
        scale = np.sum(lat.rho(q, params) * np.abs(V.d_dq) * np.abs(gH.d_dqbar))
        assert abs(lat.poisson_bracket(V, gH, q, params)) <= 1e-10 * scale
        gI = lat.I_gradient(q, params)
        scale = np.sum(lat.rho(q, params) * np.abs(gI.d_dq) * np.abs(gH.d_dqbar))
        assert abs(lat.poisson_bracket(gI, gH, q, params)) <= 1e-10 * scale


@pytest.mark.parametrize("mode, params, a", [("nonresonant", P0, 6.0), ("resonant", P10, 9.0)])
def test_bracket_kernels(mode, params, a):
    mu = dx.derived_constants(a, params).mu
    relF, relL = mel.bracket_kernel_check(mode, a, params, np.linspace(-3, 3, 13) / mu)
    assert relF <= 1e-8 and relL <= 1e-8


@pytest.mark.parametrize("mode, params, a", [("nonresonant", P0, 7.0), ("resonant", P10, 10.5)])
def test_window_and_tolerance_stability(mode, params, a):
    base = mel.compute_M(mode, a, params)
    doubled = mel.compute_M(mode, a, params, T=2 * base.T)
    fine = mel.compute_M(mode, a, params, tol=1e-13)
    assert np.max(np.abs(np.subtract(base.M, doubled.M))) <= 1e-9
    assert np.max(np.abs(np.subtract(base.M, fine.M))) <= 1e-9
    assert base.reconstruction_error() <= 1e-12
    assert base.error <= 1e-9


def _brute_integrals(mode, a, params, gamma_hat, t0, alpha):
    """Bracket integrals in physical time along the orbit with the given (gamma_hat, t0)."""
    from scipy.integrate import quad

    c = dx.derived_constants(a, params)
    hp = dx.HomoclinicParams(a, gamma_hat - 2 * (a * a - params.omega ** 2) * t0, c.mu * t0, 1, params)
    pert = lat.PerturbationSpec(mode, 1.0, alpha)
    if mode == "nonresonant":
        level_grad, level_pert = lat.I_gradient, pert
    else:
        level_grad, level_pert = lat.h0_gradient, lat.PerturbationSpec("resonant", 1.0, 0.0)

    def fF(t):
        q = dx.homoclinic_orbit(hp, t)
        V = dx.homoclinic_melnikov_vector(hp, t)
        return (-1j * lat.poisson_bracket(V, lat.perturbation_gradient(q, t, params, pert), q, params)).real

    def fL(t):
        q = dx.homoclinic_orbit(hp, t)
        g = lat.perturbation_gradient(q, t, params, level_pert)
        return (-1j * lat.poisson_bracket(level_grad(q, params), g, q, params)).real

    T = 20 / c.mu
    kw = dict(limit=400, epsabs=1e-12, epsrel=1e-12)
    return quad(fF, -T - t0, T - t0, **kw)[0], quad(fL, -T - t0, T - t0, **kw)[0]


@pytest.mark.parametrize("mode, params, a", [("nonresonant", P0, 6.5), ("resonant", P10, 10.4)])
def test_equations_match_brute_force_bracket_integrals(mode, params, a):
    # F_1 integral = 2 e1 and level integral = 2 amp56 sin(...) (eps = 1, equal levels)
    res = mel.compute_M(mode, a, params)
    for gamma_hat, t0, alpha in ((0.3, 0.2, 1.7), (1.1, -0.6, 0.4), (2.5, 0.9, 3.0)):
        bF, bL = _brute_integrals(mode, a, params, gamma_hat, t0, alpha)
        e1, e2 = mel.equations(mode, 0.0, 0.0, 1.0, alpha, res, gamma_hat, t0)
        assert bF == pytest.approx(2 * e1, rel=1e-8, abs=1e-9)
        assert bL == pytest.approx(-e2, rel=1e-8, abs=1e-9)


def test_mode_preconditions():
    with pytest.raises(ValueError):
        mel.compute_M_nonresonant(6.0, P10)
    with pytest.raises(ValueError):
        mel.compute_M_resonant(6.0, lat.LatticeParams(3, 2.0))
    with pytest.raises(ValueError):
        mel.compute_M("sideways", 6.0, P0)
    with pytest.raises(ValueError):
        mel.compute_M("nonresonant", 5.0, P0)


def _res(mode="nonresonant", a=6.0):
    return mel.compute_M(mode, a, P0 if mode == "nonresonant" else P10)


@pytest.mark.parametrize("mode", mel.MODES)
def test_solve_intersection(mode):
    res = _res(mode, 6.0 if mode == "nonresonant" else 10.2)
    alpha = 3.0 * mel.alpha_threshold(res)
    eps = 1e-3
    a1 = 1.0
    for frac in (-0.9, -0.3, 0.0, 0.5, 0.95):
        a2 = a1 + frac * 2 * eps * res.amp56
        sol = mel.solve_intersection(mode, a1, a2, eps, alpha, res)
        assert max(map(abs, sol.residuals)) <= 1e-10
        assert abs(sol.jacobian_det) > 0
        assert all(abs(t0) >= abs(sol.t0) for _, t0 in sol.alternatives)
        for g, t0 in sol.alternatives:
            assert max(map(abs, mel.equations(mode, a1, a2, eps, alpha, res, g, t0))) <= 1e-10


@pytest.mark.parametrize("mode", mel.MODES)
def test_jacobian_matches_finite_differences(mode):
    res = _res(mode, 6.0 if mode == "nonresonant" else 10.2)
    g, t0, e = 0.7, -0.4, 1e-6
    args = (mode, 1.0, 1.0001, 1e-3, 2.0, res)
    J = np.empty((2, 2))
    for j, (dg, dt) in enumerate(((e, 0.0), (0.0, e))):
        hi = mel.equations(*args, g + dg, t0 + dt)
        lo = mel.equations(*args, g - dg, t0 - dt)
        J[:, j] = (np.array(hi) - np.array(lo)) / (2 * e)
    assert mel.jacobian_det(mode, 1e-3, 2.0, res, g, t0) == pytest.approx(np.linalg.det(J), rel=1e-6)


def test_solvability_reasons():
    res = _res()
    eps, a0 = 1e-3, mel.alpha_threshold(res)
    gap = 2 * eps * res.amp56
    with pytest.raises(mel.SolvabilityError) as e:
        mel.solve_intersection("nonresonant", 0.0, gap, eps, 2 * a0, res)
    assert e.value.reason == "gap" and e.value.required == pytest.approx(gap)
    with pytest.raises(mel.SolvabilityError) as e:
        mel.solve_intersection("nonresonant", 0.0, 0.1 * gap, eps, 0.5 * a0, res)
    assert e.value.reason == "alpha"
    dead = dataclasses.replace(res, amp56=0.0)
    with pytest.raises(mel.SolvabilityError) as e:
        mel.solve_intersection("nonresonant", 0.0, 0.0, eps, 2 * a0, dead)
    assert e.value.reason == "amp56"
    with pytest.raises(ValueError):
        mel.solve_intersection("resonant", 0.0, 0.0, eps, 2 * a0, res)


def test_sweep_threads_match_serial(monkeypatch):
    grid = np.linspace(5.5, 9.0, 6)
    serial = mel.sweep_curves("nonresonant", grid, P0, workers=1)
    monkeypatch.setenv(mel.THREADS_ENV, "3")
    threaded = mel.sweep_curves("nonresonant", grid, P0)
    assert [r.M for r in serial.results] == [r.M for r in threaded.results]
    assert serial.flags == [] and np.all(serial.amplitudes() > 0)


def test_result_row_layout():
    res = _res()
    row = res.row()
    assert len(row) == len(mel.CSV_COLUMNS) == 13
    assert row[0] == res.a and row[7:10] == [res.amp12, res.amp34, res.amp56]
    assert res.to_dict()["M"] == list(res.M)
