import numpy as np
import pytest

from dnls_arnold import lattice as lat


def test_params_validation():
    with pytest.raises(ValueError):
        lat.LatticeParams(2)
    with pytest.raises(ValueError):
        lat.LatticeParams(4, -1.0)
    with pytest.raises(ValueError):
        lat.PerturbationSpec("weird")
    with pytest.raises(ValueError):
        lat.PerturbationSpec("none", 0.1)
    with pytest.raises(ValueError):
        lat.PerturbationSpec("resonant", -1e-3)


def test_lattice_state_projects_once(rng):
    q = rng.normal(size=5) + 1j * rng.normal(size=5)
    s = lat.lattice_state(q)
    assert lat.even_defect(s) == 0.0
    np.testing.assert_allclose(s, lat.reflect(s))
    with pytest.raises(ValueError):
        lat.lattice_state(q, lat.LatticeParams(4))
    with pytest.raises(ValueError):
        lat.lattice_state([1, np.nan, 1])


@pytest.mark.parametrize("name, grad", [
    ("H0", lat.h0_gradient), ("I", lat.I_gradient)])
def test_gradients_match_finite_differences(rng, name, grad):
    P = lat.LatticeParams(5, 1.3)
    q = lat.random_even_state(P, rng, 1.5) + 0.2 * (rng.normal(size=5) + 1j * rng.normal(size=5))
    f = {"H0": lat.hamiltonian_h0, "I": lat.invariant_I}[name]
    fd = lat.wirtinger_fd(lambda x: f(x, P), q, 1e-5)
    g = grad(q, P)
    assert (g - fd).norm() <= 1e-7 * max(1.0, fd.norm())


@pytest.mark.parametrize("mode", ["nonresonant", "resonant"])
def test_perturbation_gradient_matches_finite_differences(rng, mode):
    P = lat.LatticeParams(4, 0.7)
    pert = lat.PerturbationSpec(mode, 1e-2, 1.7)
    q = rng.normal(size=4) + 1j * rng.normal(size=4)
    t = 0.83
    fd = lat.wirtinger_fd(lambda x: lat.perturbation_value(x, t, P, pert), q, 1e-5)
    g = lat.perturbation_gradient(q, t, P, pert)
    assert (g - fd).norm() <= 1e-7 * max(1.0, fd.norm())


def test_rhs_is_hamiltonian_flow(rng):
    # dq/dt = -i rho dH0/dconj(q)
    P = lat.LatticeParams(6, 0.9)
    q = rng.normal(size=6) + 1j * rng.normal(size=6)
    g = lat.h0_gradient(q, P)
    np.testing.assert_allclose(lat.rhs_unperturbed(q, P), -1j * lat.rho(q, P) * g.d_dqbar, rtol=1e-12, atol=1e-10)


def test_bracket_sign_convention(rng):
    # dF/dt = -i {F, H} along the flow, for F = I and H = H0 + eps H1
    P = lat.LatticeParams(4)
    pert = lat.PerturbationSpec("nonresonant", 0.1, 2.0)
    q = rng.normal(size=4) + 1j * rng.normal(size=4)
    t = 0.4
    qdot = lat.rhs_perturbed(q, t, P, pert)
    gI = lat.I_gradient(q, P)
    direct = np.sum(gI.d_dq * qdot + gI.d_dqbar * np.conj(qdot))
    gH = lat.h0_gradient(q, P)
    g1 = lat.perturbation_gradient(q, t, P, pert)
    total = lat.GradientField(gH.d_dq + pert.epsilon * g1.d_dq, gH.d_dqbar + pert.epsilon * g1.d_dqbar)
    assert abs(direct - (-1j) * lat.poisson_bracket(gI, total, q, P)) <= 1e-10 * max(1.0, abs(direct))
    # I Poisson-commutes with H0
    assert abs(lat.poisson_bracket(gI, gH, q, P)) <= 1e-10 * np.abs(gH.d_dq).sum()


def test_plane_levels():
    P = lat.LatticeParams(3, 2.0)
    q = lat.plane_wave(P, 6.0, 0.4)
    assert lat.invariant_I(q, P) == pytest.approx(lat.level_I(6.0, P), rel=1e-14)
    assert lat.hamiltonian_h0(q, P) == pytest.approx(lat.level_H0(6.0, P), rel=1e-13)


def test_gradient_field_helpers():
    g = lat.GradientField(np.array([1, 2, 3j]), np.array([0, 1, 1]))
    s = g.symmetrized()
    np.testing.assert_allclose(s.d_dq, lat.reflect(s.d_dq))
    np.testing.assert_allclose(s.d_dqbar, lat.reflect(s.d_dqbar))
    assert g.scaled(2).norm() == pytest.approx(2 * g.norm())
    assert (g - g).norm() == 0
