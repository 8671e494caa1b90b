import numpy as np
import pytest

from dnls_arnold import darboux as dx
from dnls_arnold import integrator as integ
from dnls_arnold import isospectral as iso
from dnls_arnold import lattice as lat


def test_zero_state_discriminant():
    # transfer matrices are diag(z, 1/z), so the monodromy is diag(z^N, z^-N)
    for N in (3, 4, 7):
        P = lat.LatticeParams(N)
        z = np.array([0.5 + 0.3j, 1.7, np.exp(0.9j)])
        np.testing.assert_allclose(iso.discriminant(z, np.zeros(N, complex), P), z ** N + z ** (-N), rtol=1e-14)


def test_monodromy_determinant_and_symmetry(rng):
    P = lat.LatticeParams(5)
    q = lat.random_even_state(P, rng, 2.0)
    D = lat.invariant_D(q, P)
    z = 0.9 + 0.35j
    assert abs(np.linalg.det(iso.monodromy(z, q, P)) - D * D) <= 1e-12 * D * D
    assert iso.discriminant(1 / z, q, P) == pytest.approx(iso.discriminant(z, q, P), rel=1e-12)
    assert iso.discriminant(-z, q, P) == pytest.approx(-iso.discriminant(z, q, P), rel=1e-12)


def test_derivatives_match_finite_differences(rng):
    P = lat.LatticeParams(4)
    q = lat.random_even_state(P, rng, 1.5)
    z, e = 1.1 + 0.4j, 1e-6
    fd = (iso.discriminant(z + e, q, P) - iso.discriminant(z - e, q, P)) / (2 * e)
    assert iso.discriminant_derivative(z, q, P) == pytest.approx(fd, rel=1e-8)


def test_critical_points_plane_wave_classes():
    P = lat.LatticeParams(3)
    q = lat.plane_wave(P, 6.0)
    pts = iso.find_critical_points(q, P)
    assert all(p.is_critical for p in pts)
    assert len(iso.spectral_classes(pts)) == 2
    zh = dx.derived_constants(6.0, P).z_hat
    assert min(abs(p.z - zh) for p in pts) < 1e-9


def test_critical_points_found_random(rng):
    P = lat.LatticeParams(4)
    q = lat.random_even_state(P, rng, 1.0)
    pts = iso.find_critical_points(q, P)
    assert pts
    for p in pts:
        assert abs(iso.discriminant_derivative(p.z, q, P)) <= iso.CRITICAL_TOL


def test_refine_raises_when_lost():
    P = lat.LatticeParams(3)
    with pytest.raises(iso.CriticalPointLost):
        iso.refine_critical_point(1.0 + 0.5j, lat.plane_wave(P, 6.0), P, max_move=1e-6)


def test_bloch_solutions_multipliers_and_scale(rng):
    P = lat.LatticeParams(5)
    q = lat.random_even_state(P, rng, 1.5)
    z = 0.8 + 0.6j
    bp = iso.bloch_solutions(z, q, P)
    M = iso.monodromy(z, q, P)
    np.testing.assert_allclose(M @ bp.psi_plus[0], bp.multipliers[0] * bp.psi_plus[0], atol=1e-10)
    assert abs(bp.multipliers[0]) >= abs(bp.multipliers[1])
    # the gradient formula is invariant under rescaling of the Bloch solutions
    g1 = iso._bloch_gradient(bp, P)
    scaled = iso.BlochPair(bp.z, 3.0j * bp.psi_plus, -0.5 * bp.psi_minus, bp.zeta, bp.multipliers,
                           bp.wronskian * (-1.5j), bp.D)
    assert (iso._bloch_gradient(scaled, P) - g1).norm() <= 1e-12 * g1.norm()


def test_bloch_gradient_equals_fixed_z_derivative(rng):
    P = lat.LatticeParams(4)
    q = lat.random_even_state(P, rng, 1.5)
    z = 1.2 - 0.3j
    g = iso.melnikov_gradient(q, P, z)
    fd = lat.wirtinger_fd(lambda x: iso.discriminant(z, x, P), q, 1e-6)
    assert (g - fd).norm() <= 1e-7 * fd.norm()


def test_gradient_oracle_step_validation(rng):
    P = lat.LatticeParams(3)
    with pytest.raises(ValueError):
        iso.gradient_fd_oracle(np.ones(3, complex), P, 1.0, step=1e-2)


def test_lax_residual_and_compatibility(rng):
    P = lat.LatticeParams(4, 0.8)
    traj = integ.evolve(lat.random_even_state(P, rng, 1.2), 0.0, 0.5, P, samples=6)
    for z in (0.6 + 0.3j, np.exp(1j), 1.7):
        assert iso.lax_compatibility_check(traj, z) <= 1e-7
    with pytest.raises(ValueError):
        iso.lax_residual(np.ones(4, complex), 0.0, P)
