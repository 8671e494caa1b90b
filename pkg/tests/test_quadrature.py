import numpy as np
import pytest

from dnls_arnold import quadrature as quad


def test_polynomial_and_oscillatory():
    r = quad.integrate(lambda x: np.array([x ** 5, np.cos(40 * x)]), 0.0, 2.0, tol=1e-13)
    assert r.value[0] == pytest.approx(64 / 6, rel=1e-14)
    assert r.value[1] == pytest.approx(np.sin(80) / 40, abs=1e-13)


def test_sech_integrals():
    mu = 3.7
    f = lambda t: np.array([1 / np.cosh(2 * mu * t), np.cos(t) / np.cosh(2 * mu * t) ** 2])  # noqa: E731
    r = quad.integrate_sech_decaying(f, mu, tol=1e-12)
    assert r.value[0] == pytest.approx(np.pi / (2 * mu), rel=1e-12)
    # int cos(t) sech^2(k t) dt = pi / (k^2 sinh(pi / (2k)))
    k = 2 * mu
    assert r.value[1] == pytest.approx(np.pi / (k * k * np.sinh(np.pi / (2 * k))), rel=1e-12)
    assert r.error < 1e-11


def test_window_and_errors():
    assert 1 / np.cosh(2 * 2.0 * quad.sech_window(2.0)) == pytest.approx(1e-14, rel=1e-6)
    with pytest.raises(ValueError):
        quad.integrate(np.sin, 1.0, 0.0)
    with pytest.raises(quad.QuadratureError):
        quad.integrate(lambda x: np.sign(x - 0.3141), 0.0, 1.0, tol=1e-14, max_panels=64)
