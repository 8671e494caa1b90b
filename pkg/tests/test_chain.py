import numpy as np
import pytest

from dnls_arnold import chain as ch
from dnls_arnold import lattice as lat
from dnls_arnold import melnikov as mel


def test_frequency_filter():
    assert not ch.frequency_check(1.0).passed          # 1/2
    assert not ch.frequency_check(np.sqrt(4.0)).passed  # 1/8
    fc = ch.frequency_check(6.01)
    assert fc.passed and fc.distance > ch.MIN_DISTANCE
    assert ch.frequency_check(3.0, 0.5).frequency == pytest.approx(1 / (2 * (9 - 0.25)))


def test_amplitude_from_I_roundtrip():
    P = lat.LatticeParams(4)
    for a in (2.0, 6.0, 11.0):
        assert ch.amplitude_from_I(lat.level_I(a, P), P) == pytest.approx(a, rel=1e-13)


def _alpha(mode, lo, hi, P):
    return 10 * max(mel.alpha_threshold(mel.compute_M(mode, a, P)) for a in np.linspace(lo, hi, 9))


def test_nonresonant_chain():
    P = lat.LatticeParams(3)
    alpha = _alpha("nonresonant", 6.0, 6.003, P)
    c = ch.build_chain("nonresonant", 6.0, 6.003, 1e-3, alpha, P)
    assert c.amplitudes[0] == 6.0 and c.amplitudes[-1] == 6.003
    assert np.all(np.diff(c.amplitudes) > 0)
    assert c.bridging == []
    assert all(f.passed for f in c.frequency_checks)
    for link in c.links:
        assert max(map(abs, link.residuals)) <= 1e-10 and abs(link.jacobian_det) > 0
    d = c.to_dict()
    assert len(d["levels"]) == len(c.amplitudes) and len(d["links"]) == len(c.links)


def test_resonant_chain_has_one_bridge():
    P = lat.LatticeParams(3, 10.0)
    alpha = _alpha("resonant", 9.95, 10.05, P)
    c = ch.build_chain("resonant", 9.95, 10.05, 1e-3, alpha, P)
    assert len(c.bridging) == 1
    a_b = c.amplitudes[c.bridging[0]]
    assert 10.0 < a_b < 10.0 + ch.separatrix_halfwidth(1e-3, alpha, P)
    for link in c.links:
        assert max(map(abs, link.residuals)) <= 1e-10 and abs(link.jacobian_det) > 0


def test_chain_rejections():
    P = lat.LatticeParams(3)
    with pytest.raises(ValueError):
        ch.build_chain("nonresonant", 6.1, 6.0, 1e-3, 1.0, P)
    with pytest.raises(ValueError):
        ch.build_chain("nonresonant", 5.0, 6.0, 1e-3, 1.0, P)
    with pytest.raises(ch.ChainError):
        # frequency 1/64 at the start
        ch.build_chain("nonresonant", np.sqrt(32.0), 6.0, 1e-3, 1.0, P)
    with pytest.raises(ch.ChainError) as e:
        ch.build_chain("nonresonant", 6.0, 6.001, 1e-3, 1e-9, P)
    assert "alpha" in str(e.value)
