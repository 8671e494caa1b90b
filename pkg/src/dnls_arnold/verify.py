"""Quick invariant battery behind the ``verify`` subcommand.

Each check is cheap (the whole battery runs in a few seconds) and compares a
computed quantity against an independent oracle or an exact value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import darboux as dx
from . import integrator as integ
from . import isospectral as iso
from . import lattice as lat
from . import melnikov as mel


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.threshold)


def _rel(a: lat.GradientField, b: lat.GradientField) -> float:
    return (a - b).norm() / max(b.norm(), 1e-300)


def _first_critical(q, P):
    # critical point closest to the unit circle away from the real axis
    pts = iso.find_critical_points(q, P)
    return min(pts, key=lambda s: (abs(abs(s.z) - 1.0), -abs(s.z.imag))).z


def run_battery(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    out = []

    P3 = lat.LatticeParams(3)
    z = np.exp(0.4j) * 1.3
    out.append(Check("discriminant of zero state", abs(iso.discriminant(z, np.zeros(3, complex), P3) - (z ** 3 + z ** -3)), 1e-12))

    a = 6.0
    qpw = lat.plane_wave(P3, a, 0.3)
    hp = dx.HomoclinicParams(a, 0.3, 0.0, 1, P3)
    zh = hp.const.z_hat
    out.append(Check("plane-wave F1 + 2", abs(iso.discriminant(zh, qpw, P3) + 2.0), 1e-10))
    out.append(Check("plane-wave gradient of F1", iso.melnikov_gradient(qpw, P3, zh).norm(), 1e-9))

    P4 = lat.LatticeParams(4)
    q = lat.random_even_state(P4, rng, 2.0)
    zc = _first_critical(q, P4)
    out.append(Check("Bloch gradient vs finite differences", _rel(iso.melnikov_gradient(q, P4, zc),
                                                                  iso.gradient_fd_oracle(q, P4, zc)), 1e-5))
    out.append(Check("Lax residual, random state", iso.lax_residual(q, 0.8 + 0.5j, P4), 1e-7))

    ts = np.linspace(-3, 3, 13) / hp.const.mu
    out.append(Check("homoclinic orbit DNLS residual", dx.homoclinic_residual(hp, ts), 1e-7))
    t_far = 20.0 / hp.const.mu
    plus, _ = dx.asymptotic_states(hp, t_far)
    out.append(Check("homoclinic asymptotics at +40", float(np.max(np.abs(dx.homoclinic_orbit(hp, t_far) - plus))), 1e-12))

    cp, cm = dx.closed_form_coefficients(hp)
    frame = dx.PlaneWaveFrame.build(hp)
    worst = max(float(np.max(np.abs(dx.dressed_plane_wave(hp, cp, cm, t, frame)[0] - dx.homoclinic_orbit(hp, t))))
                for t in ts[::3])
    out.append(Check("Darboux dressing vs closed form", worst, 1e-8))

    t1 = 0.4 / hp.const.mu
    closed = dx.homoclinic_melnikov_vector(hp, t1).scaled(dx.CLOSED_FORM_GRADIENT_SCALE)
    out.append(Check("closed-form Melnikov vector vs Bloch", _rel(closed, dx.bloch_gradient_on_orbit(hp, t1)), 1e-6))

    q5 = lat.random_even_state(lat.LatticeParams(5), rng, 1.5)
    traj = integ.evolve(q5, 0.0, 1.0, lat.LatticeParams(5), samples=11)
    drift = integ.drift_monitor(traj, "Delta", [0.7 + 0.2j, np.exp(1.1j), 1.8])
    out.append(Check("isospectral drift over t in [0, 1]", drift.max_abs_drift, 1e-8))

    res = mel.compute_M("nonresonant", a, P3)
    out.append(Check("Melnikov amplitude/phase reconstruction", res.reconstruction_error(), 1e-12))
    relF, relL = mel.bracket_kernel_check("nonresonant", a, P3, np.linspace(-0.3, 0.3, 5))
    out.append(Check("bracket kernels, nonresonant", max(relF, relL), 1e-8))
    relF, relL = mel.bracket_kernel_check("resonant", 12.0, lat.LatticeParams(3, 10.0), np.linspace(-0.05, 0.05, 5))
    out.append(Check("bracket kernels, resonant", max(relF, relL), 1e-8))

    alpha = 10 * mel.alpha_threshold(res)
    I1 = lat.level_I(a, P3)
    sol = mel.solve_intersection("nonresonant", I1, I1 + 0.5e-3 * res.amp56, 1e-3, alpha, res)
    out.append(Check("intersection residual", max(abs(r) for r in sol.residuals), 1e-10))
    out.append(Check("intersection transversality (1/|det|)", 1.0 / abs(sol.jacobian_det), 1e12))
    return out
