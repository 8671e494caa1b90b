"""Integrable structure of the discrete nonlinear Schroedinger lattice and the
Melnikov-Arnold machinery built on it."""

__version__ = "0.1.0"

from .lattice import LatticeParams, PerturbationSpec, GradientField  # noqa: E402
from .darboux import HomoclinicParams, homoclinic_orbit  # noqa: E402
from .integrator import evolve, drift_monitor  # noqa: E402
from .isospectral import discriminant, find_critical_points, melnikov_gradient  # noqa: E402
from .melnikov import compute_M, solve_intersection, sweep_curves  # noqa: E402
from .chain import build_chain  # noqa: E402

__all__ = [
    "LatticeParams", "PerturbationSpec", "GradientField", "HomoclinicParams", "homoclinic_orbit",
    "evolve", "drift_monitor", "discriminant", "find_critical_points", "melnikov_gradient",
    "compute_M", "solve_intersection", "sweep_curves", "build_chain",
]
