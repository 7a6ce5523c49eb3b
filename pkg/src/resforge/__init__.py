"""Resonance strings for the two-convex-obstacle billiard.

Submodules: :mod:`series` (graded formal power series), :mod:`geometry`
(obstacles, billiard map, germs, escape partitions), :mod:`birkhoff`
(interpolating Hamiltonian and classical normal form), :mod:`model`
(normal-form data, string coefficients, Newton oracle), :mod:`lattice`
(enumeration, clustering, separation) and :mod:`cli`.
"""

__version__ = "0.1.0"

from .series import FormalSeries, HamiltonianGerm, SymplecticMapGerm  # noqa: E402
from .birkhoff import NormalFormF0, classical_bnf, interpolating_hamiltonian  # noqa: E402
from .geometry import BoundaryCurve, ObstaclePair, PhasePoint, trapped_ray  # noqa: E402
from .model import LatticeWindow, NormalFormData, StringExpansion, newton_root, solve_string  # noqa: E402
from .lattice import ResonanceRecord, cluster, enumerate_strings, separation_report  # noqa: E402

__all__ = [
    "__version__", "FormalSeries", "HamiltonianGerm", "SymplecticMapGerm", "NormalFormF0",
    "classical_bnf", "interpolating_hamiltonian", "BoundaryCurve", "ObstaclePair", "PhasePoint",
    "trapped_ray", "LatticeWindow", "NormalFormData", "StringExpansion", "newton_root",
    "solve_string", "ResonanceRecord", "cluster", "enumerate_strings", "separation_report",
]
