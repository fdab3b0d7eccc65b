"""Quantum-trajectory simulator for a monitored free-fermion chain.

Single-particle long-range hopping plus two-site generalized measurements
with a unitary feedback phase.  Pure Gaussian (Slater determinant)
trajectories, an exact-diagonalization cross-check for small chains, and
ensemble statistics with finite-size-scaling analysis.
"""

from .lattice import (
    LatticeParams,
    OBC,
    PBC,
    build_h0,
    build_h_eff,
    mode_velocity,
    quasimode_weight,
    spectrum,
)
from .state import (
    JumpOperator,
    ObservableSet,
    SlaterState,
    apply_jump,
    apply_propagator,
    classical_entropy,
    density_imbalance,
    entanglement_entropy,
    jump_expectation,
    particle_current,
)
from .trajectory import JumpSchedule, TrajectoryConfig, TrajectoryRecord, run_trajectory
from .ensemble import EnsembleConfig, EnsembleRecord, collapse_scan, run_ensemble, scaling_exponent_fit

__all__ = [
    "LatticeParams",
    "OBC",
    "PBC",
    "build_h0",
    "build_h_eff",
    "spectrum",
    "mode_velocity",
    "quasimode_weight",
    "SlaterState",
    "JumpOperator",
    "ObservableSet",
    "apply_propagator",
    "apply_jump",
    "jump_expectation",
    "entanglement_entropy",
    "classical_entropy",
    "density_imbalance",
    "particle_current",
    "TrajectoryConfig",
    "TrajectoryRecord",
    "JumpSchedule",
    "run_trajectory",
    "EnsembleConfig",
    "EnsembleRecord",
    "run_ensemble",
    "collapse_scan",
    "scaling_exponent_fit",
]
