"""Geometric phase of curves of pure states and the hamiltonians that maximise it early on."""

from .brachistophase import (
    OptimalSolution,
    SearchResult,
    ThresholdUndefinedError,
    accel_objective,
    brachistophase_hamiltonian,
    max_accel_hamiltonian,
    normalize_hamiltonian,
    random_search,
    taylor_phase,
    tau0_threshold,
    transport_unitary,
)
from .core import (
    InvalidStateError,
    NotHermitianError,
    projector,
    random_hermitian,
    random_state,
    spectral_decompose,
)
from .curves import (
    Curve,
    GeodesicCurve,
    PolygonCurve,
    ProductCurve,
    SampledCurve,
    SchrodingerCurve,
    accel_norm_sq,
    covariant_jet,
    curvature,
    geodesic_between,
    moments,
)
from .geometry import chart, complex_structure, fs_metric, metric_G, riemann, symplectic_omega
from .majorana import constellation, falling_star_audit, state_from_constellation, trajectory
from .phase import (
    PhaseConvergenceError,
    bargmann_phase,
    geodesic_frame,
    geometric_phase,
    phase_derivatives_fd,
    phase_derivs_covariant,
    phase_derivs_vtilde,
    schrodinger_d3,
    vtilde_expansion,
)

__all__ = [name for name in dir() if not name.startswith("_")]
