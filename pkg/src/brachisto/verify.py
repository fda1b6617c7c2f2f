"""Cross-module invariant suite run by ``brachisto verify``.

Every check returns a measured residual and the tolerance it is held to, so
the report is useful even when everything passes. ``inject_fault`` swaps a
perturbed ingredient into one check; it exists to show that the checker can
fail.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .brachistophase import (
    accel_objective,
    brachistophase_hamiltonian,
    max_accel_hamiltonian,
    normalize_hamiltonian,
)
from .core import (
    commutator,
    projector,
    projector_superop,
    random_hermitian,
    random_state,
    spectral_decompose,
    unvec,
    vec,
)
from .curves import GeodesicCurve, SchrodingerCurve, accel_norm_sq_routes, covariant_jet
from .geometry import (
    _christoffel_zw,
    chart,
    embedding_jet,
    embedding_jet_fd,
    fs_metric,
    riemann,
    riemann_fd,
    tangent_project,
)
from .majorana import (
    constellation,
    rotation_matrix,
    sphere_angles,
    spin_from_dim,
    spin_operators,
    spin_rotation,
    state_from_constellation,
)
from .phase import (
    frame_phase_rate,
    geodesic_frame,
    geometric_phase,
    phase_derivatives_fd,
    phase_derivs_covariant,
    phase_derivs_vtilde,
    schrodinger_d3,
    vtilde_expansion,
)

FAULTS = ("christoffel",)


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual) and self.residual <= self.tol)

    def as_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


def _phase_equal(a, b) -> float:
    """Distance between two kets modulo global phase."""
    ov = np.vdot(a, b)
    return float(np.linalg.norm(a * (ov / abs(ov)) - b)) if abs(ov) > 0 else np.inf


def _perturbed_christoffel(z, w):
    # a w-dependent rescaling changes the antiholomorphic derivative
    return _christoffel_zw(z, w) * (1 + 1e-2 * np.sum(w))


def run_suite(dim: int = 3, seed: int = 0, inject_fault: str | None = None) -> list[CheckResult]:
    if dim < 2:
        raise ValueError("dimension must be at least 2")
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ValueError(f"unknown fault {inject_fault!r}; known: {', '.join(FAULTS)}")
    rng = np.random.default_rng([seed, dim])
    h = normalize_hamiltonian(random_hermitian(dim, rng))
    psi = random_state(dim, rng)
    rho = projector(psi)
    out: list[CheckResult] = []

    spec = spectral_decompose(h)
    out.append(CheckResult("core.spectral_reconstruct", _rel(spec.reconstruct(), h), 1e-12))
    x = random_hermitian(dim, rng)
    out.append(CheckResult(
        "core.projector_superop",
        _rel(unvec(projector_superop(rho) @ vec(x), dim), tangent_project(rho, x)), 1e-12,
    ))

    p = chart(psi if abs(psi[0]) > 0.2 else psi + 0.5 * np.eye(dim)[0])
    md = fs_metric(p)
    out.append(CheckResult("geometry.metric_inverse", _rel(md.g @ md.g_inv.T, np.eye(dim - 1)), 1e-12))
    christoffel = _perturbed_christoffel if inject_fault == "christoffel" else None
    out.append(CheckResult("geometry.curvature_fd", _rel(riemann_fd(p, christoffel), riemann(p)), 1e-6))
    jet, jet_fd = embedding_jet(p), embedding_jet_fd(p)
    out.append(CheckResult("geometry.embedding_jet_fd", _rel(jet_fd.d, jet.d), 1e-8))

    routes = list(accel_norm_sq_routes(h, psi).values())
    out.append(CheckResult("curves.accel_routes", (max(routes) - min(routes)) / max(1.0, max(routes)), 1e-10))

    other = random_state(dim, rng)
    geo = GeodesicCurve(psi, other)
    out.append(CheckResult("phase.geodesic_null", abs(geometric_phase(geo, 1.0, steps=64).final), 1e-8))

    curve = SchrodingerCurve(h, psi)
    cov = phase_derivs_covariant(covariant_jet(curve, 0.0))
    vt = phase_derivs_vtilde(vtilde_expansion(curve, 4))
    out.append(CheckResult("phase.d3_moments", _rel(cov[3], schrodinger_d3(h, psi)), 1e-9))
    out.append(CheckResult("phase.routes_covariant_vtilde", _rel([cov[k] for k in (3, 4, 5)],
                                                                [vt[k] for k in (3, 4, 5)]), 1e-9))
    fd = phase_derivatives_fd(curve, 0.0, orders=(1, 2, 3))
    out.append(CheckResult("phase.low_orders_vanish", max(abs(fd[1]), abs(fd[2])), 1e-5))

    t = 0.3
    rate = frame_phase_rate(geodesic_frame(curve, t))
    slope = phase_derivatives_fd(curve, t, orders=(1,), step=0.02, half_width=4, max_step=2.5e-4)[1]
    out.append(CheckResult("phase.frame_rate", abs(rate - slope) / max(abs(slope), 1e-3), 1e-4))

    e0 = np.eye(dim, dtype=complex)[0]
    out.append(CheckResult("brachistophase.max_accel_objective",
                           abs(accel_objective(max_accel_hamiltonian(psi).H_transported, psi) - 1), 1e-12))
    sol = brachistophase_hamiltonian(e0)
    out.append(CheckResult("brachistophase.third_derivative",
                           abs(sol.objective - 4 * np.sqrt(3) / 9), 1e-12))

    recon = state_from_constellation(constellation(psi).stars)
    out.append(CheckResult("majorana.reconstruction", _phase_equal(recon, psi), 1e-8))
    s = spin_from_dim(dim)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = float(rng.uniform(0, np.pi))
    rotated = constellation(spin_rotation(s, axis, angle) @ psi).stars
    expected = constellation(psi).stars @ rotation_matrix(axis, angle).T
    d = sphere_angles(rotated, expected)
    rows, cols = linear_sum_assignment(d)
    sx, sy, sz = spin_operators(s)
    out.append(CheckResult("majorana.spin_algebra", _rel(commutator(sx, sy), 1j * sz), 1e-12))
    out.append(CheckResult("majorana.rotation_equivariance",
                           float(d[rows, cols].max()), 1e-8))
    return out


def suite_passed(results) -> bool:
    return all(r.passed for r in results)
