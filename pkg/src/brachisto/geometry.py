"""Fubini-Study geometry of CP^n, in the affine chart and as an embedded orbit.

Chart quantities live on ``U0 = {psi : psi[0] != 0}`` with coordinates
``z^a = psi[a] / psi[0]`` (``a = 1..n``, stored zero-based). Embedded
quantities treat a pure state as the projector ``rho`` inside the space of
hermitian matrices, with the metric ``G(X, Y) = Tr(XY) / 2``.
"""

from __future__ import annotations

import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .core import commutator, normalize

CHART_TOL = 1e-8
FD_STEP = 1e-4


class ChartError(ValueError):
    """The state lies (numerically) outside the chart ``psi[0] != 0``."""


class NonTangentWarning(UserWarning):
    """An operator that should be tangent had a normal component."""


@dataclass(frozen=True)
class ChartPoint:
    z: np.ndarray

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=complex))
        if not np.all(np.isfinite(z)):
            raise ChartError("chart coordinates must be finite")
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def w(self) -> np.ndarray:
        return self.z.conj()

    @property
    def delta(self) -> float:
        return 1.0 + float(np.vdot(self.z, self.z).real)


@dataclass(frozen=True)
class MetricData:
    point: ChartPoint
    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray  # christoffel[c, a, b] = Gamma^c_{ab}

    @property
    def christoffel_bar(self) -> np.ndarray:
        return self.christoffel.conj()


@dataclass(frozen=True)
class EmbeddingJet:
    rho: np.ndarray
    d: np.ndarray  # d[a] = d rho / d z^a
    dbar: np.ndarray  # dbar[b] = d rho / d w^b
    dd: np.ndarray  # dd[a, b]
    ddbar: np.ndarray  # ddbar[a, b] = d^2 rho / d z^a d w^b
    dbardbar: np.ndarray


def chart(psi) -> ChartPoint:
    psi = normalize(psi)
    if abs(psi[0]) < CHART_TOL:
        raise ChartError(f"|psi[0]| = {abs(psi[0]):.2e} is below {CHART_TOL:.0e}")
    return ChartPoint(psi[1:] / psi[0])


def _homogeneous(z: np.ndarray) -> np.ndarray:
    return np.concatenate([[1.0 + 0j], z])


def _embed_zw(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Projector formula with ``z`` and ``w`` treated as independent."""
    zz, ww = _homogeneous(z), _homogeneous(w)
    return np.outer(zz, ww) / (1.0 + z @ w)


def embed(p: ChartPoint) -> np.ndarray:
    return _embed_zw(p.z, p.w)


def _metric_zw(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    delta = 1.0 + z @ w
    return 0.5 * (delta * np.eye(len(z)) - np.outer(w, z)) / delta**2


def _christoffel_zw(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    n = len(z)
    eye = np.eye(n)
    delta = 1.0 + z @ w
    # gam[c, a, b] = -(delta_cb w_a + delta_ca w_b) / delta
    return -(eye[:, None, :] * w[None, :, None] + eye[:, :, None] * w[None, None, :]) / delta


def fs_metric(p: ChartPoint) -> MetricData:
    z, w, delta = p.z, p.w, p.delta
    g = _metric_zw(z, w)
    g_inv = 2 * delta * (np.eye(p.n) + np.outer(z, w))
    # sum_r g_{a rbar} g^{b rbar} = delta_ab
    if not np.allclose(g @ g_inv.T, np.eye(p.n), atol=1e-10 * delta**2):
        raise ArithmeticError("metric inverse check failed")
    return MetricData(p, g, g_inv, _christoffel_zw(z, w))


def riemann(p: ChartPoint, prefactor: float = 2.0) -> np.ndarray:
    """Components ``R[a, b, c, d] = R_{a bbar c dbar}``.

    The tensor has the constant-holomorphic-curvature form
    ``prefactor * (g_ab g_cd + g_ad g_cb)``. The default ``prefactor = 2`` is
    the value for the Levi-Civita connection of the metric returned by
    :func:`fs_metric` (see :func:`riemann_fd`); pass ``0.5`` for the
    normalisation that belongs to the Kahler potential ``2 log Delta`` taken
    without the factor ``1/2`` in the metric.
    """
    g = fs_metric(p).g
    return prefactor * (np.einsum("ab,cd->abcd", g, g) + np.einsum("ad,cb->abcd", g, g))


def _richardson(f: Callable[[float], np.ndarray], h: float) -> np.ndarray:
    coarse = (f(h) - f(-h)) / (2 * h)
    fine = (f(h / 2) - f(-h / 2)) / h
    return (4 * fine - coarse) / 3


def riemann_fd(
    p: ChartPoint,
    christoffel: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    h: float = FD_STEP,
) -> np.ndarray:
    """Curvature from finite differences of the Christoffel symbols.

    With all mixed Christoffel symbols zero, the Levi-Civita curvature reduces
    to ``R_{a bbar c dbar} = -g_{e bbar} d_{dbar} Gamma^e_{ca}``. The
    ``christoffel(z, w)`` callable defaults to the closed form and can be
    swapped for a perturbed one when testing the checker itself.
    """
    christoffel = christoffel or _christoffel_zw
    z, w = p.z, p.w
    g = _metric_zw(z, w)
    n = p.n
    out = np.empty((n, n, n, n), dtype=complex)
    for d in range(n):
        e = np.zeros(n)
        e[d] = 1.0
        dgam = _richardson(lambda s: christoffel(z, w + s * e), h)  # [e, c, a]
        out[:, :, :, d] = -np.einsum("eb,eca->abc", g, dgam)
    return out


def metric_fd(p: ChartPoint, h: float = FD_STEP) -> np.ndarray:
    """``dg[c, a, b] = d_c g_{a bbar}`` by central differences."""
    z, w = p.z, p.w
    out = []
    for c in range(p.n):
        e = np.zeros(p.n)
        e[c] = 1.0
        out.append(_richardson(lambda s: _metric_zw(z + s * e, w), h))
    return np.array(out)


def embedding_jet(p: ChartPoint) -> EmbeddingJet:
    """First and second chart derivatives of the embedded projector."""
    n, delta = p.n, p.delta
    zz, ww = _homogeneous(p.z), _homogeneous(p.w)
    w, z = p.w, p.z
    e = np.eye(n + 1)[1:]  # e[a, mu] = delta^mu_a
    zw = np.outer(zz, ww)

    d = (delta * np.einsum("am,n->amn", e, ww) - np.einsum("mn,a->amn", zw, w)) / delta**2
    dbar = (delta * np.einsum("bn,m->bmn", e, zz) - np.einsum("mn,b->bmn", zw, z)) / delta**2

    dd = (
        2 * np.einsum("mn,a,b->abmn", zw, w, w)
        - delta * (np.einsum("am,b,n->abmn", e, w, ww) + np.einsum("bm,a,n->abmn", e, w, ww))
    ) / delta**3
    ddbar = (
        2 * np.einsum("b,a,mn->abmn", z, w, zw)
        - delta
        * (
            np.einsum("am,b,n->abmn", e, z, ww)
            + np.einsum("bn,m,a->abmn", e, zz, w)
            + np.einsum("ab,mn->abmn", np.eye(n), zw)
            - delta * np.einsum("am,bn->abmn", e, e)
        )
    ) / delta**3
    dbardbar = (
        2 * np.einsum("a,b,mn->abmn", z, z, zw)
        - delta * (np.einsum("an,b,m->abmn", e, z, zz) + np.einsum("bn,a,m->abmn", e, z, zz))
    ) / delta**3
    return EmbeddingJet(embed(p), d, dbar, dd, ddbar, dbardbar)


def embedding_jet_fd(p: ChartPoint, h: float = FD_STEP) -> EmbeddingJet:
    """Finite-difference counterpart of :func:`embedding_jet`."""
    n = p.n
    eye = np.eye(n)
    z, w = p.z, p.w

    def dz(f, a):
        return _richardson(lambda s: f(z + s * eye[a], w), h)

    def dw(f, a):
        return _richardson(lambda s: f(z, w + s * eye[a]), h)

    d = np.array([dz(_embed_zw, a) for a in range(n)])
    dbar = np.array([dw(_embed_zw, a) for a in range(n)])

    def first_z(b):
        return lambda zz, ww: _richardson(lambda s: _embed_zw(zz + s * eye[b], ww), h)

    def first_w(b):
        return lambda zz, ww: _richardson(lambda s: _embed_zw(zz, ww + s * eye[b]), h)

    dd = np.array([[dz(first_z(b), a) for b in range(n)] for a in range(n)])
    ddbar = np.array([[dz(first_w(b), a) for b in range(n)] for a in range(n)])
    dbardbar = np.array([[dw(first_w(b), a) for b in range(n)] for a in range(n)])
    return EmbeddingJet(embed(p), d, dbar, dd, ddbar, dbardbar)


def coordinate_covariant(p: ChartPoint, route: str = "christoffel") -> np.ndarray:
    """``nabla_b rho_a`` for the holomorphic coordinate fields ``rho_a = d rho / dz^a``.

    ``route="christoffel"`` contracts the closed-form symbols,
    ``-(w_a rho_b + w_b rho_a) / Delta``; ``route="projection"`` projects the
    ambient second derivative onto the tangent space. Indexed ``[a, b]``.
    """
    jet = embedding_jet(p)
    if route == "christoffel":
        gam = _christoffel_zw(p.z, p.w)  # [c, a, b]
        return np.einsum("cab,cmn->abmn", gam, jet.d)
    if route == "projection":
        n = p.n
        return np.array([[tangent_project(jet.rho, jet.dd[a, b]) for b in range(n)] for a in range(n)])
    raise ValueError(f"unknown route {route!r}")


def tangent_project(rho: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Tangential part ``[rho, [rho, a]]`` of ``a`` at the pure state ``rho``."""
    return commutator(rho, commutator(rho, a))


def normal_part(rho: np.ndarray, a: np.ndarray) -> np.ndarray:
    return a - tangent_project(rho, a)


def complex_structure(rho: np.ndarray, x: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """``J(x) = i [x, rho]``; a normal component of ``x`` is dropped with a warning."""
    xt = tangent_project(rho, x)
    defect = np.linalg.norm(x - xt)
    if defect > tol * max(1.0, np.linalg.norm(x)):
        warnings.warn(
            f"operator has normal component of norm {defect:.2e}; projected before applying J",
            NonTangentWarning,
            stacklevel=2,
        )
    return 1j * commutator(xt, rho)


def metric_G(x: np.ndarray, y: np.ndarray) -> float:
    return 0.5 * float(np.einsum("ij,ji->", x, y).real)


def symplectic_omega(rho: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    """``omega(x, y) = G(J x, y)``, equal to ``Tr(rho [x, y]) / 2i``."""
    return metric_G(1j * commutator(x, rho), y)


def tangent_from_ket(psi: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Tangent vector ``|u><psi| + |psi><u|`` generated by a ket displacement."""
    return np.outer(u, psi.conj()) + np.outer(psi, u.conj())
