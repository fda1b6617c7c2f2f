"""Curves of pure states and their covariant jets.

Every curve supplies Taylor coefficients of a unit-ket lift,
``psi(t + e) = sum_k c_k e^k``. The projector, its ambient derivatives and the
covariant derivatives along the curve are obtained from these coefficients
with truncated power-series arithmetic. At a point, the covariant derivative
of a tangent field along the curve is the tangential projection of its
ordinary derivative, so ``alpha = P(d v / dt)``, ``beta = P(d alpha / dt)``
and ``gamma = P(d beta / dt)`` with ``P_t`` itself expanded in ``e``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.interpolate import CubicSpline

from .core import (
    InvalidStateError,
    adjoint_superop,
    as_state,
    check_hermitian,
    commutator,
    ket_from_projector,
    spectral_decompose,
    vec,
)
from .geometry import metric_G, tangent_project

JET_ORDER = 4


def _as_ket(state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.ndim == 2:
        return ket_from_projector(state)
    return as_state(state)


def fd_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights on arbitrary nodes (Fornberg's recursion).

    Returns ``w`` with ``w[k] @ f(x)`` approximating the ``k``-th derivative of
    ``f`` at ``x0`` for ``k = 0..m``.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((m + 1, n))
    c1, c4 = 1.0, x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[k, i] = c1 * (k * c[k - 1, i - 1] - c5 * c[k, i - 1]) / c2
                c[0, i] = -c1 * c5 * c[0, i - 1] / c2
            for k in range(mn, 0, -1):
                c[k, j] = (c4 * c[k, j] - k * c[k - 1, j]) / c3
            c[0, j] = c4 * c[0, j] / c3
        c1 = c2
    return c


# truncated power series of matrices: lists of arrays, index = power of e


def series_mul(a, b):
    n = min(len(a), len(b))
    return [sum(a[i] @ b[k - i] for i in range(k + 1)) for k in range(n)]


def series_diff(a):
    return [(k + 1) * a[k + 1] for k in range(len(a) - 1)]


def series_project(r, x):
    """Coefficients of ``P_t(X_t) = r X + X r - 2 r X r`` for series ``r``, ``x``."""
    rx = series_mul(r, x)
    xr = series_mul(x, r)
    rxr = series_mul(rx, r)
    return [rx[k] + xr[k] - 2 * rxr[k] for k in range(len(rxr))]


def rho_series(kets: np.ndarray):
    """Taylor coefficients of ``|psi><psi|`` from those of ``psi``."""
    return [sum(np.outer(kets[i], kets[k - i].conj()) for i in range(k + 1)) for k in range(len(kets))]


class Curve(ABC):
    """A smooth curve of pure states parametrised by a real ``t``."""

    domain: tuple[float, float] = (-np.inf, np.inf)
    piecewise = False  # derivatives jump at some parameter values

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def ket_taylor(self, t: float, order: int) -> np.ndarray:
        """Array of shape ``(order + 1, N)`` of Taylor coefficients at ``t``."""

    def _check_t(self, t: float) -> None:
        lo, hi = self.domain
        if not (lo - 1e-12 <= t <= hi + 1e-12):
            raise ValueError(f"t = {t} outside curve domain [{lo}, {hi}]")

    def ket(self, t: float) -> np.ndarray:
        return self.ket_taylor(t, 0)[0]

    def rho(self, t: float) -> np.ndarray:
        psi = self.ket(t)
        return np.outer(psi, psi.conj())

    def rho_dot(self, t: float) -> np.ndarray:
        c = self.ket_taylor(t, 1)
        d = np.outer(c[1], c[0].conj())
        return d + d.conj().T

    def rho_series(self, t: float, order: int = JET_ORDER):
        return rho_series(self.ket_taylor(t, order))

    def rho_dot_before(self, t: float) -> np.ndarray:
        """Left-sided ``d rho/dt``; differs from :meth:`rho_dot` only at kinks."""
        return self.rho_dot(t)


class SchrodingerCurve(Curve):
    """``rho(t) = exp(-itH) rho0 exp(itH)`` evaluated spectrally."""

    def __init__(self, hamiltonian, state):
        self.hamiltonian = check_hermitian(hamiltonian)
        self.psi0 = _as_ket(state)
        if self.psi0.shape[0] != self.hamiltonian.shape[0]:
            raise ValueError("state and hamiltonian dimensions differ")
        self.spectrum = spectral_decompose(self.hamiltonian)
        # state in the eigenbasis, for cheap evolution
        self._coeffs = self.spectrum.eigenvectors.conj().T @ self.psi0

    @property
    def dim(self) -> int:
        return self.psi0.shape[0]

    def ket(self, t: float) -> np.ndarray:
        s = self.spectrum
        return s.eigenvectors @ (np.exp(-1j * s.eigenvalues * t) * self._coeffs)

    def ket_taylor(self, t: float, order: int) -> np.ndarray:
        out = [self.ket(t)]
        for k in range(1, order + 1):
            out.append(-1j * (self.hamiltonian @ out[-1]) / k)
        return np.array(out)

    def rho_dot(self, t: float) -> np.ndarray:
        return -1j * commutator(self.hamiltonian, self.rho(t))

    def rho_series(self, t: float, order: int = JET_ORDER):
        ders = [self.rho(t)] + ambient_derivatives(self, t, order)
        return [d / factorial(k) for k, d in enumerate(ders)]


class GeodesicCurve(Curve):
    """``psi(s) = cos(L s) psi0 + sin(L s) xi``; ``s = 1`` reaches the end point."""

    def __init__(self, rho0, rho1, overlap_tol: float = 1e-12):
        self.psi0 = _as_ket(rho0)
        psi1 = _as_ket(rho1)
        overlap = np.vdot(self.psi0, psi1)
        fidelity = abs(overlap) ** 2
        if fidelity <= overlap_tol:
            raise InvalidStateError("antipodal end points: the connecting geodesic is not unique")
        if fidelity >= 1 - 1e-15:
            raise InvalidStateError("end points coincide")
        psi1 = psi1 * (abs(overlap) / overlap)  # real non-negative overlap
        self.length = float(np.arccos(min(1.0, np.sqrt(fidelity))))
        xi = psi1 - np.cos(self.length) * self.psi0
        self.xi = xi / np.linalg.norm(xi)

    @property
    def dim(self) -> int:
        return self.psi0.shape[0]

    def ket_taylor(self, t: float, order: int) -> np.ndarray:
        ell = self.length
        c, s = np.cos(ell * t), np.sin(ell * t)
        # k-th derivatives of (cos, sin) cycle with period four
        cyc = [(c, s), (-s, c), (-c, -s), (s, -c)]
        out = []
        for k in range(order + 1):
            a, b = cyc[k % 4]
            out.append(ell**k * (a * self.psi0 + b * self.xi) / factorial(k))
        return np.array(out)


class PolygonCurve(Curve):
    """Geodesic polygon through the given vertices, one unit of ``t`` per edge.

    The velocity jumps at integer ``t``; integration grids should contain
    those nodes to keep full order.
    """

    piecewise = True

    def __init__(self, vertices):
        kets = [_as_ket(v) for v in vertices]
        if len(kets) < 2:
            raise ValueError("need at least two vertices")
        self.edges = [GeodesicCurve(a, b) for a, b in zip(kets[:-1], kets[1:])]
        self.domain = (0.0, float(len(self.edges)))

    @property
    def dim(self) -> int:
        return self.edges[0].dim

    def ket_taylor(self, t: float, order: int) -> np.ndarray:
        self._check_t(t)
        j = min(int(np.floor(t)), len(self.edges) - 1)
        return self.edges[j].ket_taylor(t - j, order)

    def rho_dot_before(self, t: float) -> np.ndarray:
        j = int(np.ceil(t)) - 1
        if t == j + 1 and 0 <= j < len(self.edges):
            return self.edges[j].rho_dot(1.0)
        return self.rho_dot(t)


class ProductCurve(Curve):
    """``psi(t) = exp(-itH_1) ... exp(-itH_m) psi0``; not a Schrodinger curve in general."""

    def __init__(self, hamiltonians, state):
        self.hamiltonians = [check_hermitian(h) for h in hamiltonians]
        self.spectra = [spectral_decompose(h) for h in self.hamiltonians]
        self.psi0 = _as_ket(state)

    @property
    def dim(self) -> int:
        return self.psi0.shape[0]

    def ket_taylor(self, t: float, order: int) -> np.ndarray:
        series = [self.psi0] + [np.zeros_like(self.psi0)] * order
        for h, spec in zip(reversed(self.hamiltonians), reversed(self.spectra)):
            u = spec.evolution(t)
            # coefficients of exp(-i e H) applied to the running series
            powers = [series]
            for k in range(1, order + 1):
                powers.append([-1j * (h @ x) / k for x in powers[-1]])
            series = [
                u @ sum(powers[i][k - i] for i in range(k + 1)) for k in range(order + 1)
            ]
        return np.array(series)


class SampledCurve(Curve):
    """Curve known only at sample times.

    Consecutive kets are re-phased so their overlaps are real and positive.
    Values between nodes come from a cubic spline; derivatives come from
    finite differences on the nearest ``2 * order + 1`` nodes.
    """

    def __init__(self, times, states):
        times = np.asarray(times, dtype=float)
        if times.ndim != 1 or len(times) < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        kets = [_as_ket(s) for s in states]
        if len(kets) != len(times):
            raise ValueError("times and states differ in length")
        for k in range(1, len(kets)):
            ov = np.vdot(kets[k - 1], kets[k])
            if abs(ov) > 0:
                kets[k] = kets[k] * (abs(ov) / ov)
        self.times = times
        self.kets = np.array(kets)
        self.domain = (float(times[0]), float(times[-1]))
        self._spline = CubicSpline(times, self.kets, axis=0)

    @property
    def dim(self) -> int:
        return self.kets.shape[1]

    def ket(self, t: float) -> np.ndarray:
        self._check_t(t)
        psi = self._spline(t)
        return psi / np.linalg.norm(psi)

    def ket_taylor(self, t: float, order: int) -> np.ndarray:
        self._check_t(t)
        need = 2 * order + 1
        if len(self.times) < need:
            raise ValueError(f"order {order} needs at least {need} samples")
        idx = np.argsort(np.abs(self.times - t), kind="stable")[:need]
        idx.sort()
        w = fd_weights(t, self.times[idx], order)
        ders = w @ self.kets[idx]
        if order == 0:
            return self.ket(t)[None, :]
        ders[0] = self.ket(t)
        return np.array([d / factorial(k) for k, d in enumerate(ders)])


def ambient_derivatives(curve: Curve, t: float, order: int = JET_ORDER) -> list[np.ndarray]:
    """``[d rho/dt, ..., d^order rho/dt^order]`` at ``t``."""
    if not 1 <= order <= JET_ORDER:
        raise ValueError(f"order must be in 1..{JET_ORDER}")
    curve._check_t(t)
    if isinstance(curve, SchrodingerCurve):
        h = curve.hamiltonian
        out, cur = [], curve.rho(t)
        for _ in range(order):
            cur = -1j * commutator(h, cur)
            out.append(cur)
        return out
    r = curve.rho_series(t, order)
    return [factorial(k) * r[k] for k in range(1, order + 1)]


@dataclass(frozen=True)
class CovariantJet:
    rho: np.ndarray
    v: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    mu: float
    speed_sq: float


def _series_jet(curve: Curve, t: float):
    r = curve.rho_series(t, JET_ORDER)
    v = series_diff(r)
    alpha = series_project(r, series_diff(v))
    beta = series_project(r, series_diff(alpha))
    gamma = series_project(r, series_diff(beta))
    return r, v, alpha, beta, gamma


def covariant_jet(curve: Curve, t: float = 0.0, gamma: str = "series", h: float = 1e-3) -> CovariantJet:
    """Velocity and its first three covariant derivatives at ``t``.

    ``gamma="series"`` differentiates the power series exactly;
    ``gamma="transport"`` instead projects a Richardson-extrapolated central
    difference of ``beta`` along the curve (step ``h``).
    """
    curve._check_t(t)
    r, v, alpha, beta, gam = _series_jet(curve, t)
    rho = r[0]
    if gamma == "transport":
        def beta_at(s):
            return _series_jet(curve, t + s)[3][0]

        coarse = (beta_at(h) - beta_at(-h)) / (2 * h)
        fine = (beta_at(h / 2) - beta_at(-h / 2)) / h
        gam0 = tangent_project(rho, (4 * fine - coarse) / 3)
    elif gamma == "series":
        gam0 = gam[0]
    else:
        raise ValueError(f"unknown gamma method {gamma!r}")
    kets = curve.ket_taylor(t, 1)
    psi, dpsi = kets[0], kets[1]
    mu = float(np.vdot(dpsi, dpsi).real - abs(np.vdot(psi, dpsi)) ** 2)
    herm = lambda x: 0.5 * (x + x.conj().T)  # noqa: E731
    return CovariantJet(
        rho=rho,
        v=herm(v[0]),
        alpha=herm(alpha[0]),
        beta=herm(beta[0]),
        gamma=herm(gam0),
        mu=mu,
        speed_sq=metric_G(v[0], v[0]),
    )


def moments(hamiltonian, state, m_max: int) -> np.ndarray:
    """``[h_0, h_1, ..., h_m]`` with ``h_m = <psi|H^m|psi>``."""
    if not 0 <= m_max <= 8:
        raise ValueError("m_max must be in 0..8")
    h = np.asarray(hamiltonian, dtype=complex)
    psi = _as_ket(state)
    out, cur = [1.0], psi
    for _ in range(m_max):
        cur = h @ cur
        out.append(float(np.vdot(psi, cur).real))
    return np.array(out)


def accel_norm_sq_routes(hamiltonian, state) -> dict[str, float]:
    """``|alpha|^2`` at ``t = 0`` by moments, superoperators and the jet."""
    h = check_hermitian(hamiltonian)
    psi = _as_ket(state)
    rho = np.outer(psi, psi.conj())
    hm = moments(h, psi, 4)
    _, h1, h2, h3, h4 = hm
    by_moments = h4 - 4 * h3 * h1 - h2**2 + 8 * h2 * h1**2 - 4 * h1**4
    ad_h = adjoint_superop(h)
    ad_r = adjoint_superop(rho)
    vr = vec(rho)
    h2s = ad_h @ ad_h
    by_superop = 0.5 * float(np.vdot(vr, h2s @ (ad_r @ (ad_r @ (h2s @ vr)))).real)
    rho_ddot = -commutator(h, commutator(h, rho))
    alpha = tangent_project(rho, rho_ddot)
    by_jet = metric_G(alpha, alpha)
    return {"moments": float(by_moments), "superoperator": by_superop, "jet": by_jet}


def accel_norm_sq(hamiltonian, state, verify: bool = True, tol: float = 1e-10) -> float:
    """Squared norm of the covariant acceleration of the Schrodinger curve.

    Evaluated from the moments ``h_m`` as
    ``h4 - 4 h3 h1 - h2^2 + 8 h2 h1^2 - 4 h1^4``. With ``verify`` set, the
    superoperator and direct-projection routes are computed as well and must
    agree to ``tol`` relative to ``max(1, h4)``.
    """
    h = check_hermitian(hamiltonian)
    psi = _as_ket(state)
    if not verify:
        _, h1, h2, h3, h4 = moments(h, psi, 4)
        return float(h4 - 4 * h3 * h1 - h2**2 + 8 * h2 * h1**2 - 4 * h1**4)
    routes = accel_norm_sq_routes(h, psi)
    vals = list(routes.values())
    scale = max(1.0, moments(h, psi, 4)[4])
    if max(vals) - min(vals) > tol * scale:
        raise ArithmeticError(f"acceleration routes disagree: {routes}")
    return routes["moments"]


def geodesic_between(rho0, rho1) -> tuple[GeodesicCurve, float, np.ndarray]:
    """Shortest geodesic from ``rho0`` to ``rho1`` with its length and direction ket."""
    curve = GeodesicCurve(rho0, rho1)
    return curve, curve.length, curve.xi


def curvature(curve: Curve, t: float = 0.0) -> float:
    """Geodesic curvature ``|v ^ alpha| / |v|^3`` (``|alpha| / |v|^2`` at constant speed)."""
    jet = covariant_jet(curve, t)
    vv = jet.speed_sq
    if vv < 1e-14:
        raise ValueError("curve is stationary at t; curvature undefined")
    aa = metric_G(jet.alpha, jet.alpha)
    av = metric_G(jet.alpha, jet.v)
    return float(np.sqrt(max(aa * vv - av**2, 0.0)) / vv**1.5)
