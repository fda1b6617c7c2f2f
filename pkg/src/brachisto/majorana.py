"""Majorana stellar representation of spin-s states.

A state with amplitudes ``psi_k`` (``k = 0..2s``, ``k = 0`` being ``m = s``)
has the polynomial ``P(z) = sum_k (-1)^k sqrt(C(2s, k)) psi_k z^(2s-k)``.
Its roots are mapped to the unit sphere by the inverse of
``z = tan(theta / 2) exp(i phi)``, so ``z = 0`` is the north pole and roots
lost to a drop in degree sit at the south pole. With this convention the
spin-up state has all stars at the north pole and spin rotations act on the
stars as ordinary rotations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .core import evolution_operator, normalize, spectral_decompose
from .curves import _as_ket

STEP_CAP = 0.2
ZERO_COEFF = 1e-13


def spin_from_dim(n: int) -> float:
    return (n - 1) / 2


def spin_operators(s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(Sx, Sy, Sz)`` in the basis ``m = s, s-1, ..., -s``."""
    dim = int(round(2 * s)) + 1
    m = s - np.arange(dim)
    sp = np.zeros((dim, dim))
    for k in range(1, dim):
        sp[k - 1, k] = np.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sx = (sp + sp.T) / 2
    sy = (sp - sp.T) / 2j
    return sx.astype(complex), sy, np.diag(m).astype(complex)


def spin_rotation(s: float, axis, angle: float) -> np.ndarray:
    """``exp(-i angle n.S)`` for the unit axis ``n``."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    gen = sum(c * op for c, op in zip(n, spin_operators(s)))
    return evolution_operator(gen, angle)


def rotation_matrix(axis, angle: float) -> np.ndarray:
    """SO(3) rotation by ``angle`` about ``axis`` (right-handed)."""
    n = np.asarray(axis, dtype=float)
    n = n / np.linalg.norm(n)
    k = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def majorana_polynomial(psi) -> np.ndarray:
    """Coefficients of ``P`` in descending powers; the leading one is ``psi_0``."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or not np.any(psi):
        raise ValueError("need a nonzero ket")
    deg = len(psi) - 1
    signs = (-1.0) ** np.arange(deg + 1)
    binom = np.sqrt([comb(deg, k) for k in range(deg + 1)])
    return signs * binom * psi


def state_from_polynomial(coeffs) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=complex)
    deg = len(coeffs) - 1
    signs = (-1.0) ** np.arange(deg + 1)
    binom = np.sqrt([comb(deg, k) for k in range(deg + 1)])
    return normalize(signs * coeffs / binom)


def root_to_star(z: complex) -> np.ndarray:
    r2 = abs(z) ** 2
    return np.array([2 * z.real, 2 * z.imag, 1 - r2]) / (1 + r2)


def star_to_root(star) -> complex:
    x, y, z = star
    if z <= -1 + 1e-15:
        return complex(np.inf)
    return complex(x, y) / (1 + z)


@dataclass(frozen=True)
class MajoranaConstellation:
    stars: np.ndarray  # (2s, 3)
    roots: np.ndarray  # finite roots
    n_infinite: int

    @property
    def spin(self) -> float:
        return len(self.stars) / 2


def _polish(coeffs: np.ndarray, r: complex) -> complex:
    p = np.polyval(coeffs, r)
    dp = np.polyval(np.polyder(coeffs), r)
    if abs(dp) < 1e-8 * max(1.0, np.abs(coeffs).max()):
        return r  # multiple root: a Newton step would not help
    step = p / dp
    return r - step if abs(step) < 1e-3 * max(1.0, abs(r)) else r


def constellation(psi) -> MajoranaConstellation:
    """Stars of ``psi``; roots from companion-matrix eigenvalues plus one Newton step.

    Coefficients below ``1e-13`` of the largest are treated as exact zeros so
    that stars sitting exactly at a pole are not scattered by rounding noise.
    """
    coeffs = majorana_polynomial(psi)
    deg = len(coeffs) - 1
    scale = np.abs(coeffs).max()
    coeffs = np.where(np.abs(coeffs) < ZERO_COEFF * scale, 0, coeffs)
    nz = np.flatnonzero(coeffs)
    n_inf = int(nz[0])
    n_zero = deg - int(nz[-1])
    core = coeffs[nz[0] : nz[-1] + 1]
    roots = np.roots(core) if len(core) > 1 else np.array([], dtype=complex)
    roots = np.array([_polish(core, r) for r in roots], dtype=complex)
    roots = np.concatenate([np.zeros(n_zero, dtype=complex), roots])
    stars = [root_to_star(r) for r in roots] + [np.array([0.0, 0.0, -1.0])] * n_inf
    return MajoranaConstellation(np.array(stars).reshape(deg, 3), roots, n_inf)


def state_from_constellation(stars) -> np.ndarray:
    """Ket (up to global phase) whose constellation is ``stars``."""
    stars = np.asarray(stars, dtype=float)
    deg = len(stars)
    finite = [star_to_root(s) for s in stars if s[2] > -1 + 1e-12]
    n_inf = deg - len(finite)
    poly = np.poly(finite) if finite else np.array([1.0 + 0j])
    coeffs = np.concatenate([np.zeros(n_inf, dtype=complex), poly])
    return state_from_polynomial(coeffs)


def sphere_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise great-circle angles between rows of ``a`` and ``b``."""
    cross = np.linalg.norm(np.cross(a[:, None, :], b[None, :, :]), axis=-1)
    return np.arctan2(cross, a @ b.T)


def _greedy_match(prev: np.ndarray, cur: np.ndarray) -> tuple[np.ndarray, float]:
    """Order ``cur`` to follow ``prev``; returns the ordering and the largest step."""
    d = sphere_angles(prev, cur)
    n = len(prev)
    perm = np.full(n, -1)
    used_r, used_c = np.zeros(n, bool), np.zeros(n, bool)
    worst = 0.0
    for flat in np.argsort(d, axis=None, kind="stable"):
        i, j = divmod(int(flat), n)
        if used_r[i] or used_c[j]:
            continue
        perm[i] = j
        used_r[i] = used_c[j] = True
        worst = max(worst, d[i, j])
    return perm, worst


@dataclass
class StarTrajectory:
    times: np.ndarray
    tracks: np.ndarray  # (T, 2s, 3)
    events: list = field(default_factory=list)

    def permutation(self, tol: float = 1e-6) -> list[int] | None:
        """Initial-star index landed on by each track, if the end frame repeats the start."""
        d = sphere_angles(self.tracks[-1], self.tracks[0])
        perm = [int(np.argmin(row)) for row in d]
        if max(d[i, j] for i, j in enumerate(perm)) > tol:
            return None
        return perm


def trajectory(hamiltonian, psi0, grid, step_cap: float = STEP_CAP, max_depth: int = 12) -> StarTrajectory:
    """Continuity-matched star tracks of ``exp(-itH) psi0`` on ``grid``.

    Intervals where some star would jump by more than ``step_cap`` radians are
    bisected; where bisection cannot separate the stars (a collision) an event
    is recorded and the greedy match is kept.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("grid must be a non-empty 1-D array")
    if len(grid) > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    spec = spectral_decompose(hamiltonian)
    psi0 = _as_ket(psi0)

    def stars_at(t):
        return constellation(spec.evolution(t) @ psi0).stars

    times = [grid[0]]
    frames = [stars_at(grid[0])]
    events = []

    def advance(t0, t1, prev, depth):
        cur = stars_at(t1)
        perm, worst = _greedy_match(prev, cur)
        if worst <= step_cap:
            times.append(t1)
            frames.append(cur[perm])
            return cur[perm]
        if depth >= max_depth:
            events.append({"t": float(t1), "kind": "collision", "step": float(worst)})
            times.append(t1)
            frames.append(cur[perm])
            return cur[perm]
        mid = 0.5 * (t0 + t1)
        prev = advance(t0, mid, prev, depth + 1)
        return advance(mid, t1, prev, depth + 1)

    prev = frames[0]
    for t0, t1 in zip(grid[:-1], grid[1:]):
        prev = advance(t0, t1, prev, 0)
    return StarTrajectory(np.array(times), np.array(frames), events)


def _fit_plane(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    centre = points.mean(axis=0)
    _, _, vt = np.linalg.svd(points - centre)
    return centre, vt[-1]


def _oriented_normal(points: np.ndarray) -> np.ndarray:
    """Unit normal of the best-fit plane, oriented by the sense of circulation."""
    centre, n = _fit_plane(points)
    rel = points - centre
    circ = np.sum(np.cross(rel[:-1], rel[1:]), axis=0)
    return n if circ @ n >= 0 else -n


def polar_angle(v: np.ndarray) -> float:
    return float(np.arccos(np.clip(v[2] / np.linalg.norm(v), -1.0, 1.0)))


@dataclass
class FallingStarReport:
    spin: float
    sign: int
    times: np.ndarray
    roots: np.ndarray
    centre: complex
    radius: float
    circle_residual: float
    tilt: float
    tilt_expected: float
    oriented_tilt: float
    accel_tilt: float
    accel_oriented_tilt: float
    stationary_residual: float

    @property
    def accel_exceeds(self) -> bool:
        """Oriented max-acceleration tilt is larger than the brachistophase one."""
        return self.accel_oriented_tilt > self.oriented_tilt

    def as_dict(self) -> dict:
        return {
            "spin": self.spin,
            "sign": self.sign,
            "centre": [self.centre.real, self.centre.imag],
            "radius": self.radius,
            "circle_residual": self.circle_residual,
            "tilt": self.tilt,
            "tilt_expected": self.tilt_expected,
            "oriented_tilt": self.oriented_tilt,
            "accel_tilt": self.accel_tilt,
            "accel_oriented_tilt": self.accel_oriented_tilt,
            "accel_exceeds": self.accel_exceeds,
            "stationary_residual": self.stationary_residual,
        }


def _moving_star(hamiltonian, psi0, grid):
    spec = spectral_decompose(hamiltonian)
    roots, stars, still = [], [], 0.0
    for t in grid:
        c = constellation(spec.evolution(t) @ psi0)
        k = int(np.argmax(np.abs(c.roots)))
        roots.append(c.roots[k])
        stars.append(c.stars[k])
        rest = np.delete(c.stars, k, axis=0)
        if len(rest):
            still = max(still, float(np.max(np.abs(rest - [0, 0, 1]))))
    return np.array(roots), np.array(stars), still


def falling_star_audit(s: float, grid, sign=1) -> FallingStarReport:
    """Circle geometry of the single star leaving the north pole.

    Uses the brachistophase hamiltonian of the given ``sign`` at the spin-up
    state. The star moves on the circle ``|z - c| = sqrt(s)`` through ``z = 0``
    with ``c = -sign * sqrt(s)``; on the sphere its plane is tilted by
    ``arctan(2 sqrt s)``. The same fit is run for the max-acceleration
    hamiltonian of matching sign (tilt ``arctan(sqrt(2 s))``). Oriented tilts
    measure the normal pointing along the circulation.
    """
    from .brachistophase import brachistophase_hamiltonian, max_accel_hamiltonian

    grid = np.asarray(grid, dtype=float)
    if np.any(np.abs(np.sin(grid)) < 1e-8):
        raise ValueError("grid contains t = 0 mod pi, where the moving star sits at the pole")
    dim = int(round(2 * s)) + 1
    sgn = 1 if sign in (1, "+") else -1
    psi0 = np.zeros(dim, dtype=complex)
    psi0[0] = 1.0
    h = brachistophase_hamiltonian(psi0, sgn).H_transported
    roots, stars, still = _moving_star(h, psi0, grid)
    centre = -sgn * np.sqrt(s)
    residual = float(np.max(np.abs(np.abs(roots - centre) - np.sqrt(s))))
    _, n = _fit_plane(stars)
    tilt = polar_angle(n)
    tilt = min(tilt, np.pi - tilt)

    # max-acceleration branch whose diagonal sign matches: diag entry -sgn
    acc = max_accel_hamiltonian(psi0, -sgn).H_transported
    _, acc_stars, _ = _moving_star(acc, psi0, grid)
    _, na = _fit_plane(acc_stars)
    acc_tilt = polar_angle(na)
    acc_tilt = min(acc_tilt, np.pi - acc_tilt)
    return FallingStarReport(
        spin=s,
        sign=sgn,
        times=grid,
        roots=roots,
        centre=complex(centre),
        radius=float(np.sqrt(s)),
        circle_residual=residual,
        tilt=float(tilt),
        tilt_expected=float(np.arctan(2 * np.sqrt(s))),
        oriented_tilt=polar_angle(_oriented_normal(stars)),
        accel_tilt=float(acc_tilt),
        accel_oriented_tilt=polar_angle(_oriented_normal(acc_stars)),
        stationary_residual=still,
    )
