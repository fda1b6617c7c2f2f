"""Optimal hamiltonians for initial acceleration and initial geometric phase.

Hamiltonians are constrained to be traceless with ``Tr H^2 / 2 = 1``. The
problem is solved at the coherent state ``e_0`` and carried to any other
state ``rho`` by a unitary ``U`` with ``U e_0 ~ psi``: the objective and the
constraints are invariant under ``(rho, H) -> (U rho U^+, U H U^+)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import check_hermitian, dagger, random_hermitian
from .curves import SchrodingerCurve, _as_ket, covariant_jet, moments
from .phase import phase_derivs_covariant, schrodinger_d3, schrodinger_phase_batch

__all__ = [
    "BlockDecomposition",
    "OptimalSolution",
    "SearchResult",
    "ThresholdUndefinedError",
    "accel_objective",
    "block_decompose",
    "brachistophase_hamiltonian",
    "geodesic_unitary",
    "max_accel_hamiltonian",
    "moments",
    "normalize_hamiltonian",
    "random_search",
    "taylor_phase",
    "tau0_threshold",
    "transport_unitary",
]


class ThresholdUndefinedError(ValueError):
    """The third- and fifth-order Taylor terms never balance."""


@dataclass(frozen=True)
class BlockDecomposition:
    """``H = [[b, v^+], [v, B]]`` relative to the coherent state ``e_0``."""

    b: float
    v_block: np.ndarray
    B: np.ndarray

    @property
    def beta_block(self) -> float:
        return float(np.linalg.norm(self.v_block))

    @property
    def B_tilde(self) -> np.ndarray:
        return self.B - self.b * np.eye(len(self.v_block))

    @property
    def eigen(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenpairs of ``B_tilde`` ordered by decreasing ``|lambda|``.

        Within a degenerate ``|lambda|`` the vector with the largest overlap
        with ``v_block`` comes first.
        """
        w, vecs = np.linalg.eigh(self.B_tilde)
        overlap = np.abs(vecs.conj().T @ self.v_block)
        order = np.lexsort((-overlap, -np.round(np.abs(w), 12)))
        return w[order], vecs[:, order]

    @property
    def lambdas(self) -> np.ndarray:
        return self.eigen[0]

    def assemble(self) -> np.ndarray:
        n = len(self.v_block) + 1
        h = np.zeros((n, n), dtype=complex)
        h[0, 0] = self.b
        h[1:, 0] = self.v_block
        h[0, 1:] = self.v_block.conj()
        h[1:, 1:] = self.B
        return h


def block_decompose(hamiltonian) -> BlockDecomposition:
    h = check_hermitian(hamiltonian)
    return BlockDecomposition(float(h[0, 0].real), h[1:, 0].copy(), h[1:, 1:].copy())


def normalize_hamiltonian(hamiltonian) -> np.ndarray:
    """Project onto ``Tr H = 0`` and rescale to ``Tr H^2 / 2 = 1``."""
    h = check_hermitian(hamiltonian)
    n = h.shape[0]
    h = h - np.trace(h).real / n * np.eye(n)
    norm = np.sqrt(0.5 * np.einsum("ij,ji->", h, h).real)
    if norm == 0:
        raise ValueError("a multiple of the identity cannot be normalised")
    return h / norm


def accel_objective(hamiltonian, state, tol: float = 1e-10) -> float:
    """``h4 - 4 h3 h1 - h2^2 + 8 h2 h1^2 - 4 h1^4``.

    At the coherent state this is checked against ``|B_tilde v|^2``.
    """
    h = check_hermitian(hamiltonian)
    psi = _as_ket(state)
    _, h1, h2, h3, h4 = moments(h, psi, 4)
    f = float(h4 - 4 * h3 * h1 - h2**2 + 8 * h2 * h1**2 - 4 * h1**4)
    if abs(abs(psi[0]) - 1) < 1e-14:
        blk = block_decompose(h)
        other = float(np.linalg.norm(blk.B_tilde @ blk.v_block) ** 2)
        if abs(f - other) > tol * max(1.0, h4):
            raise ArithmeticError(f"objective routes disagree: {f} vs {other}")
    return f


def geodesic_unitary(psi_a, psi_b) -> np.ndarray:
    """Unitary along the geodesic from ``psi_a`` to the ray of ``psi_b``.

    It is ``exp(-i L chi)`` with ``chi = i(|xi><psi_a| - |psi_a><xi|)``, acts as
    the identity on the complement of ``span(psi_a, psi_b)`` and maps
    ``psi_a`` to ``psi_b`` up to phase.
    """
    a = _as_ket(psi_a)
    b = _as_ket(psi_b)
    ov = np.vdot(a, b)
    n = len(a)
    if abs(ov) >= 1 - 1e-15:
        return np.eye(n, dtype=complex)
    if abs(ov) <= 1e-12:
        raise ValueError("antipodal states: geodesic unitary not unique")
    b = b * (abs(ov) / ov)
    ell = np.arccos(min(1.0, abs(ov)))
    xi = b - np.cos(ell) * a
    xi /= np.linalg.norm(xi)
    chi = 1j * (np.outer(xi, a.conj()) - np.outer(a, xi.conj()))
    return np.eye(n) - 1j * np.sin(ell) * chi - (1 - np.cos(ell)) * (chi @ chi)


def transport_unitary(target) -> np.ndarray:
    """Unitary carrying the coherent state ``e_0`` to ``target``.

    A single geodesic leg is used unless the target is orthogonal to ``e_0``,
    in which case the path goes through the midpoint ``(e_0 + psi) / sqrt 2``.
    """
    psi = _as_ket(target)
    e0 = np.zeros(len(psi), dtype=complex)
    e0[0] = 1.0
    if abs(psi[0]) > 1e-12:
        return geodesic_unitary(e0, psi)
    mid = (e0 + psi) / np.sqrt(2)
    u1 = geodesic_unitary(e0, mid)
    u2 = geodesic_unitary(u1 @ e0, psi)
    return u2 @ u1


@dataclass(frozen=True)
class OptimalSolution:
    H_canonical: np.ndarray
    H_transported: np.ndarray
    transport_U: np.ndarray
    objective: float
    sign_choice: int


def _embed_block(block: np.ndarray, n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("dimension must be at least 2")
    h = np.zeros((n, n), dtype=complex)
    h[:2, :2] = block
    return h


def _solution(canonical: np.ndarray, state, objective, sign: int) -> OptimalSolution:
    u = transport_unitary(state)
    h = u @ canonical @ dagger(u)
    h = 0.5 * (h + dagger(h))
    return OptimalSolution(canonical, h, u, objective(h), sign)


def _sign(sign) -> int:
    if sign in (1, "+"):
        return 1
    if sign in (-1, "-"):
        return -1
    raise ValueError(f"sign must be +1 or -1, got {sign!r}")


def max_accel_hamiltonian(state, sign=1) -> OptimalSolution:
    """Hamiltonian of largest initial covariant acceleration; objective 1.

    Canonical block ``[[s, 1], [1, -s]] / sqrt 2`` with ``s = sign``.
    """
    s = _sign(sign)
    psi = _as_ket(state)
    block = np.array([[s, 1], [1, -s]]) / np.sqrt(2)
    canonical = _embed_block(block, len(psi))
    return _solution(canonical, psi, lambda h: accel_objective(h, psi), s)


def brachistophase_hamiltonian(state, sign=1) -> OptimalSolution:
    """Hamiltonian maximising the third derivative of the phase at ``t = 0``.

    Canonical block ``[[-s, sqrt 2], [sqrt 2, s]] / sqrt 3``; ``sign=+1`` gives
    the positive maximum ``4 sqrt(3) / 9`` and ``sign=-1`` its negative.
    """
    s = _sign(sign)
    psi = _as_ket(state)
    r2 = np.sqrt(2)
    block = np.array([[-s, r2], [r2, s]]) / np.sqrt(3)
    canonical = _embed_block(block, len(psi))
    return _solution(canonical, psi, lambda h: schrodinger_d3(h, psi), s)


def _odd_derivatives(hamiltonian, state) -> tuple[float, float]:
    d = phase_derivs_covariant(covariant_jet(SchrodingerCurve(hamiltonian, state), 0.0))
    return d[3], d[5]


def taylor_phase(hamiltonian, state, tau: float, order: int = 3) -> float:
    """Odd Taylor polynomial of the phase; even orders vanish for these curves."""
    if order not in (3, 5):
        raise ValueError("order must be 3 or 5")
    if tau < 0:
        raise ValueError("tau must be non-negative")
    d3, d5 = _odd_derivatives(hamiltonian, state)
    out = tau**3 / 6 * d3
    if order == 5:
        out += tau**5 / 120 * d5
    return float(out)


def tau0_threshold(hamiltonian, state) -> float:
    """Time at which the fifth-order term of the phase equals the third-order one."""
    d3, d5 = _odd_derivatives(hamiltonian, state)
    scale = np.linalg.norm(hamiltonian, 2) ** 5
    if abs(d5) <= 1e-12 * scale or abs(d3) <= 1e-12 * scale:
        raise ThresholdUndefinedError("a vanishing derivative leaves the threshold undefined")
    if np.sign(d3) != np.sign(d5):
        raise ThresholdUndefinedError("third and fifth derivatives have opposite signs")
    return float(np.sqrt((d3 / 6) / (d5 / 120)))


def sample_hamiltonian(n: int, seed: int, index: int) -> np.ndarray:
    """Normalised GUE draw, a pure function of ``(seed, index)``."""
    rng = np.random.default_rng([seed, index])
    return normalize_hamiltonian(random_hermitian(n, rng))


@dataclass
class SearchResult:
    best_hamiltonian: np.ndarray
    best_phase: float
    best_index: int
    phases: np.ndarray
    seed: int
    samples: int
    hamiltonians: np.ndarray = field(repr=False, default=None)


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get("BRACHISTO_THREADS", "1")))
    except ValueError:
        return 1


def random_search(state, tau: float, samples: int, seed: int, workers: int | None = None,
                  chunk: int = 2048) -> SearchResult:
    """Best of ``samples`` random constrained hamiltonians for the phase at ``tau``.

    Sample ``k`` depends only on ``(seed, k)`` and chunks are fixed by
    ``chunk``, so the result does not depend on ``workers`` (default from
    ``BRACHISTO_THREADS``).
    """
    if samples < 1:
        raise ValueError("samples must be at least 1")
    psi = _as_ket(state)
    n = len(psi)
    hs = np.array([sample_hamiltonian(n, seed, k) for k in range(samples)])
    chunks = [slice(i, min(i + chunk, samples)) for i in range(0, samples, chunk)]
    workers = workers or _default_workers()

    def run(sl):
        return schrodinger_phase_batch(hs[sl], psi, tau)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(sl) for sl in chunks]
    phases = np.concatenate(parts)
    best = int(np.nanargmax(phases))
    return SearchResult(hs[best], float(phases[best]), best, phases, seed, samples, hs)
