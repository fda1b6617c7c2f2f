"""Linear-algebra primitives shared by the rest of the package.

States are unit kets in C^N (N >= 2), pure states are rank-one projectors,
and Hamiltonians are hermitian N x N matrices. Superoperators act on the
row-major vectorisation ``vec(A) = A.reshape(-1)``, so that
``vec(A @ X @ B) == kron(A, B.T) @ vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-12
PROJECTOR_TOL = 1e-10


class NotHermitianError(ValueError):
    """Raised when an operator fails the hermiticity check."""


class InvalidStateError(ValueError):
    """Raised for kets or projectors that are not valid pure states."""


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def check_hermitian(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Return ``h`` as a complex array, raising if ``||h - h^dag|| > tol``."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {h.shape}")
    if h.shape[0] < 2:
        raise NotHermitianError("dimension must be at least 2")
    defect = np.linalg.norm(h - dagger(h))
    if defect > tol:
        raise NotHermitianError(f"hermiticity defect {defect:.3e} exceeds {tol:.1e}")
    return 0.5 * (h + dagger(h))


def as_state(psi, tol: float = NORM_TOL) -> np.ndarray:
    """Validate a unit ket of dimension >= 2."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.shape[0] < 2:
        raise InvalidStateError(f"expected a ket of dimension >= 2, got shape {psi.shape}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise InvalidStateError(f"ket norm {norm!r} differs from 1 by more than {tol:.1e}")
    return psi


def normalize(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise InvalidStateError("cannot normalise the zero vector")
    return psi / norm


def projector(psi) -> np.ndarray:
    """Rank-one projector onto the ray of ``psi`` (normalisation is applied)."""
    psi = normalize(psi)
    return np.outer(psi, psi.conj())


def check_projector(rho, tol: float = PROJECTOR_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] < 2:
        raise InvalidStateError(f"expected a square matrix of size >= 2, got {rho.shape}")
    defects = (
        np.linalg.norm(rho - dagger(rho)),
        np.linalg.norm(rho @ rho - rho),
        abs(np.trace(rho) - 1.0),
    )
    if max(defects) > tol:
        raise InvalidStateError(
            "not a rank-one projector (hermiticity, idempotency, trace defects "
            + ", ".join(f"{d:.2e}" for d in defects) + ")"
        )
    return rho


def ket_from_projector(rho) -> np.ndarray:
    """Representative ket of a pure state.

    Uses ``rho e_j / ||rho e_j||`` with ``j`` the largest diagonal entry, which
    makes the ``j``-th component real and positive. When the first component
    is not negligible ``j = 0`` is preferred so that the representative agrees
    with the affine-chart convention.
    """
    rho = check_projector(rho)
    diag = rho.diagonal().real
    j = 0 if diag[0] > 1e-8 else int(np.argmax(diag))
    col = rho[:, j]
    return col / np.linalg.norm(col)


def canonical_phase(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate ``v`` so its first non-negligible component is real positive."""
    idx = np.flatnonzero(np.abs(v) > tol * max(np.abs(v).max(), 1.0))
    if idx.size == 0:
        return v
    c = v[idx[0]]
    return v * (abs(c) / c)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in descending order and matching unit eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)

    def evolution(self, t: float) -> np.ndarray:
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * t)) @ dagger(v)


def spectral_decompose(h, tol: float = 1e-10) -> SpectralDecomposition:
    """Sorted eigendecomposition of a hermitian matrix.

    Eigenvalues come out descending. Each eigenvector is phase-fixed so that
    its first non-negligible component is real positive; within a (numerically)
    degenerate eigenvalue the vectors are ordered lexicographically by the
    real then imaginary parts of their components.
    """
    h = check_hermitian(h)
    w, v = np.linalg.eigh(h)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    vecs = [canonical_phase(v[:, k]) for k in range(len(w))]

    def key(k):
        x = vecs[k]
        return tuple(np.round(np.concatenate([x.real, x.imag]), 12))

    order, start = [], 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and abs(w[stop] - w[start]) <= tol * max(1.0, abs(w[start])):
            stop += 1
        block = list(range(start, stop))
        if len(block) > 1:
            block.sort(key=key, reverse=True)
        order.extend(block)
        start = stop
    vecs = np.stack([vecs[k] for k in order], axis=1)
    return SpectralDecomposition(w[order], vecs)


def evolution_operator(h, t: float) -> np.ndarray:
    """``exp(-i t h)`` built from the spectral decomposition."""
    return spectral_decompose(h).evolution(t)


def evolve(h, t: float, psi) -> np.ndarray:
    return evolution_operator(h, t) @ np.asarray(psi, dtype=complex)


def vec(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).reshape(-1)


def unvec(x: np.ndarray, n: int | None = None) -> np.ndarray:
    x = np.asarray(x)
    if n is None:
        n = int(round(np.sqrt(x.size)))
    if n * n != x.size:
        raise ValueError(f"vector of length {x.size} is not a flattened square matrix")
    return x.reshape(n, n)


def sandwich_superop(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> a X b`` acting on row-major vectorisations."""
    return np.kron(a, b.T)


def adjoint_superop(a: np.ndarray) -> np.ndarray:
    """Matrix of ``X -> [a, X]``."""
    eye = np.eye(a.shape[0])
    return np.kron(a, eye) - np.kron(eye, a.T)


def projector_superop(rho: np.ndarray) -> np.ndarray:
    """Matrix of the tangent projection ``X -> rho X + X rho - 2 rho X rho``."""
    eye = np.eye(rho.shape[0])
    return np.kron(rho, eye) + np.kron(eye, rho.T) - 2 * np.kron(rho, rho.T)


def density_superop(rho: np.ndarray) -> np.ndarray:
    """``|vec rho><vec rho|``, which equals ``kron(rho, rho.T)`` for a pure state."""
    return np.kron(rho, rho.T)


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    """GUE draw: real N(0, 1) diagonal, complex off-diagonal with E|h_ij|^2 = 1/2."""
    diag = rng.normal(size=n)
    off = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) * 0.5
    h = np.triu(off, 1)
    return h + dagger(h) + np.diag(diag)


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    return normalize(rng.normal(size=n) + 1j * rng.normal(size=n))
