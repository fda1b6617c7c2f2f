"""Named states and hamiltonians, plus loaders for user-supplied files."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .brachistophase import (
    brachistophase_hamiltonian,
    max_accel_hamiltonian,
    sample_hamiltonian,
    transport_unitary,
)
from .core import check_hermitian, normalize

STATE_PRESETS = ("coherent", "ghz", "tetrahedral")
HAMILTONIAN_PRESETS = ("brachistophase", "max-accel", "geodesic", "random")

GHZ = np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2)
TETRAHEDRAL = np.array([1, 0, 0, np.sqrt(2), 0], dtype=complex) / np.sqrt(3)


class PresetError(ValueError):
    """Unknown preset, inconsistent spin or unreadable file."""


def parse_spin(text) -> Fraction:
    try:
        s = Fraction(str(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise PresetError(f"cannot parse spin {text!r}") from exc
    if s <= 0 or (2 * s).denominator != 1:
        raise PresetError(f"spin must be a positive half-integer, got {text!r}")
    return s


def coherent_state(spin) -> np.ndarray:
    dim = int(2 * Fraction(spin)) + 1
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1.0
    return psi


def _entry(item) -> complex:
    if isinstance(item, list):
        if len(item) != 2:
            raise ValueError(f"complex entry must be [re, im], got {item!r}")
        return complex(float(item[0]), float(item[1]))
    if isinstance(item, str):
        return complex(item.replace(" ", "").replace("i", "j"))
    return complex(item)


def load_array(path, ndim: int) -> np.ndarray:
    """Read a complex vector (``ndim=1``) or matrix (``ndim=2``).

    JSON files hold either ``{"re": ..., "im": ...}`` or a (nested) list whose
    entries are numbers, strings such as ``"1-2j"`` or ``[re, im]`` pairs.
    Other files are whitespace-separated complex literals: a vector may be one
    row or one column, a matrix is one row per line.
    """
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise PresetError(f"cannot read {path}: {exc}") from exc
    try:
        if p.suffix == ".json":
            data = json.loads(text)
            if isinstance(data, dict):
                arr = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data.get("im", 0.0), dtype=float)
            elif ndim == 1:
                arr = np.array([_entry(v) for v in data], dtype=complex)
            else:
                arr = np.array([[_entry(v) for v in row] for row in data], dtype=complex)
        else:
            rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
            arr = np.array([[_entry(v) for v in r] for r in rows], dtype=complex)
            if ndim == 1 and arr.ndim == 2 and 1 in arr.shape:
                arr = arr.ravel()
    except (ValueError, KeyError, TypeError) as exc:
        raise PresetError(f"cannot parse {path}: {exc}") from exc
    if arr.ndim != ndim:
        raise PresetError(f"{path} holds a {arr.ndim}-d array, expected {ndim}-d")
    return arr


def resolve_state(name: str, spin=None) -> np.ndarray:
    """Ket for a preset name or an amplitude file (normalised on load)."""
    if name == "coherent":
        return coherent_state(spin if spin is not None else Fraction(1, 2))
    if name in ("ghz", "tetrahedral"):
        psi = GHZ if name == "ghz" else TETRAHEDRAL
        if spin is not None and int(2 * Fraction(spin)) + 1 != len(psi):
            want = Fraction(len(psi) - 1, 2)
            raise PresetError(f"{name} preset has spin {want}, not {spin}")
        return psi.copy()
    if Path(name).exists():
        psi = load_array(name, 1)
        if spin is not None and int(2 * Fraction(spin)) + 1 != len(psi):
            raise PresetError(f"state file has dimension {len(psi)}, inconsistent with spin {spin}")
        return normalize(psi)
    raise PresetError(f"unknown state {name!r}; presets are {', '.join(STATE_PRESETS)} or a file path")


def resolve_hamiltonian(name: str, state: np.ndarray, sign: int = 1, seed: int = 0) -> np.ndarray:
    """Hamiltonian for a preset name (relative to ``state``) or a matrix file."""
    n = len(state)
    if name == "brachistophase":
        return brachistophase_hamiltonian(state, sign).H_transported
    if name == "max-accel":
        return max_accel_hamiltonian(state, sign).H_transported
    if name == "geodesic":
        block = np.zeros((n, n), dtype=complex)
        block[0, 1] = block[1, 0] = 1.0
        u = transport_unitary(state)
        return u @ block @ u.conj().T
    if name == "random":
        return sample_hamiltonian(n, seed, 0)
    if Path(name).exists():
        h = load_array(name, 2)
        if h.shape != (n, n):
            raise PresetError(f"hamiltonian file has shape {h.shape}, state dimension is {n}")
        try:
            return check_hermitian(h)
        except ValueError as exc:
            raise PresetError(str(exc)) from exc
    raise PresetError(
        f"unknown hamiltonian {name!r}; presets are {', '.join(HAMILTONIAN_PRESETS)} or a file path"
    )


__all__ = [
    "GHZ",
    "HAMILTONIAN_PRESETS",
    "STATE_PRESETS",
    "TETRAHEDRAL",
    "PresetError",
    "coherent_state",
    "load_array",
    "parse_spin",
    "resolve_hamiltonian",
    "resolve_state",
]
