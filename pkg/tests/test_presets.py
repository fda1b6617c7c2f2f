import json
from fractions import Fraction

import numpy as np
import pytest

from brachisto.presets import (
    GHZ,
    PresetError,
    load_array,
    parse_spin,
    resolve_hamiltonian,
    resolve_state,
)


def test_spin_parsing():
    assert parse_spin("3/2") == Fraction(3, 2)
    assert parse_spin(2) == 2
    assert parse_spin("2.5") == Fraction(5, 2)
    for bad in ("0", "-1", "1/3", "x"):
        with pytest.raises(PresetError):
            parse_spin(bad)


def test_state_presets():
    np.testing.assert_array_equal(resolve_state("coherent", Fraction(1)), [1, 0, 0])
    assert len(resolve_state("coherent")) == 2
    np.testing.assert_array_equal(resolve_state("ghz", Fraction(3, 2)), GHZ)
    with pytest.raises(PresetError):
        resolve_state("tetrahedral", Fraction(1))
    with pytest.raises(PresetError):
        resolve_state("dicke")


def test_json_vector_formats(tmp_path):
    want = np.array([1, -2j, 0.5 + 0.5j])
    variants = [
        {"re": want.real.tolist(), "im": want.imag.tolist()},
        [1, "-2i", "0.5+0.5j"],
        [[1, 0], [0, -2], [0.5, 0.5]],
    ]
    for k, data in enumerate(variants):
        path = tmp_path / f"v{k}.json"
        path.write_text(json.dumps(data))
        np.testing.assert_allclose(load_array(path, 1), want)


def test_text_formats(tmp_path):
    col = tmp_path / "col.txt"
    col.write_text("# amplitudes\n1\n1j\n")
    np.testing.assert_allclose(load_array(col, 1), [1, 1j])
    mat = tmp_path / "m.txt"
    mat.write_text("0 1-1j\n1+1j 0\n")
    np.testing.assert_allclose(load_array(mat, 2), [[0, 1 - 1j], [1 + 1j, 0]])
    with pytest.raises(PresetError):
        load_array(mat, 1)
    with pytest.raises(PresetError):
        load_array(tmp_path / "missing.txt", 1)


def test_state_file_is_normalised(tmp_path):
    path = tmp_path / "psi.txt"
    path.write_text("3 4j")
    np.testing.assert_allclose(resolve_state(str(path)), [0.6, 0.8j])
    with pytest.raises(PresetError):
        resolve_state(str(path), Fraction(1))


def test_hamiltonian_presets_and_files(tmp_path):
    psi = resolve_state("ghz")
    for name in ("brachistophase", "max-accel", "geodesic", "random"):
        h = resolve_hamiltonian(name, psi)
        np.testing.assert_allclose(h, h.conj().T, atol=1e-14)
    np.testing.assert_array_equal(resolve_hamiltonian("random", psi, seed=5), resolve_hamiltonian("random", psi, seed=5))
    bad = tmp_path / "h.txt"
    bad.write_text("0 1\n0 0\n")
    with pytest.raises(PresetError):
        resolve_hamiltonian(str(bad), np.array([1.0, 0.0]))
    with pytest.raises(PresetError):
        resolve_hamiltonian(str(bad), psi)
