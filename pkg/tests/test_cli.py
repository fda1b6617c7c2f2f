import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from brachisto.brachistophase import brachistophase_hamiltonian
from brachisto.cli import EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERIC, EXIT_OK, main, parse_grid, ConfigError
from brachisto.curves import SchrodingerCurve
from brachisto.majorana import constellation, sphere_angles
from brachisto.phase import phase_on_grid
from brachisto.presets import GHZ

from conftest import same_ray


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    assert code == EXIT_OK
    return json.loads(out)


def matrix(d):
    return np.asarray(d["re"]) + 1j * np.asarray(d["im"])


def test_grid_parsing():
    np.testing.assert_allclose(parse_grid("0:1:5"), [0, 0.25, 0.5, 0.75, 1])
    np.testing.assert_allclose(parse_grid("0, 0.5,2"), [0, 0.5, 2])
    for bad in ("", "0:1:0", "1:0:3", "a,b", "0,1,1"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def test_phase_json_matches_library(capsys):
    doc = run_json(capsys, "phase", "-s", "3/2", "--grid", "0:3.2:9")
    assert doc["format"] == 1
    assert doc["config"]["spin"] == "3/2"
    psi = np.eye(4)[0]
    h = brachistophase_hamiltonian(psi).H_transported
    want, _ = phase_on_grid(SchrodingerCurve(h, psi), parse_grid("0:3.2:9"), steps=256)
    cols = doc["columns"]
    np.testing.assert_allclose(cols["phase_exact"], want, atol=1e-12)
    d3 = 4 * np.sqrt(3) / 9
    np.testing.assert_allclose(cols["phase_taylor3"], d3 * np.asarray(cols["t"]) ** 3 / 6, atol=1e-15)
    orders = [row["order"] for row in doc["derivatives"]]
    assert orders == [3, 4, 5, 6]
    assert abs(doc["derivatives"][0]["covariant"] - d3) < 1e-12
    # exact and third-order curves agree early and separate late
    exact, t3 = np.asarray(cols["phase_exact"]), np.asarray(cols["phase_taylor3"])
    assert abs(exact[1] - t3[1]) < 0.05 * exact[1]
    assert abs(exact[-1] - t3[-1]) > 0.5


def test_phase_csv_format(capsys):
    code, out, _ = run(capsys, "phase", "-s", "1", "--grid", "0:1:3", "--format", "csv")
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["t", "phase_exact", "phase_taylor3", "phase_taylor5"]
    assert len(rows) == 4
    for value in rows[2][1:]:
        assert float(value) == float(format(float(value), ".17g"))
        assert "," not in value


def test_geodesic_preset_gives_zero_phase(capsys):
    doc = run_json(capsys, "phase", "-s", "2", "--hamiltonian", "geodesic", "--grid", "0:1.5:7")
    assert np.max(np.abs(doc["columns"]["phase_exact"])) < 1e-10


def test_runs_are_byte_identical(capsys):
    argv = ("phase", "--state", "ghz", "--grid", "0:3.2:17")
    first, second = run(capsys, *argv)[1], run(capsys, *argv)[1]
    assert first == second
    argv = ("optimize", "-s", "1", "--samples", "64")
    a, b = json.loads(run(capsys, *argv)[1]), json.loads(run(capsys, *argv)[1])
    a.pop("timing"), b.pop("timing")
    assert a == b


def test_out_file(capsys, tmp_path):
    path = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "phase", "-s", "1/2", "--grid", "0:1:3", "--format", "csv", "--out", str(path))
    assert code == EXIT_OK and out == ""
    assert path.read_text().startswith("t,phase_exact")


def test_optimize_report(capsys):
    doc = run_json(capsys, "optimize", "-s", "1/2", "--samples", "200", "--seed", "3")
    bra = doc["brachistophase"]
    assert abs(bra["objective"] - 4 * np.sqrt(3) / 9) < 1e-12
    assert abs(bra["tau0"] - np.sqrt(5)) < 1e-12
    search = doc["random_search"]
    assert search["samples"] == 200 and search["seed"] == 3
    assert search["best_phase"] <= 0.0168885  # exhaustive qubit optimum at tau = 0.5
    assert abs(doc["max_accel"]["objective"] - 1) < 1e-12
    assert doc["timing"]["wall_seconds"] >= 0


def test_sign_flips_canonical_block(capsys):
    plus = matrix(run_json(capsys, "optimize", "-s", "1/2", "--samples", "16")["brachistophase"]["H_canonical"])
    minus = matrix(run_json(capsys, "optimize", "-s", "1/2", "--samples", "16", "--sign", "-")["brachistophase"]["H_canonical"])
    r3 = np.sqrt(3)
    np.testing.assert_allclose(plus, [[-1 / r3, np.sqrt(2) / r3], [np.sqrt(2) / r3, 1 / r3]], atol=1e-15)
    np.testing.assert_allclose(minus[[0, 1], [0, 1]], -plus[[0, 1], [0, 1]], atol=1e-15)
    np.testing.assert_allclose(minus[0, 1], plus[0, 1], atol=1e-15)


def test_constellation_coherent_spin_one(capsys):
    doc = run_json(capsys, "constellation", "-s", "1", "--grid", "0:3:31")
    tracks = np.asarray(doc["tracks"])
    assert tracks.shape[0] == 2
    moved = np.max(np.linalg.norm(tracks - tracks[:, :1], axis=-1), axis=1)
    assert sorted(moved > 1e-6) == [False, True]
    audit = doc["falling_star_audit"]
    assert abs(audit["tilt"] - np.arctan(2)) < 1e-10
    assert audit["circle_residual"] < 1e-12


def test_constellation_ghz_frames(capsys):
    grid = "0,0.5,1,1.5,2,3.2"
    doc = run_json(capsys, "constellation", "--state", "ghz", "--grid", grid)
    assert doc["falling_star_audit"] is None
    tracks = np.asarray(doc["tracks"])
    h = brachistophase_hamiltonian(GHZ).H_transported
    w, u = np.linalg.eigh(h)
    for t, idx in zip(parse_grid(grid), doc["grid_nodes"]):
        assert doc["times"][idx] == t
        psi = u @ (np.exp(-1j * t * w) * (u.conj().T @ GHZ))
        d = sphere_angles(tracks[:, idx], constellation(psi).stars)
        assert np.max(np.min(d, axis=1)) < 1e-7


def test_constellation_csv(capsys):
    code, out, _ = run(capsys, "constellation", "-s", "1/2", "--grid", "0:1:3", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert code == EXIT_OK and rows[0] == ["t", "star", "x", "y", "z"]


def test_verify_default_and_sweep(capsys):
    assert run_json(capsys, "verify")["passed"] is True
    doc = run_json(capsys, "verify", "--dim", "6", "--seeds", "5")
    assert {c["seed"] for c in doc["checks"]} == set(range(5))
    assert all(c["residual"] <= c["tol"] for c in doc["checks"])
    code, out, _ = run(capsys, "verify", "--format", "csv")
    assert out.splitlines()[0] == "dim,seed,name,residual,tol,passed"


def test_verify_detects_injected_fault(capsys):
    code, out, _ = run(capsys, "verify", "--inject-fault", "christoffel")
    assert code == EXIT_INVARIANT
    failed = [c["name"] for c in json.loads(out)["checks"] if not c["passed"]]
    assert failed == ["geometry.curvature_fd"]


@pytest.mark.parametrize(
    "argv",
    [
        ("constellation", "--grid", ""),
        ("phase", "--state", "nonsense"),
        ("phase", "-s", "0.3"),
        ("phase", "-s", "1", "--state", "ghz"),
        ("phase", "--steps", "4"),
        ("phase", "--hamiltonian", "nowhere.json"),
        ("phase", "--order", "4"),
        ("frobnicate",),
    ],
)
def test_configuration_errors(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_CONFIG


def test_numerical_breakdown(capsys, tmp_path):
    # a hamiltonian that carries e0 exactly to the orthogonal state at t = pi / 2
    path = tmp_path / "h.json"
    path.write_text(json.dumps([[0, 1], [1, 0]]))
    code, out, err = run(capsys, "phase", "-s", "1/2", "--hamiltonian", str(path), "--grid", f"0,1,{np.pi / 2!r}")
    assert code == EXIT_NUMERIC
    doc = json.loads(out)
    assert doc["flagged_nodes"] == [2]
    assert doc["columns"]["phase_exact"][2] is None


def test_state_and_hamiltonian_files(capsys, tmp_path):
    state = tmp_path / "psi.txt"
    state.write_text("1 0 0 -1\n")
    ham = tmp_path / "h.json"
    h = brachistophase_hamiltonian(GHZ).H_transported
    ham.write_text(json.dumps({"re": h.real.tolist(), "im": h.imag.tolist()}))
    from_files = run_json(capsys, "phase", "--state", str(state), "--hamiltonian", str(ham), "--grid", "0:1:5")
    preset = run_json(capsys, "phase", "--state", "ghz", "--grid", "0:1:5")
    assert same_ray(matrix(from_files["state"]), GHZ) < 1e-15
    np.testing.assert_allclose(from_files["columns"]["phase_exact"], preset["columns"]["phase_exact"], atol=1e-13)


def test_console_script_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "brachisto.cli", "phase", "-s", "1/2", "--grid", "0:1:2", "--format", "csv"],
        capture_output=True, text=True, check=True,
    ).stdout
    assert out.startswith("t,phase_exact")
