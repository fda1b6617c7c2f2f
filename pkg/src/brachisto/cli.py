"""``brachisto`` command line: phase traces, optimisation reports, star tracks, invariant audits.

Exit codes: 0 ok, 1 invariant failure, 2 configuration error, 3 numerical
breakdown. Output is JSON (``"format": 1``) or CSV with 17 significant digits;
every JSON file echoes the configuration that produced it.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from importlib.metadata import PackageNotFoundError, version

import numpy as np

from .brachistophase import (
    ThresholdUndefinedError,
    brachistophase_hamiltonian,
    max_accel_hamiltonian,
    random_search,
    taylor_phase,
    tau0_threshold,
)
from .curves import SchrodingerCurve, covariant_jet
from .majorana import falling_star_audit, spin_from_dim, trajectory
from .phase import (
    geometric_phase,
    phase_derivs_covariant,
    phase_derivs_vtilde,
    phase_on_grid,
    schrodinger_d3,
    vtilde_expansion,
)
from .presets import PresetError, parse_spin, resolve_hamiltonian, resolve_state
from .verify import FAULTS, run_suite

FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    """Invalid or inconsistent command-line configuration."""


@dataclass
class RunConfig:
    command: str
    spin: str | None = None
    state: str = "coherent"
    hamiltonian: str = "brachistophase"
    tau: float = 0.5
    grid: str = "0:3.2:33"
    steps: int = 256
    samples: int = 1000
    seed: int = 0
    order: int = 3
    sign: str = "+"
    out: str | None = None
    format: str = "json"
    dim: int = 3
    seeds: int = 1
    inject_fault: str | None = None

    def echo(self) -> dict:
        d = asdict(self)
        if self.command != "verify":
            for k in ("dim", "seeds", "inject_fault"):
                d.pop(k)
        elif d["inject_fault"] is None:
            d.pop("inject_fault")
        return d


def _package_version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:  # pragma: no cover - running from a source tree
        return "unknown"


def parse_grid(text: str) -> np.ndarray:
    """``start:end:nodes`` (inclusive linspace) or a comma-separated list of times."""
    text = (text or "").strip()
    if not text:
        raise ConfigError("empty time grid")
    parts = text.split(":")
    if ":" in text and len(parts) != 3:
        raise ConfigError(f"grid must be start:end:nodes, got {text!r}")
    try:
        if ":" in text:
            start, end, nodes = float(parts[0]), float(parts[1]), int(parts[2])
            grid = np.linspace(start, end, max(nodes, 0))
        else:
            grid = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}: {exc}") from exc
    if grid.size == 0:
        raise ConfigError("empty time grid")
    if not np.all(np.isfinite(grid)):
        raise ConfigError("grid contains non-finite times")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("grid times must be strictly increasing")
    return grid


def _sign(text: str) -> int:
    return {"+": 1, "-": -1}[text]


def _state(cfg: RunConfig) -> np.ndarray:
    spin = parse_spin(cfg.spin) if cfg.spin is not None else None
    psi = resolve_state(cfg.state, spin)
    cfg.spin = str(Fraction(len(psi) - 1, 2))  # echo the spin actually used
    return psi


def _matrix(a: np.ndarray) -> dict:
    return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}


def _clean(obj):
    """Replace non-finite floats by ``None`` and numpy scalars by Python ones."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _num(x) -> str:
    x = float(x)
    return format(x, ".17g") if math.isfinite(x) else "nan"


def _envelope(cfg: RunConfig, payload: dict, timing: dict | None = None) -> dict:
    doc = {"format": FORMAT_VERSION, "version": _package_version(), "config": cfg.echo(), **payload}
    if timing is not None:
        doc["timing"] = timing
    return _clean(doc)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _json(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


# commands return (text, exit code)


def cmd_phase(cfg: RunConfig) -> tuple[str, int]:
    grid = parse_grid(cfg.grid)
    psi = _state(cfg)
    h = resolve_hamiltonian(cfg.hamiltonian, psi, _sign(cfg.sign), cfg.seed)
    curve = SchrodingerCurve(h, psi)
    exact, used = phase_on_grid(curve, grid, steps=cfg.steps)
    cov = phase_derivs_covariant(covariant_jet(curve, 0.0))
    vt = phase_derivs_vtilde(vtilde_expansion(curve, 4))
    moment3 = schrodinger_d3(h, psi)
    d = {k: cov.get(k, vt.get(k)) for k in (3, 4, 5, 6)}
    taylor3 = d[3] * grid**3 / 6
    taylor5 = taylor3 + d[4] * grid**4 / 24 + d[5] * grid**5 / 120
    flagged = np.flatnonzero(~np.isfinite(exact)).tolist()
    code = EXIT_NUMERIC if flagged else EXIT_OK
    if cfg.format == "csv":
        rows = zip(grid, exact, taylor3, taylor5)
        return _csv(["t", "phase_exact", "phase_taylor3", "phase_taylor5"], rows), code
    table = [
        {"order": k, "covariant": cov.get(k), "vtilde": vt.get(k), "moments": moment3 if k == 3 else None}
        for k in (3, 4, 5, 6)
    ]
    payload = {
        "hamiltonian": _matrix(h),
        "state": _matrix(psi),
        "steps_used": used,
        "flagged_nodes": flagged,
        "derivatives": table,
        "columns": {
            "t": grid,
            "phase_exact": exact,
            "phase_taylor3": taylor3,
            "phase_taylor5": taylor5,
        },
    }
    return _json(_envelope(cfg, payload)), code


def cmd_optimize(cfg: RunConfig) -> tuple[str, int]:
    if cfg.tau < 0:
        raise ConfigError("tau must be non-negative")
    if cfg.samples < 1:
        raise ConfigError("samples must be at least 1")
    if cfg.order not in (3, 5):
        raise ConfigError("order must be 3 or 5")
    psi = _state(cfg)
    sign = _sign(cfg.sign)
    start = time.perf_counter()
    bra = brachistophase_hamiltonian(psi, sign)
    acc = max_accel_hamiltonian(psi, sign)
    try:
        tau0 = tau0_threshold(bra.H_transported, psi)
    except ThresholdUndefinedError:
        tau0 = None
    analytic_phase = geometric_phase(SchrodingerCurve(bra.H_transported, psi), cfg.tau).final
    search = random_search(psi, cfg.tau, cfg.samples, cfg.seed)
    elapsed = time.perf_counter() - start
    if cfg.format == "csv":
        return _csv(["index", "phase"], ((k, p) for k, p in enumerate(search.phases))), EXIT_OK
    payload = {
        "brachistophase": {
            "H_canonical": _matrix(bra.H_canonical),
            "H_transported": _matrix(bra.H_transported),
            "objective": bra.objective,
            "sign": bra.sign_choice,
            "tau0": tau0,
            "phase_at_tau": analytic_phase,
            "taylor_at_tau": taylor_phase(bra.H_transported, psi, cfg.tau, cfg.order),
        },
        "max_accel": {
            "H_canonical": _matrix(acc.H_canonical),
            "H_transported": _matrix(acc.H_transported),
            "objective": acc.objective,
            "sign": acc.sign_choice,
        },
        "random_search": {
            "best_H": _matrix(search.best_hamiltonian),
            "best_phase": search.best_phase,
            "best_index": search.best_index,
            "samples": search.samples,
            "seed": search.seed,
            "analytic_minus_best": analytic_phase - search.best_phase,
        },
    }
    return _json(_envelope(cfg, payload, {"wall_seconds": elapsed})), EXIT_OK


def _is_coherent(psi: np.ndarray) -> bool:
    return abs(abs(psi[0]) - 1) < 1e-12


def cmd_constellation(cfg: RunConfig) -> tuple[str, int]:
    grid = parse_grid(cfg.grid)
    psi = _state(cfg)
    sign = _sign(cfg.sign)
    h = resolve_hamiltonian(cfg.hamiltonian, psi, sign, cfg.seed)
    traj = trajectory(h, psi, grid)
    if cfg.format == "csv":
        rows = (
            (t, k, *xyz)
            for t, frame in zip(traj.times, traj.tracks)
            for k, xyz in enumerate(frame)
        )
        return _csv(["t", "star", "x", "y", "z"], rows), EXIT_OK
    audit = None
    if _is_coherent(psi) and cfg.hamiltonian == "brachistophase":
        s = spin_from_dim(len(psi))
        nodes = grid[np.abs(np.sin(grid)) > 1e-8]
        if len(nodes) >= 3:
            audit = {"hamiltonian": "brachistophase", **falling_star_audit(s, nodes, sign).as_dict()}
        else:
            audit = {"skipped": "fewer than three grid nodes away from the poles"}
    payload = {
        "hamiltonian": _matrix(h),
        "state": _matrix(psi),
        "times": traj.times,
        # bisection adds frames; these index the requested nodes
        "grid_nodes": np.searchsorted(traj.times, grid).tolist(),
        "tracks": [[frame[k] for frame in traj.tracks] for k in range(traj.tracks.shape[1])],
        "events": traj.events,
        "permutation": traj.permutation(),
        "falling_star_audit": audit,
    }
    return _json(_envelope(cfg, payload)), EXIT_OK


def cmd_verify(cfg: RunConfig) -> tuple[str, int]:
    if cfg.dim < 2:
        raise ConfigError("dimension must be at least 2")
    if cfg.seeds < 1:
        raise ConfigError("seeds must be at least 1")
    if cfg.inject_fault is not None and cfg.inject_fault not in FAULTS:
        raise ConfigError(f"unknown fault {cfg.inject_fault!r}")
    rows = []
    for seed in range(cfg.seed, cfg.seed + cfg.seeds):
        for r in run_suite(cfg.dim, seed, cfg.inject_fault):
            rows.append({"seed": seed, **r.as_dict()})
    ok = all(r["passed"] for r in rows)
    code = EXIT_OK if ok else EXIT_INVARIANT
    if cfg.format == "csv":
        body = ((cfg.dim, r["seed"], r["name"], r["residual"], r["tol"], r["passed"]) for r in rows)
        return _csv(["dim", "seed", "name", "residual", "tol", "passed"], body), code
    payload = {"passed": ok, "checks": rows}
    return _json(_envelope(cfg, payload)), code


COMMANDS = {
    "phase": cmd_phase,
    "optimize": cmd_optimize,
    "constellation": cmd_constellation,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spin", "-s", help="spin as an integer or fraction, e.g. 3/2")
    common.add_argument("--state", default="coherent", help="coherent, ghz, tetrahedral or an amplitude file")
    common.add_argument("--hamiltonian", default="brachistophase",
                        help="brachistophase, max-accel, geodesic, random or a matrix file")
    common.add_argument("--tau", type=float, default=0.5)
    common.add_argument("--grid", default="0:3.2:33", help="start:end:nodes or comma-separated times")
    common.add_argument("--steps", type=int, default=256, help="minimum RK4 steps over the grid span")
    common.add_argument("--samples", type=int, default=1000)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--order", type=int, choices=(3, 5), default=3)
    common.add_argument("--sign", choices=("+", "-"), default="+")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    parser = argparse.ArgumentParser(prog="brachisto", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=_package_version())
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("phase", parents=[common], help="integrated phase against its Taylor polynomials")
    sub.add_parser("optimize", parents=[common], help="analytic optima and a random-search audit")
    sub.add_parser("constellation", parents=[common], help="Majorana star tracks along the evolution")
    v = sub.add_parser("verify", parents=[common], help="run the invariant suite")
    v.add_argument("--dim", type=int, default=3)
    v.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds starting at --seed")
    v.add_argument("--inject-fault", choices=FAULTS, help=argparse.SUPPRESS)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    known = {k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__}
    cfg = RunConfig(**known)
    if cfg.spin is not None:
        try:
            cfg.spin = str(parse_spin(cfg.spin))
        except PresetError as exc:
            raise ConfigError(str(exc)) from exc
    if cfg.steps < 16:
        raise ConfigError("steps must be at least 16")
    return cfg


def run(cfg: RunConfig) -> tuple[str, int]:
    return COMMANDS[cfg.command](cfg)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        text, code = run(cfg)
    except (ConfigError, PresetError) as exc:
        print(f"brachisto: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"brachisto: numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if code == EXIT_NUMERIC:
        print("brachisto: phase undefined at some grid nodes", file=sys.stderr)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
