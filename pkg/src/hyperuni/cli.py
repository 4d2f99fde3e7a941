"""Command-line front end.

Three subcommands: ``generate`` writes point-set families in the text
format, ``analyze`` runs per-set diagnostics (variance profile, worst-case
error, discrepancy, invariance-identity residual), ``classify`` runs the
three-regime hyperuniformity classifiers over a family of sets.  Every
report embeds the fully resolved configuration (seeds included), so any run
can be reproduced bit-for-bit from its own output via ``--config``.

Exit codes: 0 success, 2 configuration or input error, 3 optimizer
convergence flagged (outputs still written), 4 point-file parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import energy, structure, variance
from .pointset import (
    OptimizerOptions,
    PointSet,
    PointSetFormatError,
    fibonacci_sphere,
    load_pointset,
    maximize_distance_sum,
    random_uniform,
    save_pointset,
)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_PARSE = 4


class ConfigError(Exception):
    pass


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_json_atomic(payload: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv_atomic(rows: list[list], header: list[str], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Configuration: defaults < config file < flags.


def read_config_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def parse_grid(spec: str) -> np.ndarray:
    """Parse 'a:b:steps' into an inclusive linspace grid."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"grid must look like 'a:b:steps', got {spec!r}")
    try:
        a, b, steps = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f"bad grid {spec!r}: {exc}") from exc
    if steps < 1 or b < a:
        raise ConfigError(f"bad grid {spec!r}")
    return np.linspace(a, b, steps)


def parse_sizes(spec: str) -> list[int]:
    try:
        sizes = [int(tok) for tok in spec.replace(" ", "").split(",") if tok]
    except ValueError as exc:
        raise ConfigError(f"bad sizes {spec!r}: {exc}") from exc
    if not sizes or any(s < 1 for s in sizes):
        raise ConfigError(f"bad sizes {spec!r}")
    return sizes


_OPTION_TYPES = {
    "d": int,
    "sizes": str,
    "seed": int,
    "family": str,
    "phi_grid": str,
    "t_grid": str,
    "s": float,
    "tau": float,
    "tol": float,
    "centers": int,
    "out": str,
    "format": str,
    "config": str,
    "method": str,
    "check": str,
    "inputs": str,
    "restarts": int,
    "max_iterations": int,
    "max_degree": int,
    "w_rule": str,
    "average_seeds": int,
}

_DEFAULTS = {
    "d": 2,
    "seed": 0,
    "family": "random",
    "phi_grid": "0.3:1.4:8",
    "t_grid": "1:16:6",
    "s": 1.5,
    "tau": 1.5,
    "tol": None,
    "centers": 20000,
    "out": "hyperuni-out",
    "format": "both",
    "method": "spectral",
    "check": None,
    "restarts": 4,
    "max_iterations": 2000,
    "max_degree": None,
    "w_rule": "log",
    "average_seeds": 0,
    "sizes": None,
    "inputs": None,
}


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults, config-file values and flags (flags win)."""
    merged = dict(_DEFAULTS)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        raw = read_config_file(Path(cfg_path))
        for key, text in raw.items():
            if key == "command":
                continue
            if key not in _OPTION_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            caster = _OPTION_TYPES[key]
            try:
                merged[key] = caster(text) if text != "None" else None
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    for key in _OPTION_TYPES:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    return merged


def config_for_report(command: str, cfg: dict, keys: list[str]) -> dict:
    out = {"command": command}
    for key in keys:
        out[key] = cfg[key]
    return out


def write_config_file(config: dict, path: Path) -> None:
    lines = [f"{k} = {_fmt(v)}" for k, v in sorted(config.items()) if v is not None]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# generate


def cmd_generate(cfg: dict) -> int:
    family = cfg["family"]
    if family not in ("random", "fibonacci", "maxdist"):
        raise ConfigError(f"unknown family {cfg['family']!r}")
    if not cfg["sizes"]:
        raise ConfigError("generate requires --sizes")
    sizes = parse_sizes(cfg["sizes"])
    d = int(cfg["d"])
    if d < 1:
        raise ConfigError("d must be >= 1")
    if family == "fibonacci" and d != 2:
        raise ConfigError("fibonacci family is defined for d = 2 only")
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)

    all_converged = True
    for n in sizes:
        if family == "random":
            X = random_uniform(d, n, seed=int(cfg["seed"]))
        elif family == "fibonacci":
            X = fibonacci_sphere(n)
        else:
            opts = OptimizerOptions(
                max_iterations=int(cfg["max_iterations"]),
                restarts=int(cfg["restarts"]),
                seed=int(cfg["seed"]),
            )
            try:
                X = maximize_distance_sum(d, n, float(cfg["tau"]), opts)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            if not X.provenance.get("converged", False):
                all_converged = False
        stem = f"{family}_d{d}_n{n:06d}"
        save_pointset(X, out_dir / f"{stem}.txt")
        sidecar = {
            "schema_version": SCHEMA_VERSION,
            "kind": "pointset",
            "config": config_for_report(
                "generate",
                cfg,
                ["family", "d", "seed", "sizes", "tau", "restarts", "max_iterations", "out"],
            ),
            "provenance": X.provenance,
        }
        write_json_atomic(sidecar, out_dir / f"{stem}.json")
        print(f"wrote {out_dir / (stem + '.txt')}")
    if not all_converged:
        print("warning: optimizer did not converge for at least one size", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze


def _collect_inputs(cfg: dict) -> list[Path]:
    if not cfg["inputs"]:
        raise ConfigError("no input files given")
    paths: list[Path] = []
    for token in str(cfg["inputs"]).split(","):
        token = token.strip()
        if not token:
            continue
        p = Path(token)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.txt")))
        elif p.exists():
            paths.append(p)
        else:
            raise ConfigError(f"input {token!r} does not exist")
    if not paths:
        raise ConfigError("no input point-set files found")
    return paths


def cmd_analyze(cfg: dict) -> int:
    paths = _collect_inputs(cfg)
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    angles = parse_grid(str(cfg["phi_grid"]))
    if np.any((angles <= 0) | (angles >= math.pi)):
        raise ConfigError("phi grid must lie inside (0, pi)")
    method = str(cfg["method"])
    if method not in ("spectral", "monte-carlo"):
        raise ConfigError(f"unknown method {method!r}")
    fmt = str(cfg["format"])
    if fmt not in ("json", "csv", "both"):
        raise ConfigError(f"unknown format {fmt!r}")

    report_keys = [
        "d", "phi_grid", "s", "tol", "centers", "method", "check", "seed",
        "max_degree", "inputs", "out", "format",
    ]
    for path in paths:
        X = load_pointset(path)
        max_degree = cfg["max_degree"]
        if method == "spectral" and max_degree is None and cfg["tol"] is None:
            # default to a scale-aware fixed degree so large sets stay tractable
            max_degree = max(64, 6 * int(math.isqrt(X.n)) + 16)
        prof = variance.variance_profile(
            X,
            angles,
            method=method,
            tol=cfg["tol"],
            max_degree=max_degree,
            num_centers=int(cfg["centers"]),
            seed=int(cfg["seed"]),
        )
        spec = energy.sobolev_spec(X.d, float(cfg["s"]))
        wce_series = energy.wce_squared(X, spec, max_degree=max_degree or 400)
        wce_closed = energy.wce_distance_kernel(X)
        disc = energy.l2_discrepancy(X, max_degree=max_degree or 400)
        results = {
            "n": X.n,
            "d": X.d,
            "profile": prof.to_dict(),
            "wce": wce_series.to_dict(),
            "wce_distance_kernel": wce_closed.to_dict(),
            "l2_discrepancy": disc,
        }
        if cfg["check"] == "stolarsky":
            res = energy.stolarsky_residual(X, route="series")
            results["stolarsky"] = {
                "residual": res.residual,
                "tail_bound": res.tail_bound,
            }
        report = {
            "schema_version": SCHEMA_VERSION,
            "kind": "analyze",
            "input": str(path),
            "config": config_for_report("analyze", cfg, report_keys),
            "results": results,
        }
        stem = path.stem
        if fmt in ("json", "both"):
            write_json_atomic(report, out_dir / f"{stem}.report.json")
        if fmt in ("csv", "both"):
            prof.write_csv(out_dir / f"{stem}.profile.csv")
        print(f"analyzed {path} (n={X.n}, d={X.d})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# classify


def cmd_classify(cfg: dict) -> int:
    paths = _collect_inputs(cfg)
    sets = [load_pointset(p) for p in paths]
    sets.sort(key=lambda X: X.n)
    dims = {X.d for X in sets}
    if len(dims) != 1:
        raise ConfigError(f"mixed sphere dimensions in inputs: {sorted(dims)}")
    if len(sets) < 4:
        raise ConfigError("classification needs at least 4 point sets")
    sizes = [X.n for X in sets]
    if len(set(sizes)) != len(sizes):
        raise ConfigError("point-set sizes must be strictly increasing")
    seq = structure.PointSetSequence(tuple(sets), label=str(cfg["family"]))

    phi_grid = parse_grid(str(cfg["phi_grid"]))
    t_grid = parse_grid(str(cfg["t_grid"]))
    if np.any((phi_grid <= 0) | (phi_grid >= math.pi / 2)):
        raise ConfigError("classification phi grid must lie inside (0, pi/2)")

    n_avg = int(cfg["average_seeds"])
    if n_avg > 1:
        evaluator = structure.seed_averaged_iid_evaluator(
            num_seeds=n_avg, num_centers=int(cfg["centers"]), base_seed=int(cfg["seed"])
        )
    else:
        evaluator = structure.mc_variance_evaluator(
            num_centers=int(cfg["centers"]), base_seed=int(cfg["seed"])
        )
    w_rules = {
        "log": (math.log, "log(N)"),
        "pow-0.25": (lambda n: n**0.25, "N^0.25"),
    }
    if str(cfg["w_rule"]) not in w_rules:
        raise ConfigError(f"unknown w_rule {cfg['w_rule']!r}")
    w_rule, w_label = w_rules[str(cfg["w_rule"])]

    report_keys = [
        "d", "phi_grid", "t_grid", "centers", "seed", "w_rule", "average_seeds",
        "inputs", "out", "format", "family",
    ]
    config = config_for_report("classify", cfg, report_keys)

    try:
        large = structure.classify_large_caps(seq, phi_grid, evaluator=evaluator)
        small = structure.classify_small_caps(seq, w_rule, evaluator=evaluator, w_label=w_label)
        threshold = structure.classify_threshold(seq, t_grid, evaluator=evaluator)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    fmt = str(cfg["format"])
    reports = {"large": large, "small": small, "threshold": threshold}
    for name, rep in reports.items():
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": "classify",
            "regime": name,
            "config": config,
            "results": rep.to_dict(),
        }
        if fmt in ("json", "both"):
            write_json_atomic(payload, out_dir / f"classify_{name}.json")
        if fmt in ("csv", "both"):
            _write_regime_csv(rep, out_dir / f"plot_{name}.csv")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "kind": "classify-summary",
        "config": config,
        "results": {
            "sizes": sizes,
            "verdicts": {name: rep.verdict for name, rep in reports.items()},
            "exponents": {name: rep.exponents for name, rep in reports.items()},
        },
    }
    if fmt in ("json", "both"):
        write_json_atomic(summary, out_dir / "classify_summary.json")
    for name, rep in reports.items():
        print(f"{name}: {rep.verdict}")
    return EXIT_OK


def _write_regime_csv(rep, path: Path) -> None:
    if not rep.table:
        write_csv_atomic([], ["empty"], path)
        return
    header = list(rep.table[0].keys())
    rows = [[row[k] for k in header] for row in rep.table]
    write_csv_atomic(rows, header, path)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperuni",
        description="Hyperuniformity diagnostics for point sets on the d-sphere.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="flat key = value config file; flags override it")
        p.add_argument("--d", type=int, help="sphere dimension d")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--out", help="output directory")
        p.add_argument("--format", choices=["json", "csv", "both"], help="report format")

    g = sub.add_parser("generate", help="write point-set families to disk")
    add_common(g)
    g.add_argument("--family", choices=["random", "fibonacci", "maxdist"])
    g.add_argument("--sizes", help="comma-separated point counts")
    g.add_argument("--tau", type=float, help="distance-sum exponent parameter")
    g.add_argument("--restarts", type=int, help="optimizer restarts (maxdist)")
    g.add_argument("--max-iterations", dest="max_iterations", type=int)

    a = sub.add_parser("analyze", help="per-set diagnostics")
    add_common(a)
    a.add_argument("--inputs", help="comma-separated point-set files or directories")
    a.add_argument("--phi-grid", dest="phi_grid", help="cap angles a:b:steps")
    a.add_argument("--s", type=float, help="Sobolev smoothness for the worst-case error")
    a.add_argument("--tol", type=float, help="certified spectral tolerance")
    a.add_argument("--max-degree", dest="max_degree", type=int, help="fixed series degree")
    a.add_argument("--centers", type=int, help="Monte Carlo cap centers")
    a.add_argument("--method", choices=["spectral", "monte-carlo"])
    a.add_argument("--check", choices=["stolarsky"], help="extra identity checks")

    c = sub.add_parser("classify", help="three-regime hyperuniformity classification")
    add_common(c)
    c.add_argument("--inputs", help="comma-separated point-set files or directories")
    c.add_argument("--phi-grid", dest="phi_grid", help="large-cap angles a:b:steps")
    c.add_argument("--t-grid", dest="t_grid", help="threshold parameters a:b:steps")
    c.add_argument("--centers", type=int, help="Monte Carlo cap centers")
    c.add_argument("--w-rule", dest="w_rule", choices=["log", "pow-0.25"])
    c.add_argument("--family", help="family label recorded in reports")
    c.add_argument(
        "--average-seeds",
        dest="average_seeds",
        type=int,
        help="average the variance over this many fresh uniform sets per size "
        "(measured i.i.d. baseline)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "classify":
            return cmd_classify(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except PointSetFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
