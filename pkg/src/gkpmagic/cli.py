"""Command-line front end: ``gkpmagic <command> [options]``.

Every option can also come from ``--config FILE`` (a JSON object whose keys
are the option names with dashes replaced by underscores); explicit flags win.
Relative output paths resolve against ``$GKPMAGIC_OUTPUT_DIR`` when it is set.

Exit codes: 0 success, 1 verification failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import (CELL, BlochMap, Outcome, bloch_lattice_sum, bloch_normalized, bloch_theta,
                   pdf)
from .gaussian import GaussianState, Lattice, parse_state, random_state, square_equivalent
from .magic import get_family, fidelity_map, success_curve, threshold_nbar

OUTPUT_ENV = "GKPMAGIC_OUTPUT_DIR"


class UsageError(Exception):
    """Validation failure; the message names the offending field."""


def _field(name, func, value):
    try:
        return func(value)
    except UsageError:
        raise
    except (ValueError, TypeError, KeyError, json.JSONDecodeError) as exc:
        raise UsageError(f"{name}: {exc}") from None


def _positive(name, value):
    value = _field(name, float, value)
    if not (value > 0 and math.isfinite(value)):
        raise UsageError(f"{name}: must be positive, got {value}")
    return value


def _nonneg_int(name, value):
    value = _field(name, int, value)
    if value < 0:
        raise UsageError(f"{name}: must be non-negative, got {value}")
    return value


def _output_path(name, value) -> Path:
    path = Path(value)
    base = os.environ.get(OUTPUT_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    parent = path.parent
    probe = parent
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise UsageError(f"{name}: directory {parent} is not writable")
    return path


def _sibling(path: Path, tag: str, suffix: str) -> Path:
    return path.with_name(f"{path.stem}{tag}{suffix}")


def _emit(obj):
    sys.stdout.write(io.dumps(obj) + "\n")


# ---------------------------------------------------------------- commands

def cmd_bloch(args) -> int:
    state = _field("state", parse_state, args.state)
    lattice = _field("lattice", Lattice.parse, args.lattice)
    t = _field("t", lambda v: [float(x) for x in v], args.t)
    if not all(math.isfinite(x) for x in t):
        raise UsageError("t: must be finite")
    sq = _field("lattice", lambda s: square_equivalent(s, lattice), state)
    out = Outcome.canonical(t)
    b = _field("t", lambda o: bloch_normalized(sq, o, verify=args.verify), out)
    result = {
        "state": state.to_dict(),
        "lattice": lattice.value,
        "t": [out.tq, out.tp],
        "pdf": pdf(sq, out),
        "bloch": b.vector.tolist(),
        "norm": float(np.linalg.norm(b.r)),
    }
    if lattice is Lattice.HEXAGONAL:
        result["square_equivalent_state"] = sq.to_dict()
    _emit(result)
    return 0


def cmd_fidelity_map(args) -> int:
    state = _field("state", parse_state, args.state)
    family = _field("family", get_family, args.family)
    lattice = _field("lattice", Lattice.parse, args.lattice)
    resolution = _nonneg_int("resolution", args.resolution)
    if resolution < 1:
        raise UsageError("resolution: must be at least 1")
    threshold = family.distill if args.threshold is None else _positive("threshold", args.threshold)
    _field("lattice", lambda s: square_equivalent(s, lattice), state)
    out = _output_path("out", args.out)

    fmap = fidelity_map(state, family, lattice, resolution)
    bloch_rows = BlochMap(fmap.tq, fmap.tp, fmap.components).rows()
    summary = fmap.summary(threshold)
    summary["state"] = state.to_dict()
    paths = {
        "fidelity_csv": out,
        "bloch_csv": _sibling(out, "_bloch", ".csv"),
        "summary_json": _sibling(out, "_summary", ".json"),
    }
    io.write_csv(paths["fidelity_csv"], ["t_q", "t_p", "F", "nearest_index"], fmap.rows())
    io.write_csv(paths["bloch_csv"], ["t_q", "t_p", "r0", "rx", "ry", "rz"], bloch_rows)
    summary["files"] = {k: str(v) for k, v in paths.items()}
    io.write_json(paths["summary_json"], summary)
    _emit(summary)
    return 0


def _f_grid(args):
    if args.f_grid is not None:
        grid = _field("f_grid", lambda v: np.array([float(x) for x in v]), args.f_grid)
    else:
        num = _nonneg_int("f_num", args.f_num)
        if num < 1:
            raise UsageError("f_num: must be at least 1")
        grid = np.linspace(float(args.f_min), float(args.f_max), num)
    if grid.size == 0 or np.any(grid < 0.5) or np.any(grid > 1.0):
        raise UsageError("f_grid: values must lie in [0.5, 1]")
    if np.any(np.diff(grid) <= 0):
        raise UsageError("f_grid: values must be strictly ascending")
    return grid


def cmd_success_curve(args) -> int:
    nbars = _field("nbar", lambda v: [float(x) for x in v], args.nbar)
    if not nbars or any(not (n >= 0 and math.isfinite(n)) for n in nbars):
        raise UsageError("nbar: values must be finite and non-negative")
    family = _field("family", get_family, args.family)
    lattice = _field("lattice", Lattice.parse, args.lattice)
    grid = _f_grid(args)
    tol = _positive("tol", args.tol)
    out = _output_path("out", args.out)

    report = []
    for nbar in nbars:
        curve = success_curve(nbar, family, lattice, grid, tol)
        path = out if len(nbars) == 1 else _sibling(out, f"_nbar{nbar:g}", out.suffix)
        side = path.with_suffix(".json")
        io.write_csv(path, ["f", "P"], curve.rows())
        io.write_json(side, curve.metadata())
        report.append({**curve.metadata(), "csv": str(path), "sidecar": str(side),
                       "f": grid.tolist(), "P": curve.probability.tolist()})
    _emit(report)
    return 0


def cmd_threshold(args) -> int:
    family = _field("family", get_family, args.family)
    lattice = _field("lattice", Lattice.parse, args.lattice)
    f = None if args.f is None else _positive("f", args.f)
    if f is not None and not 0.5 < f < 1.0:
        raise UsageError("f: must lie in (0.5, 1)")
    xtol = _positive("xtol", args.xtol)
    out = _output_path("out", args.out) if args.out else None
    res = threshold_nbar(family, lattice, f, xtol=xtol)
    if out is not None:
        io.write_json(out, res.to_dict())
    _emit(res.to_dict())
    return 0


def dual_route_cases(seed: int, n_cases: int):
    """Deterministic random (state, t, mu) cases with both route values."""
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(n_cases):
        state = random_state(rng)
        tq, tp = rng.uniform(0.0, CELL, size=2)
        mu = int(rng.integers(4))
        th = bloch_theta(state, (tq, tp), mu)
        lat = bloch_lattice_sum(state, (tq, tp), mu)
        cases.append({"state": state.to_dict(), "t": [float(tq), float(tp)], "mu": mu,
                      "theta": float(th), "lattice": float(lat), "abs_err": float(abs(th - lat))})
    return cases


def oracle_cases(seed: int, n_cases: int, beta: float, cutoff: int):
    """Deterministic displaced-thermal oracle comparisons."""
    from .oracle import OracleConfig, compare

    cfg = OracleConfig(beta=beta, cutoff=cutoff)
    rng = np.random.default_rng([seed, 1])
    reps = []
    for _ in range(n_cases):
        nbar = rng.uniform(0.0, 0.5)
        state = GaussianState(0.5 * rng.normal(size=2), (nbar + 0.5) * np.eye(2))
        t = rng.uniform(0.0, CELL, size=2)
        rep = compare(state, t, cfg)
        rep["state"] = state.to_dict()
        reps.append(rep)
    return reps


def cmd_verify(args) -> int:
    seed = _nonneg_int("seed", args.seed)
    n_cases = _nonneg_int("n_cases", args.n_cases)
    n_oracle = _nonneg_int("oracle_cases", args.oracle_cases)
    beta = _positive("beta", args.beta)
    cutoff = _nonneg_int("cutoff", args.cutoff)
    if n_oracle and not 4 <= cutoff <= 512:
        raise UsageError("cutoff: must lie in [4, 512]")
    dual_tol = _positive("dual_tol", args.dual_tol)
    oracle_tol = _positive("oracle_tol", args.oracle_tol)
    out = _output_path("out", args.out) if args.out else None

    dual = dual_route_cases(seed, n_cases)
    orc = oracle_cases(seed, n_oracle, beta, cutoff) if n_oracle else []
    dual_max = max((c["abs_err"] for c in dual), default=0.0)
    orc_max = max((c["abs_err"] for c in orc), default=0.0)
    report = {
        "seed": seed,
        "dual_route": {"cases": dual, "n_cases": len(dual), "max_abs_err": dual_max,
                       "tol": dual_tol, "pass": dual_max < dual_tol},
        "oracle": {"cases": orc, "n_cases": len(orc), "beta": beta, "cutoff": cutoff,
                   "max_abs_err": orc_max, "tol": oracle_tol, "pass": orc_max < oracle_tol},
    }
    report["pass"] = report["dual_route"]["pass"] and report["oracle"]["pass"]
    if out is not None:
        io.write_json(out, report)
    _emit(report)
    return 0 if report["pass"] else 1


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gkpmagic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--config", help="JSON file with option values")
        if out_default is not None:
            p.add_argument("--out", default=out_default, help="output path")

    p = sub.add_parser("bloch", help="normalised Bloch vector and pdf at one outcome")
    p.add_argument("--state", default="vacuum")
    p.add_argument("--t", nargs=2, default=[0.0, 0.0], metavar=("TQ", "TP"))
    p.add_argument("--lattice", default="square")
    p.add_argument("--verify", action="store_true", help="cross-check both evaluation routes")
    common(p)
    p.set_defaults(func=cmd_bloch)

    p = sub.add_parser("fidelity-map", help="nearest-magic-state fidelity over the cell")
    p.add_argument("--state", default="vacuum")
    p.add_argument("--family", default="H")
    p.add_argument("--lattice", default="square")
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--threshold", type=float, default=None)
    common(p, "fidelity_map.csv")
    p.set_defaults(func=cmd_fidelity_map)

    p = sub.add_parser("success-curve", help="P(F >= f) for thermal inputs")
    p.add_argument("--nbar", nargs="+", default=["0"])
    p.add_argument("--family", default="H")
    p.add_argument("--lattice", default="square")
    p.add_argument("--f-grid", nargs="+", default=None)
    p.add_argument("--f-min", type=float, default=0.5)
    p.add_argument("--f-max", type=float, default=1.0)
    p.add_argument("--f-num", type=int, default=26)
    p.add_argument("--tol", type=float, default=1e-4)
    common(p, "success_curve.csv")
    p.set_defaults(func=cmd_success_curve)

    p = sub.add_parser("threshold", help="thermal occupation where distillation stops")
    p.add_argument("--family", default="H")
    p.add_argument("--lattice", default="square")
    p.add_argument("--f", type=float, default=None)
    p.add_argument("--xtol", type=float, default=1e-4)
    common(p, "")
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("verify", help="dual-route and Fock-oracle checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-cases", type=int, default=1000)
    p.add_argument("--oracle-cases", type=int, default=0)
    p.add_argument("--beta", type=float, default=0.02)
    p.add_argument("--cutoff", type=int, default=300)
    p.add_argument("--dual-tol", type=float, default=1e-10)
    p.add_argument("--oracle-tol", type=float, default=1e-3)
    common(p, "")
    p.set_defaults(func=cmd_verify)
    return parser


def _apply_config(parser, argv, args):
    """Re-parse with config-file values as defaults so explicit flags still win."""
    path = args.config
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"config: cannot read {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError("config: must be a JSON object")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in subparser._actions} - {"help", "config"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"config: unknown keys {unknown}")
    for key, value in data.items():
        if key in ("t", "nbar", "f_grid") and not isinstance(value, list):
            value = [value]
        subparser.set_defaults(**{key: value})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        return args.func(args)
    except UsageError as exc:
        print(f"gkpmagic {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
