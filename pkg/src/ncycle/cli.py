"""Command-line interface.

Subcommands: ``table1`` (K_max table for a range of cycle lengths),
``sequence`` (per-player decay data behind the violation plots), ``simulate``
(Monte Carlo game with optional analytic comparison), ``bounds``
(enumeration-verified classical bounds plus quantum maxima), and ``asymptote``
(limit value and per-protocol recurrence coefficients).

Every command is deterministic given its flags; exit codes are 0 (success),
1 (internal invariant breach), 2 (usage error).  Flag values take precedence
over an optional JSON config file (``--config``), which takes precedence over
defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any

import numpy as np

from . import analytic, montecarlo
from .errors import USAGE_ERRORS, NCycleError
from .protocols import InequalityId, ProtocolId, functional_operator
from .quantum import handle_state
from .scenario import build_scenario, enumerate_classical_bounds

_DEFAULTS: dict[str, dict[str, Any]] = {
    "table1": {"n_min": 5, "n_max": 19, "format": "csv", "out": None, "precision": 12},
    "sequence": {
        "n": 5,
        "protocol": "full",
        "ineq": "alpha",
        "k": 30,
        "format": "csv",
        "out": None,
        "precision": 12,
    },
    "simulate": {
        "n": 5,
        "protocol": "full",
        "ineq": "alpha",
        "players": 2,
        "runs": 10000,
        "seed": 0,
        "ordering": "fixed",
        "compare": False,
        "format": "json",
        "out": None,
        "precision": 12,
    },
    "bounds": {"n": 5, "format": "csv", "out": None, "precision": 12},
    "asymptote": {"n": 5, "format": "csv", "out": None, "precision": 12},
}


class UsageError(NCycleError):
    """Invalid command-line input."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncycle",
        description="Sequential measurement game on odd cycle contextuality scenarios",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--precision", type=int, default=None,
                       help="significant digits for csv floats (1..17)")
        p.add_argument("--config", default=None, help="JSON config file")

    p = sub.add_parser("table1", help="K_max table for a range of cycle lengths")
    p.add_argument("--n-min", dest="n_min", type=int, default=None)
    p.add_argument("--n-max", dest="n_max", type=int, default=None)
    add_common(p)

    p = sub.add_parser("sequence", help="per-player inequality values")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--protocol", choices=("full", "a", "b"), default=None)
    p.add_argument("--ineq", choices=("alpha", "beta"), default=None)
    p.add_argument("--k", type=int, default=None, help="number of players")
    add_common(p)

    p = sub.add_parser("simulate", help="Monte Carlo game simulation")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--protocol", choices=("full", "a", "b"), default=None)
    p.add_argument("--ineq", choices=("alpha", "beta"), default=None)
    p.add_argument("--players", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ordering", choices=("fixed", "random"), default=None)
    p.add_argument("--compare", action="store_true", default=None,
                   help="append analytic truth and z-scores")
    add_common(p)

    p = sub.add_parser("bounds", help="classical bounds by enumeration")
    p.add_argument("--n", type=int, default=None)
    add_common(p)

    p = sub.add_parser("asymptote", help="limit value and recurrence coefficients")
    p.add_argument("--n", type=int, default=None)
    add_common(p)

    return parser


def _merge_options(args: argparse.Namespace) -> dict[str, Any]:
    """defaults < config file < explicitly passed flags."""
    merged = dict(_DEFAULTS[args.command])
    if args.config is not None:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config!r}: {exc}") from exc
        unknown = set(loaded) - set(merged)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key in merged:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    precision = merged.get("precision", 12)
    if not isinstance(precision, int) or not 1 <= precision <= 17:
        raise UsageError(f"precision must be an integer in 1..17, got {precision!r}")
    return merged


def _fmt(value: Any, precision: int) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, f".{precision}g")
    return str(value)


def _emit_csv(header: list[str], rows: list[list[Any]], precision: int) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v, precision) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _emit_json(obj: Any) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _workers() -> int:
    raw = os.environ.get("NCYCLE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise UsageError(f"NCYCLE_THREADS must be an integer, got {raw!r}") from exc


def cmd_table1(opts: dict[str, Any]) -> str:
    n_min, n_max = opts["n_min"], opts["n_max"]
    if n_min > n_max:
        raise UsageError(f"empty range: n_min {n_min} > n_max {n_max}")
    lo = max(5, n_min + (1 - n_min % 2))   # round up to odd, floor at 5
    hi = n_max - (1 - n_max % 2)           # round down to odd
    ns = list(range(lo, hi + 1, 2))
    if not ns:
        raise UsageError(f"no supported odd cycle length in [{n_min}, {n_max}]")
    rows = analytic.table1(ns)
    if opts["format"] == "json":
        payload = [
            {
                "n": r.n,
                "fixed": {"full": r.fixed_full, "a": r.fixed_a, "b": r.fixed_b},
                "uniform": {"full": r.uniform_full, "a": r.uniform_a, "b": r.uniform_b},
            }
            for r in rows
        ]
        return _emit_json(payload)
    header = ["n", "fixed_full", "fixed_a", "fixed_b", "uniform_full", "uniform_a", "uniform_b"]
    return _emit_csv(header, [[r.n, *r.as_tuple()] for r in rows], opts["precision"])


def cmd_sequence(opts: dict[str, Any]) -> str:
    protocol = ProtocolId(opts["protocol"])
    ineq = InequalityId(opts["ineq"])
    if opts["k"] < 1:
        raise UsageError(f"k must be >= 1, got {opts['k']}")
    sc = build_scenario(opts["n"])
    if protocol is ProtocolId.FULL:
        seq = analytic.protocol1_sequence(sc, ineq, handle_state(), opts["k"])
    else:
        seq = analytic.recurrence_sequence(sc, protocol, ineq, handle_state(), opts["k"])
    bound = ineq.bound(sc.n)
    rows = [
        [k + 1, seq.values[k], seq.verdicts[k], bound, seq.asymptote]
        for k in range(len(seq.values))
    ]
    if opts["format"] == "json":
        payload = [
            {"k": r[0], "value": r[1], "violates": r[2], "bound": r[3], "asymptote": r[4]}
            for r in rows
        ]
        return _emit_json(payload)
    return _emit_csv(["k", "value", "violates", "bound", "asymptote"], rows, opts["precision"])


def cmd_simulate(opts: dict[str, Any]) -> str:
    try:
        cfg = montecarlo.GameConfig(
            n=opts["n"],
            protocol=ProtocolId(opts["protocol"]),
            ineq=InequalityId(opts["ineq"]),
            players=opts["players"],
            runs=opts["runs"],
            seed=opts["seed"],
            ordering=montecarlo.Ordering(opts["ordering"]),
        )
    except NCycleError as exc:
        raise UsageError(f"invalid game configuration: {exc}") from exc
    workers = _workers()
    if opts["compare"]:
        report = montecarlo.compare_to_analytic(cfg, workers=workers)
        payload = report.to_json_dict()
        positions = payload["positions"]
        header = ["k", "estimate", "stderr", "analytic", "z"]
    else:
        est = montecarlo.estimate_sequence(cfg, workers=workers)
        payload = est.to_json_dict()
        positions = payload["positions"]
        header = ["k", "estimate", "stderr"]
    if opts["format"] == "json":
        return _emit_json(payload)
    rows = [[row[key] for key in header] for row in positions]
    return _emit_csv(header, rows, opts["precision"])


def cmd_bounds(opts: dict[str, Any]) -> str:
    n = opts["n"]
    cb = enumerate_classical_bounds(n)
    if n >= 5:
        sc = build_scenario(n)
        h = np.array([0.0, 0.0, 1.0])
        alpha_max = float(h @ functional_operator(sc, InequalityId.ALPHA).op @ h)
        beta_min = float(h @ functional_operator(sc, InequalityId.BETA).op @ h)
        q_alpha: Any = alpha_max
        q_beta: Any = beta_min
    else:
        q_alpha = q_beta = "n/a"
    payload = {
        "n": n,
        "alpha_bound": cb.alpha_bound,
        "beta_bound": cb.beta_bound,
        "correlator_bound": cb.correlator_bound,
        "quantum_alpha_max": q_alpha,
        "quantum_beta_min": q_beta,
    }
    if opts["format"] == "json":
        return _emit_json(payload)
    header = list(payload)
    return _emit_csv(header, [[payload[k] for k in header]], opts["precision"])


def cmd_asymptote(opts: dict[str, Any]) -> str:
    n = opts["n"]
    sc = build_scenario(n)
    mm = analytic.markov_matrix(n)
    full_slope = mm.decay_rate
    full_offset = (n / 3.0) * (1.0 - full_slope)
    rec_a = analytic.extract_recurrence(sc, ProtocolId.A_ONLY, InequalityId.ALPHA)
    rec_b = analytic.extract_recurrence(sc, ProtocolId.B_ONLY, InequalityId.BETA)
    if opts["format"] == "json":
        payload = {
            "n": n,
            "asymptote": n / 3.0,
            "full": {"t": mm.t, "slope": full_slope, "offset": full_offset},
            "a": {"slope": rec_a.slope, "offset": rec_a.offset},
            "b": {"slope": rec_b.slope, "offset": rec_b.offset},
        }
        return _emit_json(payload)
    rows = [
        ["full", full_slope, full_offset, n / 3.0],
        ["a", rec_a.slope, rec_a.offset, n / 3.0],
        ["b", rec_b.slope, rec_b.offset, n / 3.0],
    ]
    return _emit_csv(["protocol", "slope", "offset", "asymptote"], rows, opts["precision"])


_COMMANDS = {
    "table1": cmd_table1,
    "sequence": cmd_sequence,
    "simulate": cmd_simulate,
    "bounds": cmd_bounds,
    "asymptote": cmd_asymptote,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        opts = _merge_options(args)
        text = _COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NCycleError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return 1
    _write(text, opts["out"])
    return 0


def entrypoint() -> None:
    sys.exit(main())
