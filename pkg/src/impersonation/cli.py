"""Command line entry point: ``impersonation {run,sweep,report,selftest}``."""
from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from . import harness as Hn
from . import schemes as Sc


def _scalar_flags(p: argparse.ArgumentParser, many: bool) -> None:
    nargs = "+" if many else None
    p.add_argument("--scheme", required=True, choices=Sc.SCHEMES)
    p.add_argument("--n", type=int, nargs=nargs, help="scheme size (key bits, pairs, note qubits, ...)")
    p.add_argument("--t", type=int, nargs=nargs, help="message pairs per round")
    p.add_argument("--K", type=int, nargs=nargs, help="number of candidate attack rounds")
    p.add_argument("--epsilon", type=float, nargs=nargs, help="target distance; derives K")
    p.add_argument("--seed", type=int, nargs=nargs, default=[0] if many else 0)
    p.add_argument("--horizon", type=int, help="trigger scheme: rounds addressable by the key")
    p.add_argument("--ny", type=int, help="haar scheme: Bob's qubits")
    p.add_argument("--burst", type=int, help="haar scheme: rounds with random channels")
    p.add_argument("--mixed", action="store_true", help="random schemes: mixed initial state")
    p.add_argument("--fixed-k", type=int, help="diagnostic: forge only at this round")
    p.add_argument("--ladder-k", type=int, help="also record the hybrid ladder at this round")
    p.add_argument("--branch-cap", type=int, default=Hn.P.DEFAULT_BRANCH_CAP)
    p.add_argument("--qubit-cap", type=int)
    p.add_argument("--out", type=Path, help=f"record file (default: ${Hn.OUT_DIR_ENV}/<verb>.jsonl)")
    p.add_argument("--timing", action="store_true", help="persist wall time (breaks bit-identity)")


def _config(a: argparse.Namespace, **over) -> Hn.ExperimentConfig:
    vals = dict(scheme=a.scheme, n=a.n, t=a.t, K=a.K, epsilon=a.epsilon, seed=a.seed,
                horizon=a.horizon, ny=a.ny, burst=a.burst, mixed=a.mixed, fixed_k=a.fixed_k,
                ladder_k=a.ladder_k, branch_cap=a.branch_cap, qubit_cap=a.qubit_cap)
    vals.update(over)
    return Hn.ExperimentConfig(**vals)


def _out_path(a: argparse.Namespace, verb: str) -> Path:
    return a.out if a.out is not None else Hn.default_out_dir() / f"{verb}.jsonl"


def cmd_run(a: argparse.Namespace) -> int:
    try:
        cfg = _config(a)
    except Hn.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return Hn.EXIT_CONFIG
    out = _out_path(a, "run")
    (rec,) = Hn.sweep([cfg], out, timing=a.timing)
    if rec.status != "ok":
        print(f"error: {rec.error}", file=sys.stderr)
        return Hn.EXIT_CONFIG
    table, _, code = Hn.report([rec])
    print(table, end="")
    print(f"records written to {out}")
    return code


def cmd_sweep(a: argparse.Namespace) -> int:
    axes = {k: getattr(a, k) or [None] for k in ("n", "t", "K", "epsilon", "seed")}
    try:
        cfgs = [_config(a, **dict(zip(axes, combo))) for combo in itertools.product(*axes.values())]
    except Hn.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return Hn.EXIT_CONFIG
    out = _out_path(a, "sweep")
    records = Hn.sweep(cfgs, out, jobs=a.jobs, timing=a.timing)
    table, summary, code = Hn.report(records)
    print(table, end="")
    print(json.dumps(summary["schemes"], indent=2, sort_keys=True))
    print(f"{len(records)} records written to {out}")
    if summary["errors"] and code == Hn.EXIT_OK:
        return Hn.EXIT_CONFIG
    return code


def cmd_report(a: argparse.Namespace) -> int:
    try:
        records = Hn.load_records(a.path)
    except Hn.ReportError as e:
        print(f"{a.path}: {e}", file=sys.stderr)
        return Hn.EXIT_CONFIG
    except OSError as e:
        print(f"cannot read {a.path}: {e}", file=sys.stderr)
        return Hn.EXIT_CONFIG
    table, summary, code = Hn.report(records)
    print(json.dumps(summary, indent=2, sort_keys=True) if a.json else table, end="" if not a.json else "\n")
    return code


def cmd_selftest(a: argparse.Namespace) -> int:
    from .checks import run_all
    results = run_all()
    return Hn.EXIT_OK if all(r.passed for r in results) else Hn.EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="impersonation",
                                description="Exact impersonation attacks on classical-channel protocols.")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run one experiment")
    _scalar_flags(r, many=False)
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="run the cartesian product of the given values")
    _scalar_flags(s, many=True)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    rp = sub.add_parser("report", help="summarize a record file")
    rp.add_argument("path", type=Path)
    rp.add_argument("--json", action="store_true", help="print the machine summary instead of the table")
    rp.set_defaults(func=cmd_report)
    st = sub.add_parser("selftest", help="run the acceptance checks")
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv: list[str] | None = None) -> int:
    a = build_parser().parse_args(argv)
    return a.func(a)


if __name__ == "__main__":
    sys.exit(main())
