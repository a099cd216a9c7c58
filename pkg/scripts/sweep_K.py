#!/usr/bin/env python3
"""Distance as a function of K for one scheme, written through the batch harness."""
from __future__ import annotations

import argparse
from pathlib import Path

from impersonation import harness as Hn


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scheme", default="haar")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--t", type=int, default=1)
    ap.add_argument("--K", type=int, nargs="+", default=[4, 8, 16, 32])
    ap.add_argument("--out", type=Path, default=Path("results/sweep_K.jsonl"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfgs = [Hn.ExperimentConfig(scheme=args.scheme, seed=s, t=args.t, K=K)
            for s in range(args.seeds) for K in args.K]
    records = Hn.sweep(cfgs, args.out, jobs=args.jobs)
    table, summary, code = Hn.report(records)
    print(table, end="")
    print(f"{summary['ok']} ok, {summary['errors']} errors, written to {args.out}")
    raise SystemExit(code)


if __name__ == "__main__":
    main()
