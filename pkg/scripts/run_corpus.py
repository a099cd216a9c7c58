#!/usr/bin/env python3
"""Run the uniform-k attack over the standard protocol corpus and print distance vs bound."""
from __future__ import annotations

import argparse

from impersonation import checks


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, nargs="+", default=list(checks.K_GRID))
    args = ap.parse_args()
    outcomes = checks.corpus_outcomes()
    print(f"{'spec':<32} {'t':>2} {'H(X)':>6} " + " ".join(f"{'K=' + str(K):>18}" for K in args.K))
    for out in outcomes:
        cells = []
        for K in args.K:
            o = out.truncated(min(K, out.K))
            cells.append(f"{o.distance:8.4f}/{o.bound:<8.4f} ")
        print(f"{out.spec_name:<32} {out.t:>2} {out.h0:6.3f} " + " ".join(cells))
    print("cells: distance/bound")


if __name__ == "__main__":
    main()
