#!/usr/bin/env python3
"""Clone a toy oracle-based money note by impersonating the verifier transcript."""
from __future__ import annotations

import argparse

from impersonation import attack as A
from impersonation import schemes as Sc


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=1, help="note qubits")
    ap.add_argument("--epsilon", type=float, default=0.5)
    ap.add_argument("--public", action="store_true")
    ap.add_argument("--K", type=int, help="override the budget-derived K")
    args = ap.parse_args()
    scheme = Sc.toy_money(args.m, public=args.public)
    cfg = A.AttackConfig(args.K) if args.K else A.AttackConfig.from_epsilon(args.m, scheme.t, args.epsilon)
    print(f"reusable correctness over 25 checks: {Sc.reusable_correctness(scheme, 0, 25):.12f}")
    for forge in (False, True):
        out = A.cloning_adversary(scheme, cfg, forge=forge)
        label = "transcript posterior" if forge else "maximally mixed guess"
        print(f"{label:>22}: K={out.K} real {out.real_verify:.4f} forged {out.forged_verify:.4f} "
              f"both {out.both_verify:.4f}")


if __name__ == "__main__":
    main()
