#!/usr/bin/env python3
"""Why the forged round must be random: fixed-k vs uniform-k on the trigger protocol."""
from __future__ import annotations

import argparse

from impersonation import attack as A
from impersonation import schemes as Sc


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=4)
    ap.add_argument("--K", type=int, default=16)
    args = ap.parse_args()
    eve = Sc.trigger_protocol(args.n, args.K)
    uni = A.impersonate(eve, A.AttackConfig(args.K))
    print(f"uniform k: distance {uni.distance:.4f}, bound {uni.bound:.4f}")
    print(f"{'k':>3} {'key-conditioned fixed-k':>24}")
    for k in range(1, args.K):
        honest = Sc.trigger_protocol(args.n, args.K, first_trigger=k + 1)
        d = A.impersonate(eve, A.AttackConfig(args.K), fixed_k=k, honest_spec=honest).distance
        print(f"{k:>3} {d:24.4f}")


if __name__ == "__main__":
    main()
