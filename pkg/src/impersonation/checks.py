"""Exact end-to-end checks shared by ``selftest`` and the acceptance tests.

Each ``check_*`` function returns a :class:`CheckResult`; none of them raise
on a failed inequality.
"""
from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from . import attack as A
from . import protocol as P
from . import schemes as Sc
from .infomeasures import araki_lieb_check, pinsker_check
from .qcore import DensityOperator, RegisterLayout

TOL = 1e-8
K_GRID = (8, 16, 32, 64)


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


# -- corpus -------------------------------------------------------------------

def corpus() -> list[Callable[[], P.ProtocolSpec]]:
    """Builders for the standard protocol corpus (t in {1, 2} except the money reduction)."""
    out: list[Callable[[], P.ProtocolSpec]] = []
    for seed in range(5):
        out.append(lambda seed=seed: Sc.random_clifford_protocol(seed, t=1))
    for seed in range(3):
        out.append(lambda seed=seed: Sc.random_clifford_protocol(seed, t=2))
    out.append(lambda: Sc.random_clifford_protocol(5, t=1, mixed=True))
    out += [
        lambda: Sc.haar_protocol(0, 1, 1, 1, burst=3),
        lambda: Sc.haar_protocol(1, 2, 1, 2, burst=2),
        lambda: Sc.haar_protocol(2, 1, 2, 1, burst=3, mixed=True),
        lambda: Sc.haar_protocol(3, 2, 1, 1, burst=3),
        lambda: Sc.haar_protocol(4, 1, 1, 2, burst=2, mixed=True),
        lambda: Sc.epr_auth(1).spec,
        lambda: Sc.epr_auth(2).spec,
        lambda: Sc.epr_auth(3).spec,
        lambda: Sc.trigger_protocol(3, 8),
        lambda: Sc.trigger_protocol(3, 8, bob_checks=False),
        lambda: Sc.trigger_protocol(2, 4, t=2),
        lambda: Sc.toy_money(1).reduction_spec(),
        lambda: Sc.alternating_basis_protocol(),
        lambda: Sc.constant_protocol(1, 1, 2),
    ]
    return out


@lru_cache(maxsize=1)
def corpus_outcomes() -> tuple[A.AttackOutcome, ...]:
    """Uniform-k attacks at the largest K; smaller K are prefixes of the same run."""
    return tuple(A.impersonate(build(), A.AttackConfig(max(K_GRID))) for build in corpus())


# -- individual checks ----------------------------------------------------------

def check_bound_corpus() -> CheckResult:
    worst, count, bad = math.inf, 0, []
    for out in corpus_outcomes():
        for K in K_GRID:
            o = out.truncated(K)
            slack = o.bound - o.distance
            worst = min(worst, slack)
            count += 1
            if slack < -TOL:
                bad.append(f"{o.spec_name}@K={K}")
    n_specs = len(corpus_outcomes())
    ok = not bad and n_specs >= 20
    detail = f"{n_specs} specs x {len(K_GRID)} K, min slack {worst:.3e}"
    if bad:
        detail += f", violations: {bad}"
    return CheckResult(1, "distance <= sqrt(2 t H(X) / (K ln 2))", ok, detail)


def check_budget() -> CheckResult:
    from .harness import ExperimentConfig, resolve_K
    K = A.budget(2, 1, 0.5)
    via_harness = resolve_K(ExperimentConfig(scheme="constant", n=2, t=1, epsilon=0.5), n=2, t=1)
    ok = K == 24 and via_harness == 24
    return CheckResult(2, "budget K = ceil(2nt / (eps^2 ln 2))", ok,
                       f"n=2 t=1 eps=0.5 -> K={K} (harness {via_harness})")


def _monotone(spec: P.ProtocolSpec, steps: int) -> bool:
    traces = [tr for _, _, tr in P.iterate(spec, steps, lump=False) if tr is not None]
    ok, _ = P.entropy_trace_monotone(traces, start=P.initial_entropy(spec), tol=TOL)
    return ok


def check_monotone(samples: int = 200) -> CheckResult:
    failures = []
    for seed in range(samples):
        spec = Sc.haar_protocol(1000 + seed, 1, 1, 1, mixed=bool(seed % 2))
        if not _monotone(spec, 4):
            failures.append(spec.name)
    alt = Sc.alternating_basis_protocol()
    alt_ok = _monotone(alt, 12)
    ok = not failures and alt_ok
    return CheckResult(3, "H(X | transcript) non-increasing", ok,
                       f"{samples} random 2-qubit protocols, {len(failures)} violations; "
                       f"alternating-basis example {'monotone' if alt_ok else 'VIOLATED'}")


def check_telescoping() -> CheckResult:
    worst = math.inf
    for out in corpus_outcomes():
        sy, sx = P.telescoping_sums(out.traces)
        worst = min(worst, out.h0 - sy, out.h0 - sx)
    ok = worst >= -1e-6
    return CheckResult(4, "telescoping CMI sums <= H(X)", ok, f"min slack {worst:.3e} over corpus")


def _random_state(rng: np.random.Generator, wa: int, wb: int) -> DensityOperator:
    lay = RegisterLayout.of(("A", wa, "Alice"), ("B", wb, "Bob"))
    rank = int(rng.integers(1, lay.dim + 1))
    return DensityOperator(lay, Sc.random_density(rng, lay.dim, rank))


def check_pinsker_araki(samples: int = 1000) -> CheckResult:
    rng = np.random.default_rng(20240531)
    bad_p = bad_a = 0
    for _ in range(samples):
        rho = _random_state(rng, int(rng.integers(1, 3)), int(rng.integers(1, 3)))
        bad_p += not pinsker_check(rho, ["A"], ["B"]).holds
        rho = _random_state(rng, int(rng.integers(1, 3)), int(rng.integers(1, 3)))
        bad_a += not araki_lieb_check(rho, ["A"], ["B"]).holds
    lay = RegisterLayout.of(("A", 1, "Alice"), ("B", 1, "Bob"))
    bell = DensityOperator.from_pure(lay, np.array([1, 0, 0, 1]) / math.sqrt(2))
    slacks = araki_lieb_check(bell, ["A"], ["B"]).slacks
    lhs = pinsker_check(bell, ["A"], ["B"]).lhs
    spots = abs(slacks[0]) < 1e-9 and abs(slacks[1] - 2) < 1e-9 and abs(lhs - 1.5) < 1e-9
    ok = bad_p == 0 and bad_a == 0 and spots
    return CheckResult(5, "Pinsker and Araki-Lieb", ok,
                       f"{samples}+{samples} random states, violations {bad_p}/{bad_a}; "
                       f"Bell slacks ({slacks[0]:.3g}, {slacks[1]:.3g}), Pinsker lhs {lhs:.6f}")


def check_ladder(count: int = 10) -> CheckResult:
    builders = corpus()
    picks = [builders[j] for j in (0, 1, 5, 6, 9, 10, 14, 15, 17, 19)][:count]
    worst_e2e = worst_adj = 0.0
    for j, build in enumerate(picks):
        spec = build()
        k = 1 + j % 2
        ladder = A.hybrid_ladder(spec, k)
        d = A.impersonate(spec, A.AttackConfig(k), fixed_k=k).per_k[0].distance
        worst_e2e = max(worst_e2e, abs(ladder.end_to_end - d))
        for r in ladder.rungs:
            worst_adj = max(worst_adj, r.adjacent - r.pinsker_sum)
    ok = worst_e2e <= 1e-9 and worst_adj <= TOL
    return CheckResult(6, "hybrid ladder consistency", ok,
                       f"{len(picks)} specs, max |end-to-end - D_k| {worst_e2e:.2e}, "
                       f"max (adjacent - Pinsker sum) {worst_adj:.3e}")


def check_trigger() -> CheckResult:
    n, K = 4, 16
    eve = Sc.trigger_protocol(n, K)
    k = 1
    honest = Sc.trigger_protocol(n, K, first_trigger=k + 1)
    fixed = A.impersonate(eve, A.AttackConfig(K), fixed_k=k, honest_spec=honest).distance
    uni = A.impersonate(eve, A.AttackConfig(K))
    m = eve.params["triggers"]
    ceiling = m / K + uni.bound_n
    ok = fixed >= 0.9 and uni.distance <= uni.bound + TOL and uni.distance <= ceiling + TOL
    return CheckResult(7, "trigger-point separation", ok,
                       f"fixed-k at trigger {fixed:.4f} (>= 0.9); uniform-k {uni.distance:.4f} "
                       f"<= bound {uni.bound:.4f}, m/K + bound {ceiling:.4f}")


def check_auth(pairs: int = 2, epsilon: float = 0.5) -> CheckResult:
    scheme = Sc.epr_auth(pairs)
    spec = scheme.spec
    cfg = A.AttackConfig.from_epsilon(spec.n, spec.t, epsilon)
    out = A.impersonate(spec, cfg)
    acc = out.next_round_probability(scheme.accepted)
    ok = abs(scheme.completeness - 1) < 1e-9 and acc >= 1 - epsilon
    return CheckResult(8, "authentication forgery accepted", ok,
                       f"pairs={pairs} completeness {scheme.completeness:.12f}, K={cfg.K}, "
                       f"forged acceptance {acc:.6f} >= {1 - epsilon}")


def check_money(note_qubits: int = 1, epsilon: float = 0.5, seed: int = 7) -> CheckResult:
    scheme = Sc.toy_money(note_qubits)
    reuse = Sc.reusable_correctness(scheme, seed, 25)
    pk, oracle, _, _ = scheme.gen(seed)
    reduction = Sc.honest_acceptance(scheme.reduction_spec(oracle, pk), 25, scheme.verdict_position)
    cfg = A.AttackConfig.from_epsilon(note_qubits, scheme.t, epsilon)
    clone = A.cloning_adversary(scheme, cfg)
    ok = abs(reuse - 1) < 1e-9 and min(reduction) > 1 - 1e-9 and clone.both_verify >= 0.25
    return CheckResult(9, "money cloning via impersonation", ok,
                       f"reusable correctness {reuse:.12f} over 25 checks, K={cfg.K}, "
                       f"both-verify {clone.both_verify:.6f} >= 0.25")


def check_determinism() -> CheckResult:
    from .harness import ExperimentConfig, sweep
    cfgs = [ExperimentConfig(scheme="clifford", seed=s, t=t, K=K)
            for s in (0, 1) for t in (1, 2) for K in (8, 16)]
    cfgs.append(ExperimentConfig(scheme="epr-auth", n=2, epsilon=0.5))
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp, "a.jsonl"), Path(tmp, "b.jsonl")
        sweep(cfgs, a)
        sweep(cfgs, b)
        same = a.read_bytes() == b.read_bytes()
        csv_same = a.with_suffix(".csv").read_bytes() == b.with_suffix(".csv").read_bytes()
    return CheckResult(10, "sweep output bit-identical", same and csv_same,
                       f"{len(cfgs)} configs, jsonl {'identical' if same else 'DIFFER'}, "
                       f"csv {'identical' if csv_same else 'DIFFER'}")


ALL_CHECKS = (
    check_bound_corpus, check_budget, check_monotone, check_telescoping, check_pinsker_araki,
    check_ladder, check_trigger, check_auth, check_money, check_determinism,
)


def run_all(echo: Callable[[str], None] | None = print) -> list[CheckResult]:
    results = []
    for fn in ALL_CHECKS:
        r = fn()
        results.append(r)
        if echo:
            echo(r.line())
    return results
