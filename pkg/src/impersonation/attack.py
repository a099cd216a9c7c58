"""Passive eavesdropper that forges Alice's side of one round.

Eve watches ``k`` rounds, then replaces Alice's ``(X, Q)`` registers with the
conditional state given the transcript.  Everything is computed by exact
enumeration of the engine's cq branches; the uniform choice of ``k`` is a
1/K-weighted mixture, never a sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import cq
from . import protocol as P
from .cq import CqState, Transcript, ZeroProbability
from .infomeasures import LN2, entropy_of_spectrum, pinsker_term, statistical_distance, trace_norm
from .qcore import DensityOperator, PureState, RegisterLayout, partial_trace
from .protocol import DEFAULT_BRANCH_CAP, ProtocolSpec

ALICE_SIDE = ("X", "Q")

Forger = Callable[[CqState], CqState]


def budget(n: float, t: int, epsilon: float) -> int:
    """Smallest K with K >= 2nt / (eps^2 ln 2)."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return math.ceil(2 * n * t / (epsilon ** 2 * LN2) - 1e-12)


def implied_epsilon(n: float, t: int, K: int) -> float:
    return math.sqrt(2 * n * t / (K * LN2))


def distance_bound(h0: float, t: int, K: int) -> float:
    """sqrt(2 t H(X) / (K ln 2)); pass ``n`` for the relaxed form."""
    return math.sqrt(2 * t * max(h0, 0.0) / (K * LN2))


@dataclass(frozen=True)
class AttackConfig:
    K: int
    epsilon_target: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")

    @classmethod
    def from_epsilon(cls, n: float, t: int, epsilon: float, seed: int = 0) -> "AttackConfig":
        return cls(budget(n, t, epsilon), epsilon, seed)


@dataclass(frozen=True)
class RoundForgery:
    """Forgery at a single fixed round ``k`` (Eve swaps before round k+1)."""

    k: int
    distance: float
    real_next: dict[str, float]
    forged_next: dict[str, float]
    real_joint: dict[str, float] | None = None
    forged_joint: dict[str, float] | None = None


@dataclass
class AttackOutcome:
    spec_name: str
    K: int
    n: int
    t: int
    h0: float
    per_k: list[RoundForgery]
    traces: list[P.StepTrace] = field(default_factory=list)
    per_hybrid_distances: list[float] = field(default_factory=list)

    @property
    def distance(self) -> float:
        """SD of the joint (k, transcript) laws, k uniform on 1..K."""
        return math.fsum(r.distance for r in self.per_k) / len(self.per_k)

    @property
    def bound(self) -> float:
        return distance_bound(self.h0, self.t, self.K)

    @property
    def bound_n(self) -> float:
        return distance_bound(self.n, self.t, self.K)

    @property
    def epsilon_implied(self) -> float:
        return implied_epsilon(self.n, self.t, self.K)

    @property
    def passed(self) -> bool:
        return self.distance <= self.bound + 1e-8

    def truncated(self, K: int) -> "AttackOutcome":
        """Outcome for a smaller horizon: the first K fixed-k forgeries."""
        if K > self.K:
            raise ValueError("cannot extend an outcome")
        return AttackOutcome(self.spec_name, K, self.n, self.t, self.h0, self.per_k[:K],
                             self.traces[:K * self.t])

    def next_round_probability(self, predicate: Callable[[str], bool], forged: bool = True) -> float:
        """Probability (k-averaged) that the round-(k+1) transcript satisfies ``predicate``."""
        acc = []
        for r in self.per_k:
            dist = r.forged_next if forged else r.real_next
            acc.append(math.fsum(p for s, p in dist.items() if predicate(s)))
        return math.fsum(acc) / len(acc)

    def real_distribution(self) -> dict[tuple[int, str], float]:
        return _mix(self.per_k, "real_joint")

    def forged_distribution(self) -> dict[tuple[int, str], float]:
        return _mix(self.per_k, "forged_joint")


def _mix(per_k: Sequence[RoundForgery], attr: str) -> dict[tuple[int, str], float]:
    out = {}
    w = 1 / len(per_k)
    for r in per_k:
        joint = getattr(r, attr)
        if joint is None:
            raise ValueError("outcome was computed without joint distributions")
        for key, p in joint.items():
            out[(r.k, key)] = w * p
    return out


# -- forging ----------------------------------------------------------------

def swap_forger(s: CqState) -> CqState:
    """Replace (X, Q) by the transcript-conditional state, decoupled from Y."""
    return cq.replace_subsystem(s, ALICE_SIDE)


def random_state_forger(s: CqState) -> CqState:
    """Ignore the transcript: (X, Q) replaced by the maximally mixed state."""
    out = {}
    for key, b in s.items():
        y = partial_trace(b, ["Y"])
        xq = b.layout.subset(ALICE_SIDE)
        mm = np.eye(xq.dim) / xq.dim
        m = np.kron(mm, y.matrix).reshape([xq.get("X").dim, xq.get("Q").dim, y.dim] * 2)
        m = m.transpose(0, 2, 1, 3, 5, 4).reshape(b.dim, b.dim)
        out[key] = DensityOperator(b.layout, m)
    return CqState(s.layout, out, s.schema)


def posterior_forger(view: CqState) -> Forger:
    """Forge from a different ensemble: Eve's posterior is read off ``view``.

    Used for diagnostics where the honest parties run a key-conditioned
    instance while Eve believes the unconditioned one.
    """
    def forge(s: CqState) -> CqState:
        out = {}
        for key, b in s.items():
            if key not in view.branches:
                raise ZeroProbability(f"Eve's view has no branch {key!r}")
            post = partial_trace(view.branches[key].normalized(), ALICE_SIDE)
            y = partial_trace(b, ["Y"])
            dx = b.layout.get("X").dim
            dq = b.layout.get("Q").dim
            m = np.kron(post.matrix, y.matrix).reshape(dx, dq, y.dim, dx, dq, y.dim)
            out[key] = DensityOperator(b.layout, m.transpose(0, 2, 1, 3, 5, 4).reshape(b.dim, b.dim))
        return CqState(s.layout, out, s.schema)
    return forge


def advance(s: CqState, spec: ProtocolSpec, first: int, steps: int, **kw) -> CqState:
    for i in range(first, first + steps):
        s, _ = P.step(s, spec, i, instrument=False, **kw)
    return s


def _suffix_marginal(joint: dict[str, float], prefix_len: int) -> dict[str, float]:
    out: dict[str, float] = {}
    for key, p in joint.items():
        sfx = key[prefix_len:]
        out[sfx] = out.get(sfx, 0.0) + p
    return out


def forge_round(s_k: CqState, spec: ProtocolSpec, k: int, *, forger: Forger = swap_forger,
                keep_joint: bool = False) -> RoundForgery:
    """Compare round k+1 honest vs forged, starting from the round-k state."""
    first = k * spec.t + 1
    honest = cq.classical_marginal(advance(s_k, spec, first, spec.t))
    forged = cq.classical_marginal(advance(forger(s_k), spec, first, spec.t))
    plen = sum(w for _, w in s_k.schema)
    return RoundForgery(
        k=k,
        distance=statistical_distance(honest, forged),
        real_next=_suffix_marginal(honest, plen),
        forged_next=_suffix_marginal(forged, plen),
        real_joint=honest if keep_joint else None,
        forged_joint=forged if keep_joint else None,
    )


def impersonate(spec: ProtocolSpec, cfg: AttackConfig, *, fixed_k: int | None = None,
                forger: Forger = swap_forger, honest_spec: ProtocolSpec | None = None,
                lump: bool = True, keep_joint: bool = False,
                branch_cap: int = DEFAULT_BRANCH_CAP) -> AttackOutcome:
    """Exact impersonation attack.

    With ``fixed_k`` only that round is forged (a diagnostic, not covered by
    the averaged bound).  With ``honest_spec`` the honest parties run that
    instance while Eve's posterior comes from ``spec``; lumping is disabled
    so that transcript keys line up.
    """
    K = cfg.K
    if fixed_k is not None and not 1 <= fixed_k <= K:
        raise ValueError("fixed_k must lie in 1..K")
    rounds = [fixed_k] if fixed_k is not None else list(range(1, K + 1))
    last = rounds[-1]
    if last + 1 > spec.max_rounds:
        raise ValueError(f"attack needs {last + 1} rounds, spec allows {spec.max_rounds}")

    if honest_spec is not None:
        lump = False
        eve_states = {i // spec.t: s for i, s, _ in
                      P.iterate(spec, last * spec.t, lump=False, instrument=False, branch_cap=branch_cap)
                      if i % spec.t == 0 and i // spec.t in rounds}
    run_spec = honest_spec or spec

    per_k: list[RoundForgery] = []
    traces: list[P.StepTrace] = []
    for i, s, tr in P.iterate(run_spec, last * spec.t, lump=lump, branch_cap=branch_cap):
        if tr is not None:
            traces.append(tr)
        if i == 0 or i % spec.t:
            continue
        k = i // spec.t
        if k not in rounds:
            continue
        f = posterior_forger(eve_states[k]) if honest_spec is not None else forger
        per_k.append(forge_round(s, run_spec, k, forger=f, keep_joint=keep_joint))

    return AttackOutcome(spec.name, K if fixed_k is None else 1, spec.n, spec.t,
                         P.initial_entropy(spec), per_k, traces)


def posterior(spec: ProtocolSpec, transcript: Transcript | str) -> DensityOperator:
    """Conditional state of Alice's (X, Q_next) given a transcript of whole steps."""
    key = transcript.key if isinstance(transcript, Transcript) else transcript
    per_step = spec.q_width + spec.a_width
    if len(key) % per_step:
        raise ValueError("transcript must cover whole message pairs")
    steps = len(key) // per_step
    s = P.init(spec)
    if steps:
        s = advance(s, spec, 1, steps)
    s = cq.condition(s, key)
    b = s.branches.get(key)
    if b is None:
        raise ZeroProbability(f"transcript {key!r} has zero probability")
    return partial_trace(b.normalized(), ALICE_SIDE)


# -- hybrid ladder ------------------------------------------------------------

@dataclass(frozen=True)
class HybridRung:
    """Hyb_j -> Hyb_j' -> Hyb_{j+1} for one position j inside the forged round."""

    j: int
    to_primed: float          # SD(Hyb_j, Hyb_j')
    primed_to_next: float     # SD(Hyb_j', Hyb_{j+1})
    adjacent: float           # SD(Hyb_j, Hyb_{j+1})
    delta_y: float            # E[Delta^Y] for step kt+j+1
    delta_x: float            # E[Delta^X] for step kt+j+1
    pinsker_y: float
    pinsker_x: float

    @property
    def pinsker_sum(self) -> float:
        return self.pinsker_y + self.pinsker_x


@dataclass(frozen=True)
class Ladder:
    k: int
    rungs: list[HybridRung]
    end_to_end: float

    @property
    def adjacent(self) -> list[float]:
        return [r.adjacent for r in self.rungs]


def _decouple_y(s: CqState) -> CqState:
    return cq.replace_subsystem(s, ["Y"])


def _dephased_gap(m: np.ndarray, d_keep: int, d_cls: int, pos_keep_first: bool) -> tuple[float, float]:
    """For a state on (keep, cls) or (cls, keep) with cls classical: (1/2 ||rho - rho_keep (x) rho_cls||, I)."""
    shape = (d_keep, d_cls) if pos_keep_first else (d_cls, d_keep)
    t = m.reshape(shape * 2)
    gap_acc = 0.0
    tot = float(np.real(np.trace(m)))
    if pos_keep_first:
        blocks = [t[:, c, :, c] for c in range(d_cls)]
    else:
        blocks = [t[c, :, c, :] for c in range(d_cls)]
    marg = sum(blocks)
    probs = [float(np.real(np.trace(b))) for b in blocks]
    h_marg = entropy_of_spectrum(np.linalg.eigvalsh(marg / tot))
    h_cond = 0.0
    for b, p in zip(blocks, probs):
        gap_acc += trace_norm(b / tot - (p / tot) * marg / tot)
        if p > 0:
            h_cond += p / tot * entropy_of_spectrum(np.linalg.eigvalsh(b / p))
    return 0.5 * gap_acc, max(h_marg - h_cond, 0.0)


def step_deltas(s: CqState, spec: ProtocolSpec, i: int) -> tuple[float, float, float, float]:
    """(E[Delta^Y], E[Delta^X], Pinsker_Y, Pinsker_X) for step ``i`` from state ``s``.

    Delta^Y compares Y against the dephased message Q before it is read;
    Delta^X compares X against the dephased answer A right after Bob acts.
    """
    dx, dy = spec.x_reg.dim, spec.y_reg.dim
    dq, da = 1 << spec.q_width, 1 << spec.a_width
    ey = ex = py = px = 0.0
    for key, b in s.items():
        p = b.trace
        yq = P._marg(b.matrix, (dx, dy, dq), (1, 2))
        gap, mi = _dephased_gap(yq, dy, dq, True)
        ey += p * gap
        py += p * pinsker_term(mi)
        for q, blk in P._blocks_last(b.matrix, dx * dy, dq):
            pq = float(np.real(np.trace(blk)))
            mb = P._bob_apply(blk, dx, dy, P._as_matrix(spec.bob(i, key + format(q, f"0{spec.q_width}b"))))
            xa = P._marg(mb, (dx, dy, da), (0, 2))
            gap, mi = _dephased_gap(xa, dx, da, True)
            ex += pq * gap
            px += pq * pinsker_term(mi)
    return ey, ex, py, px


def hybrid_ladder(spec: ProtocolSpec, k: int, *, lump: bool = True,
                  branch_cap: int = DEFAULT_BRANCH_CAP) -> Ladder:
    """Hyb_0 (forged) ... Hyb_t (honest) for a fixed round k, with primed hybrids."""
    s_k = None
    for i, s, _ in P.iterate(spec, k * spec.t, lump=lump, instrument=False, branch_cap=branch_cap):
        s_k = s
    t = spec.t
    base = k * t
    honest = [s_k]
    for j in range(t):
        honest.append(advance(honest[-1], spec, base + j + 1, 1))

    def hyb(j: int) -> dict[str, float]:
        return cq.classical_marginal(advance(swap_forger(honest[j]), spec, base + j + 1, t - j))

    def hyb_primed(j: int) -> dict[str, float]:
        s, _ = P.step(honest[j], spec, base + j + 1, after_q=_decouple_y, instrument=False)
        return cq.classical_marginal(advance(s, spec, base + j + 2, t - j - 1))

    dists = [hyb(j) for j in range(t + 1)]
    rungs = []
    for j in range(t):
        primed = hyb_primed(j)
        dy_, dx_, py, px = step_deltas(honest[j], spec, base + j + 1)
        rungs.append(HybridRung(
            j=j,
            to_primed=statistical_distance(dists[j], primed),
            primed_to_next=statistical_distance(primed, dists[j + 1]),
            adjacent=statistical_distance(dists[j], dists[j + 1]),
            delta_y=dy_, delta_x=dx_, pinsker_y=py, pinsker_x=px,
        ))
    return Ladder(k, rungs, statistical_distance(dists[0], dists[t]))


# -- extrapolation ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExtrapolationInstance:
    """A state ``sum_s alpha_s |s>_S |psi_s>_B``; Eve sees s and must rebuild B."""

    state: PureState | DensityOperator
    classical_register: str = "S"
    quantum_register: str = "B"

    @classmethod
    def from_branches(cls, alphas: Sequence[complex], psis: Sequence[np.ndarray]) -> "ExtrapolationInstance":
        ws = max(1, math.ceil(math.log2(len(alphas))))
        db = len(psis[0])
        wb = int(round(math.log2(db)))
        amp = np.zeros((1 << ws, db), dtype=complex)
        for s, (a, psi) in enumerate(zip(alphas, psis)):
            amp[s] = a * np.asarray(psi, dtype=complex)
        lay = RegisterLayout.of(("S", ws, "Message"), ("B", wb, "Bob"))
        return cls(PureState(lay, amp.reshape(-1)))

    def density(self) -> DensityOperator:
        st = self.state.density() if isinstance(self.state, PureState) else self.state
        return st.reorder([self.classical_register, self.quantum_register])

    def conditionals(self) -> dict[int, np.ndarray]:
        """Unnormalized ``alpha_s^2 rho_s`` on B per classical value s."""
        rho = self.density()
        ds = rho.layout.get(self.classical_register).dim
        db = rho.layout.get(self.quantum_register).dim
        t = rho.matrix.reshape(ds, db, ds, db)
        return {s: t[s, :, s, :] for s in range(ds) if np.real(np.trace(t[s, :, s, :])) > 1e-15}


Extrapolator = Callable[[int], np.ndarray]


def extrapolation_overlap(inst: ExtrapolationInstance, extrapolator: Extrapolator) -> float:
    """E_s Tr(rho_s Adv(s)) with s drawn from the classical marginal."""
    total = 0.0
    for s, blk in inst.conditionals().items():
        guess = extrapolator(s)
        guess = guess.matrix if isinstance(guess, DensityOperator) else np.asarray(guess)
        if guess.ndim == 1:
            guess = np.outer(guess, guess.conj())
        total += float(np.real(np.trace(blk @ guess)))
    return total


def brute_force_extrapolator(inst: ExtrapolationInstance) -> Extrapolator:
    cond = inst.conditionals()

    def ext(s: int) -> np.ndarray:
        blk = cond[s]
        return blk / np.trace(blk)
    return ext


def maximally_mixed_extrapolator(dim: int) -> Extrapolator:
    return lambda s: np.eye(dim) / dim


# -- money cloning ----------------------------------------------------------

@dataclass(frozen=True)
class CloningOutcome:
    K: int
    real_verify: float
    forged_verify: float
    both_verify: float
    real_note: DensityOperator
    forged_note: DensityOperator

    @property
    def union_floor(self) -> float:
        """Pr[both] >= Pr[real] + Pr[forged] - 1 (for product pairs this is a sanity floor)."""
        return self.real_verify + self.forged_verify - 1


def cloning_adversary(scheme, cfg: AttackConfig, *, forge: bool = True,
                      branch_cap: int = DEFAULT_BRANCH_CAP) -> CloningOutcome:
    """Run the reduction from a classical-query money verifier to impersonation.

    After a uniform number k of honest verifications, Eve prepares the
    transcript posterior of the note.  Both the retained note and the forged
    note are then checked against the true oracle.  ``scheme`` must expose
    ``reduction_spec()``, ``accept_projector(oracle_bits)`` and
    ``oracle_bits(y_index)``.
    """
    if getattr(scheme, "quantum_queries", False):
        raise ValueError("verifier with quantum oracle queries cannot be reduced")
    spec = scheme.reduction_spec()
    K = cfg.K
    dx, dy, dq = spec.x_reg.dim, spec.y_reg.dim, 1 << spec.q_width
    acc_real = acc_forged = acc_both = 0.0
    real_avg = np.zeros((dx, dx), dtype=complex)
    forged_avg = np.zeros((dx, dx), dtype=complex)
    for i, s, _ in P.iterate(spec, K * spec.t, lump=True, instrument=False, branch_cap=branch_cap):
        if i == 0 or i % spec.t:
            continue
        for key, b in s.items():
            m = b.matrix.reshape(dx, dy, dq, dx, dy, dq)
            xy = np.einsum("ayqbzq->aybz", m)      # trace out Q
            rho_x = np.einsum("ayby->ab", xy)
            p_t = float(np.real(np.trace(rho_x)))
            post = rho_x / p_t if forge else np.eye(dx) / dx
            for y in range(dy):
                blk = xy[:, y, :, y]
                p_y = float(np.real(np.trace(blk)))
                if p_y <= 1e-14:
                    continue
                proj = scheme.accept_projector(scheme.oracle_bits(y))
                r = float(np.real(np.trace(proj @ blk)))
                f = float(np.real(np.trace(proj @ post)))
                acc_real += r
                acc_forged += p_y * f
                acc_both += r * f
            real_avg += rho_x
            forged_avg += p_t * post
    w = 1 / K
    lay = RegisterLayout((spec.x_reg,))
    return CloningOutcome(
        K=K,
        real_verify=w * acc_real,
        forged_verify=w * acc_forged,
        both_verify=w * acc_both,
        real_note=DensityOperator(lay, w * real_avg),
        forged_note=DensityOperator(lay, w * forged_avg),
    )
