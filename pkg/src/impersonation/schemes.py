"""Concrete protocol families: random protocols, trigger keys, EPR authentication, toy money."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.stats import unitary_group

from . import cq
from . import protocol as P
from .oraclesim import OracleInstance, QueryLog, classical_query, sample_random_oracle
from .protocol import ProtocolSpec
from .qcore import (
    H,
    S,
    DensityOperator,
    RegisterLayout,
    cnot,
    kron_all,
    on_qubit,
    permutation,
)

# -- building blocks -----------------------------------------------------------


def xy_layout(nx: int, ny: int) -> RegisterLayout:
    return RegisterLayout.of(("X", nx, "Alice"), ("Y", ny, "Bob"))


def append_constant(width: int, msg_width: int, value: int = 0) -> np.ndarray:
    """|x> -> |x>|value>."""
    return permutation(lambda b: (b << msg_width) | value, width, width + msg_width)


def append_function(width: int, msg_width: int, fn: Callable[[int], int]) -> np.ndarray:
    """Classical copy-out |x> -> |x>|fn(x)>."""
    return permutation(lambda b: (b << msg_width) | fn(b), width, width + msg_width)


def basis_copy(width: int, qubit: int, basis: int) -> np.ndarray:
    """Coherently copy one qubit, read in the Z (0) or X (1) basis, into a fresh bit."""
    copy = append_function(width, 1, lambda b: (b >> (width - 1 - qubit)) & 1)
    if not basis:
        return copy
    h = on_qubit(H, qubit, width)
    return np.kron(h, np.eye(2)) @ copy @ h


def random_pure(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_density(rng: np.random.Generator, dim: int, rank: int = 2) -> np.ndarray:
    """Marginal of a Haar-random pure state on ``dim * rank``."""
    v = random_pure(rng, dim * rank).reshape(dim, rank)
    return v @ v.conj().T


def random_clifford(rng: np.random.Generator, width: int, depth: int = 12) -> np.ndarray:
    u = np.eye(1 << width, dtype=complex)
    for _ in range(depth):
        g = int(rng.integers(3)) if width > 1 else int(rng.integers(2))
        if g == 2:
            a, b = rng.choice(width, size=2, replace=False)
            u = cnot(int(a), int(b), width) @ u
        else:
            u = on_qubit(H if g == 0 else S, int(rng.integers(width)), width) @ u
    return u


def _last_bits(key: str, width: int) -> int:
    return int(key[-width:], 2) if key else 0


# -- simple and random protocols ----------------------------------------------

def constant_protocol(nx: int = 1, ny: int = 1, t: int = 1, *, entangled: bool = True,
                      max_rounds: int = 128) -> ProtocolSpec:
    """Alice always sends 0 and Bob always answers 0."""
    lay = xy_layout(nx, ny)
    if entangled and nx == ny:
        d = 1 << nx
        init = DensityOperator.from_pure(lay, np.eye(d).reshape(-1) / math.sqrt(d))
    else:
        init = DensityOperator.basis(lay, "0" * (nx + ny))
    va, vb = append_constant(nx, 1), append_constant(ny, 1)
    return ProtocolSpec(f"constant-{nx}x{ny}-t{t}", init, t, 1, 1,
                        lambda i, k: va, lambda i, k: vb, max_rounds, memory=lambda k: (),
                        params={"entangled": entangled, "nx": nx, "ny": ny})


def random_clifford_protocol(seed: int, t: int = 1, *, mixed: bool = False,
                             max_rounds: int = 128) -> ProtocolSpec:
    """One qubit each side; every step applies a Clifford picked by (step, last symbol)."""
    rng = np.random.default_rng([seed, 0])
    lay = xy_layout(1, 1)
    init = (DensityOperator(lay, random_density(rng, 4)) if mixed
            else DensityOperator.from_pure(lay, random_pure(rng, 4)))

    @lru_cache(maxsize=None)
    def chan(side: int, i: int, sym: int) -> np.ndarray:
        return random_clifford(np.random.default_rng([seed, side, i, sym]), 2)[:, ::2]

    return ProtocolSpec(
        f"clifford-s{seed}-t{t}{'-mixed' if mixed else ''}", init, t, 1, 1,
        lambda i, k: chan(0, i, _last_bits(k, 1)),
        lambda i, k: chan(1, i, _last_bits(k, 1)),
        max_rounds, memory=lambda k: (), params={"seed": seed, "mixed": mixed},
    )


def haar_protocol(seed: int, nx: int = 1, ny: int = 1, t: int = 1, *, burst: int | None = None,
                  mixed: bool = False, max_rounds: int = 128) -> ProtocolSpec:
    """Haar-random channels for the first ``burst`` rounds, constant messages afterwards.

    Each channel depends on the step and on the symbol received in that step,
    so a fresh 4-way fan-out happens at every burst step.
    """
    rng = np.random.default_rng([seed, 0])
    lay = xy_layout(nx, ny)
    init = (DensityOperator(lay, random_density(rng, lay.dim)) if mixed
            else DensityOperator.from_pure(lay, random_pure(rng, lay.dim)))
    burst_steps = burst * t if burst is not None else None

    @lru_cache(maxsize=None)
    def chan(side: int, i: int, sym: int) -> np.ndarray:
        w = nx if side == 0 else ny
        if burst_steps is not None and i >= burst_steps + side:
            return append_constant(w, 1)
        u = unitary_group.rvs(1 << (w + 1), random_state=np.random.default_rng([seed, side, i, sym]))
        return u[:, ::2]

    name = f"haar-s{seed}-{nx}x{ny}-t{t}" + (f"-b{burst}" if burst is not None else "") + ("-mixed" if mixed else "")
    return ProtocolSpec(
        name, init, t, 1, 1,
        lambda i, k: chan(0, i, _last_bits(k, 1)),
        lambda i, k: chan(1, i, _last_bits(k, 1)),
        max_rounds, memory=lambda k: (),
        params={"seed": seed, "nx": nx, "ny": ny, "burst": burst, "mixed": mixed},
    )


def alternating_basis_protocol(t: int = 1, max_rounds: int = 128) -> ProtocolSpec:
    """Alice's qubit is half of a Bell pair; she reads it alternately in the Z and X bases.

    Every message after a basis switch is a fresh uniformly random bit, yet
    Alice's conditional entropy never rises.
    """
    lay = xy_layout(1, 1)
    init = DensityOperator.from_pure(lay, np.array([1, 0, 0, 1]) / math.sqrt(2))
    reads = [basis_copy(1, 0, 0), basis_copy(1, 0, 1)]
    vb = append_constant(1, 1)
    return ProtocolSpec(f"alternating-t{t}", init, t, 1, 1,
                        lambda i, k: reads[i % 2], lambda i, k: vb, max_rounds,
                        memory=lambda k: (), params={})


# -- trigger keys -----------------------------------------------------------

@dataclass(frozen=True)
class TriggerKey:
    """Key layout: ``count`` trigger slots of ``slot_bits`` bits each."""

    n: int
    K: int
    count: int
    slot_bits: int

    def trigger_rounds(self, key: int) -> tuple[int, ...]:
        out = []
        for j in range(self.count):
            shift = self.n - (j + 1) * self.slot_bits
            out.append(((key >> shift) & (self.K - 1)) + 1)
        return tuple(out)

    def message(self, key: int, rnd: int) -> int:
        """Parity of the triggers already passed by round ``rnd``."""
        return sum(r <= rnd for r in self.trigger_rounds(key)) & 1

    def support(self, first_trigger: int | None = None) -> list[int]:
        used = self.count * self.slot_bits
        keys = [x << (self.n - used) for x in range(1 << used)]
        if first_trigger is not None:
            keys = [x for x in keys if self.trigger_rounds(x)[0] == first_trigger]
        return keys


def trigger_protocol(n: int, K: int, t: int = 1, *, bob_checks: bool = True,
                     first_trigger: int | None = None) -> ProtocolSpec:
    """Classical key protocol whose message flips at key-encoded rounds.

    With ``bob_checks`` Bob holds a copy of the key and answers whether the
    message is consistent with it; otherwise he echoes.  ``first_trigger``
    conditions the key on the first trigger firing at that round.
    """
    slot = int(round(math.log2(K)))
    if 1 << slot != K or slot < 1:
        raise ValueError("K must be a power of two >= 2")
    count = n // slot
    if count < 1:
        raise ValueError(f"n={n} bits cannot hold a trigger among {K} rounds")
    tk = TriggerKey(n, K, count, slot)
    keys = tk.support(first_trigger)
    if not keys:
        raise ValueError("no key has that trigger round")
    ny = n if bob_checks else 1
    lay = xy_layout(n, ny)
    diag = np.zeros(lay.dim)
    for x in keys:
        diag[(x << ny) | (x if bob_checks else 0)] = 1 / len(keys)
    init = DensityOperator(lay, np.diag(diag).astype(complex))

    @lru_cache(maxsize=None)
    def alice(i: int) -> np.ndarray:
        rnd = i // t + 1                     # round of the message being prepared
        return append_function(n, 1, lambda x: tk.message(x, rnd))

    @lru_cache(maxsize=None)
    def bob(i: int, q: int) -> np.ndarray:
        if not bob_checks:
            return append_constant(ny, 1, q)
        rnd = (i - 1) // t + 1
        return append_function(ny, 1, lambda y: int(tk.message(y, rnd) == q))

    name = f"trigger-n{n}-K{K}-t{t}" + ("" if bob_checks else "-echo")
    if first_trigger is not None:
        name += f"-at{first_trigger}"
    return ProtocolSpec(
        name, init, t, 1, 1,
        lambda i, k: alice(i), lambda i, k: bob(i, _last_bits(k, 1)),
        max(2 * K + 2, 128), memory=lambda k: (),
        params={"K": K, "triggers": count, "bob_checks": bob_checks, "first_trigger": first_trigger},
    )


# -- EPR authentication ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AuthScheme:
    spec: ProtocolSpec
    completeness: float
    accept_position: int          # index of Bob's accept bit inside one round's transcript

    def accepted(self, round_suffix: str) -> bool:
        return round_suffix[self.accept_position] == "1"


def epr_auth(pairs: int, rounds: int | None = None, max_rounds: int = 256) -> AuthScheme:
    """Bell-pair authentication, two message pairs per round.

    Step 1: Alice sends a dummy bit, Bob answers a uniformly random basis
    challenge.  Step 2: Alice reads the round's pair in that basis and sends
    the outcome; Bob reads his half in the same basis and answers 1 iff they
    agree.  Once every pair has been used, rounds cycle through the pairs
    again and Bob reissues the basis stored from the pair's first use, so
    honest repeats stay accepted.
    """
    if pairs < 1:
        raise ValueError("need at least one pair")
    lay = xy_layout(pairs, pairs)
    d = 1 << pairs
    init = DensityOperator.from_pure(lay, np.eye(d).reshape(-1) / math.sqrt(d))
    plus = np.kron(np.eye(d), np.array([[1], [1]]) / math.sqrt(2))

    def stored_basis(key: str, pair: int) -> int:
        return int(key[4 * pair + 1])

    @lru_cache(maxsize=None)
    def alice_read(pair: int, basis: int) -> np.ndarray:
        return basis_copy(pairs, pair, basis)

    @lru_cache(maxsize=None)
    def bob_check(pair: int, basis: int, q: int) -> np.ndarray:
        h = on_qubit(H, pair, pairs) if basis else np.eye(d)
        check = append_function(pairs, 1, lambda y: int(((y >> (pairs - 1 - pair)) & 1) == q))
        return np.kron(h, np.eye(2)) @ check @ h

    dummy = append_constant(pairs, 1)

    def alice(i: int, key: str) -> np.ndarray:
        if i % 2 == 0:                       # next step opens a round
            return dummy
        rnd = (i - 1) // 2 + 1
        return alice_read((rnd - 1) % pairs, int(key[-1]))

    def bob(i: int, key: str) -> np.ndarray:
        rnd = (i - 1) // 2 + 1
        pair = (rnd - 1) % pairs
        if i % 2 == 1:
            if rnd <= pairs:
                return plus
            return append_constant(pairs, 1, stored_basis(key, pair))
        return bob_check(pair, int(key[-2]), int(key[-1]))

    def memory(key: str) -> tuple:
        bases = tuple(key[4 * p + 1] for p in range(pairs) if 4 * p + 1 < len(key))
        return bases + ((key[-1],) if len(key) % 4 == 2 else ())

    spec = ProtocolSpec(f"epr-auth-p{pairs}", init, 2, 1, 1, alice, bob, max_rounds,
                        memory=memory, params={"pairs": pairs})
    horizon = rounds if rounds is not None else pairs
    completeness = honest_acceptance(spec, horizon, 3)
    return AuthScheme(spec, min(completeness), 3)


def honest_acceptance(spec: ProtocolSpec, rounds: int, position: int) -> list[float]:
    """Per-round probability that the bit at ``position`` of the round transcript is 1."""
    per_round = (spec.q_width + spec.a_width) * spec.t
    out = []
    for i, s, _ in P.iterate(spec, rounds * spec.t, instrument=False):
        if i == 0 or i % spec.t:
            continue
        start = (i // spec.t - 1) * per_round
        out.append(math.fsum(p for k, p in cq.classical_marginal(s).items() if k[start + position] == "1"))
    return out


# -- toy quantum money ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ToyMoneyScheme:
    """BB84-style notes whose bases and values sit behind a random oracle.

    Oracle inputs are ``pk | index | field`` with field 0 for the basis and 1
    for the value of a note qubit.  Verification only ever issues classical
    queries.
    """

    note_qubits: int
    public: bool = False
    quantum_queries: bool = field(default=False, init=False)

    def __post_init__(self):
        if not 1 <= self.note_qubits <= 4:
            raise ValueError("toy money supports 1..4 note qubits")

    @property
    def index_width(self) -> int:
        return max(0, math.ceil(math.log2(self.note_qubits)))

    @property
    def input_width(self) -> int:
        return 2 + self.index_width

    @property
    def t(self) -> int:
        return 2 * self.note_qubits + 1

    @property
    def verdict_position(self) -> int:
        """Index of the accept bit inside one round of the reduction transcript."""
        return (self.t - 1) * (self.input_width + 1) + self.input_width - 1

    def query(self, pk: int, index: int, fld: int) -> str:
        idx = format(index, f"0{self.index_width}b") if self.index_width else ""
        return f"{pk}{idx}{fld}"

    # concrete algorithms
    def gen(self, seed: int) -> tuple[int, OracleInstance, DensityOperator, QueryLog]:
        pk = int(np.random.default_rng([seed, 1]).integers(2))
        oracle = sample_random_oracle(self.input_width, 1, seed)
        log = QueryLog()
        bits = []
        for i in range(self.note_qubits):
            b = 0 if self.public else int(classical_query(oracle, log, "Gen", self.query(pk, i, 0)))
            v = int(classical_query(oracle, log, "Gen", self.query(pk, i, 1)))
            bits += [b, v]
        return pk, oracle, self.note(tuple(bits)), log

    def note(self, bits: tuple[int, ...]) -> DensityOperator:
        vec = kron_all([_bb84(bits[2 * i], bits[2 * i + 1])[:, None] for i in range(self.note_qubits)])[:, 0]
        lay = RegisterLayout.of(("X", self.note_qubits, "Alice"))
        return DensityOperator.from_pure(lay, vec)

    def accept_projector(self, bits: tuple[int, ...]) -> np.ndarray:
        return self.note(bits).matrix

    def oracle_bits(self, y: int) -> tuple[int, ...]:
        w = 2 * self.note_qubits
        return tuple((y >> (w - 1 - j)) & 1 for j in range(w))

    def ver(self, note: DensityOperator, pk: int, oracle: OracleInstance,
            log: QueryLog) -> tuple[float, DensityOperator]:
        """Exact acceptance probability and the post-acceptance note."""
        bits = []
        for i in range(self.note_qubits):
            bits.append(int(classical_query(oracle, log, "Ver", self.query(pk, i, 0))))
            bits.append(int(classical_query(oracle, log, "Ver", self.query(pk, i, 1))))
        if self.public:
            bits[0::2] = [0] * self.note_qubits
        proj = self.accept_projector(tuple(bits))
        post = proj @ note.matrix @ proj
        p = float(np.real(np.trace(post)))
        return p, DensityOperator(note.layout, post / p if p > 0 else post)

    # the reduction to an interactive protocol
    def reduction_spec(self, oracle: OracleInstance | None = None, pk: int = 0,
                       max_rounds: int = 512) -> ProtocolSpec:
        """Alice = repeated Ver on the note, Bob = the oracle.

        Each round has 2m query steps (Alice sends x, Bob answers O(x)) and a
        final step where Alice announces the verdict and Bob answers 0.  Y holds
        the 2m oracle bits under ``pk``; with no ``oracle`` it is a uniform
        classical mixture over all of them.
        """
        m = self.note_qubits
        wq, wy = self.input_width, 2 * m
        t = self.t
        lay = xy_layout(m, wy)
        dx, dy = 1 << m, 1 << wy
        if oracle is None:
            ys = list(range(dy)) if not self.public else [y for y in range(dy) if not any(self.oracle_bits(y)[0::2])]
            weights = {y: 1 / len(ys) for y in ys}
        else:
            y = 0
            for i in range(m):
                for f in (0, 1):
                    bit = 0 if (self.public and f == 0) else int(oracle.lookup(self.query(pk, i, f)))
                    y = (y << 1) | bit
            weights = {y: 1.0}
        rho = np.zeros((dx * dy, dx * dy), dtype=complex)
        for y, w in weights.items():
            rho += w * np.kron(self.note(self.oracle_bits(y)).matrix, _basis_proj(dy, y))
        init = DensityOperator(lay, rho)

        queries = [int(self.query(pk, j // 2, j % 2), 2) for j in range(2 * m)]

        @lru_cache(maxsize=None)
        def announce(answers: tuple[int, ...]) -> np.ndarray:
            proj = self.accept_projector(answers)
            # |x> -> Pi|x>|1> + (1 - Pi)|x>|0>, zero-padded into the query width
            v = np.zeros((dx << wq, dx), dtype=complex)
            for q_val, op in ((1, proj), (0, np.eye(dx) - proj)):
                for x in range(dx):
                    v[np.arange(dx) * (1 << wq) + q_val, x] += op[:, x]
            return v

        @lru_cache(maxsize=None)
        def constant(q_val: int) -> np.ndarray:
            return append_constant(m, wq, q_val)

        @lru_cache(maxsize=None)
        def oracle_answer(q_val: int) -> np.ndarray:
            bits = format(q_val, f"0{wq}b")
            idx = int(bits[1:1 + self.index_width], 2) if self.index_width else 0
            pos = 2 * idx + int(bits[-1])
            if idx >= m or int(bits[0]) != pk:
                return append_constant(wy, 1)
            return append_function(wy, 1, lambda y: (y >> (wy - 1 - pos)) & 1)

        bob_dummy = append_constant(wy, 1)
        chunk = wq + 1

        def answers_in_round(key: str) -> tuple[int, ...]:
            steps = len(key) // chunk
            pos = steps % t
            return tuple(int(key[(s + 1) * chunk - 1]) for s in range(steps - pos, steps))

        def alice(i: int, key: str) -> np.ndarray:
            pos = i % t                        # position of the message being prepared
            if pos < 2 * m:
                return constant(queries[pos])
            answers = answers_in_round(key)
            if self.public:
                answers = tuple(0 if j % 2 == 0 else a for j, a in enumerate(answers))
            return announce(answers)

        def bob(i: int, key: str) -> np.ndarray:
            if (i - 1) % t == 2 * m:
                return bob_dummy
            return oracle_answer(int(key[-wq:], 2))

        name = f"toy-money-m{m}" + ("-public" if self.public else "") + ("" if oracle is None else "-fixed")
        return ProtocolSpec(name, init, t, wq, 1, alice, bob, max_rounds,
                            memory=answers_in_round, params={"note_qubits": m, "public": self.public})

    def reduction_transcript(self, log: QueryLog, verdicts: list[int]) -> str:
        """Flatten a Ver query log plus verdict bits into the reduction's transcript key."""
        per = 2 * self.note_qubits
        entries = [e for e in log if e.party == "Ver"]
        if len(entries) != per * len(verdicts):
            raise ValueError("log does not match the number of verifications")
        out = []
        for r, b in enumerate(verdicts):
            for e in entries[r * per:(r + 1) * per]:
                out.append(e.x + e.y)
            out.append(format(b, f"0{self.input_width}b") + "0")
        return "".join(out)


def toy_money(note_qubits: int, *, public: bool = False) -> ToyMoneyScheme:
    return ToyMoneyScheme(note_qubits, public)


def reusable_correctness(scheme: ToyMoneyScheme, seed: int, verifications: int) -> float:
    """Exact probability that an honest note passes ``verifications`` checks in a row."""
    pk, oracle, note, _ = scheme.gen(seed)
    log = QueryLog()
    total = 1.0
    for _ in range(verifications):
        p, note = scheme.ver(note, pk, oracle, log)
        total *= p
    return total


def _bb84(basis: int, value: int) -> np.ndarray:
    v = np.zeros(2, dtype=complex)
    v[value] = 1
    return H @ v if basis else v


def _basis_proj(d: int, j: int) -> np.ndarray:
    m = np.zeros((d, d), dtype=complex)
    m[j, j] = 1
    return m


SCHEMES = ("constant", "clifford", "haar", "alternating", "trigger", "epr-auth", "toy-money")
