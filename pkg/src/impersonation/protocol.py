"""Interaction engine for Alice/Bob protocols over a classical channel.

Branch states live on registers ``(X, Y, Q)``: Alice's private register, Bob's
private register and Alice's pending message.  One step ``i``:

1. ``Q`` is measured; its value ``q_i`` is appended to the key and ``Q`` dropped.
2. Bob applies ``Y -> Y A`` (classically controlled on the key so far); ``A``
   is measured, ``a_i`` appended, ``A`` dropped.
3. Alice applies ``X -> X Q`` (controlled on the key so far) preparing the
   next message.

Coherent copies of messages are never held as qubits: the cq key carries them.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterator

import numpy as np

from . import cq
from .cq import A2B, B2A, CqState
from .infomeasures import EIG_ZERO
from .qcore import (
    PRUNE,
    DensityOperator,
    QubitCapExceeded,
    Isometry,
    Register,
    RegisterLayout,
    apply_isometry,
    apply_local,
    cnot,
    partial_trace,
    qubit_cap,
)

DEFAULT_BRANCH_CAP = 4096
MERGE_DECIMALS = 10

Channel = Callable[[int, str], np.ndarray]


class BranchCapExceeded(RuntimeError):
    def __init__(self, step: int, count: int, cap: int):
        super().__init__(f"step {step}: {count} branches exceed cap {cap}")
        self.step = step
        self.count = count
        self.cap = cap


@dataclass(frozen=True, eq=False)
class ProtocolSpec:
    """One protocol instance.

    ``alice(i, key)`` returns the matrix of Alice's isometry ``X -> X Q`` that
    prepares message ``q_{i+1}`` (``i = 0`` prepares the first message, with an
    empty key).  ``bob(i, key)`` returns Bob's isometry ``Y -> Y A`` answering
    ``q_i``; its key ends with ``q_i``.

    ``memory``, when given, maps a key to everything the channels read from
    it.  Branches with equal memory and equal state are then merged.
    """

    name: str
    initial: DensityOperator
    t: int
    q_width: int
    a_width: int
    alice: Channel
    bob: Channel
    max_rounds: int = 64
    memory: Callable[[str], Hashable] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.initial.layout.names != ("X", "Y"):
            raise ValueError("initial state must be on registers (X, Y)")
        if self.t < 1 or self.q_width < 1 or self.a_width < 1:
            raise ValueError("t and message widths must be >= 1")
        if self.n < 1:
            raise ValueError("Alice needs at least one qubit")
        width = self.initial.layout.total_width + max(self.q_width, self.a_width)
        if width > qubit_cap():
            raise QubitCapExceeded(f"protocol needs {width} live qubits, cap is {qubit_cap()}")

    @property
    def n(self) -> int:
        return self.initial.layout.get("X").width

    @property
    def x_reg(self) -> Register:
        return self.initial.layout.get("X")

    @property
    def y_reg(self) -> Register:
        return self.initial.layout.get("Y")

    def round_of(self, i: int) -> int:
        """1-based round containing global step ``i``."""
        return (i - 1) // self.t + 1

    def schema(self, steps: int) -> tuple[tuple[str, int], ...]:
        return ((A2B, self.q_width), (B2A, self.a_width)) * steps

    def describe(self) -> dict:
        return {"name": self.name, "n": self.n, "t": self.t, **self.params}


@dataclass(frozen=True)
class StepTrace:
    step: int
    h_x_given_transcript: float
    h_x_mid: float
    cmi_yq: float
    cmi_xa: float
    branches: int

    def as_dict(self) -> dict:
        return {"step": self.step, "h_x": self.h_x_given_transcript, "h_x_mid": self.h_x_mid,
                "cmi_yq": self.cmi_yq, "cmi_xa": self.cmi_xa, "branches": self.branches}


# -- raw kernels ------------------------------------------------------------
# All kernels act on stacks of matrices with a leading branch axis.

def _traces(stack: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("...ii->...", stack))


def _blocks(stack: np.ndarray, d_rest: int, d_last: int) -> np.ndarray:
    """(B, D, D) on (rest, last) -> (B, d_last, d_rest, d_rest) diagonal blocks of ``last``."""
    t = stack.reshape(-1, d_rest, d_last, d_rest, d_last)
    return np.einsum("zaobo->zoab", t)


def _blocks_last(m: np.ndarray, d_rest: int, d_last: int) -> list[tuple[int, np.ndarray]]:
    blk = _blocks(m[None], d_rest, d_last)[0]
    tr = _traces(blk)
    total = tr.sum()
    return [(o, np.ascontiguousarray(blk[o])) for o in range(d_last) if tr[o] > PRUNE * total]


def _ent_batch(stack: np.ndarray) -> np.ndarray:
    tr = _traces(stack)
    ev = np.linalg.eigvalsh(stack / tr[:, None, None])
    safe = np.where(ev > EIG_ZERO, ev, 1.0)
    return -np.sum(np.where(ev > EIG_ZERO, ev * np.log2(safe), 0.0), axis=-1)


def _ent(m: np.ndarray) -> float:
    return float(_ent_batch(m[None])[0])


def _marg_batch(stack: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    k = len(dims)
    t = stack.reshape((-1,) + dims * 2)
    letters = "abcdefgh"
    rows = [letters[j] for j in range(k)]
    cols = [letters[j] if j not in keep else letters[j].upper() for j in range(k)]
    out = "z" + "".join(rows[j] for j in keep) + "".join(cols[j] for j in keep)
    red = np.einsum("z" + "".join(rows) + "".join(cols) + "->" + out, t)
    d = math.prod(dims[j] for j in keep)
    return red.reshape(-1, d, d)


def _marg(m: np.ndarray, dims: tuple[int, ...], keep: tuple[int, ...]) -> np.ndarray:
    return _marg_batch(m[None], dims, keep)[0]


def _as_matrix(v) -> np.ndarray:
    return v.matrix if isinstance(v, Isometry) else np.asarray(v, dtype=complex)


def _alice_apply(m: np.ndarray, dx: int, dy: int, va: np.ndarray) -> np.ndarray:
    """State(s) on (X, Y) -> (X, Y, Q) under Alice's ``X -> X Q`` isometry."""
    dq = va.shape[0] // dx
    out = apply_local(m, (dx, dy), 0, va)                   # rows ordered (x, q, y)
    batch = m.shape[:-2]
    t = out.reshape(*batch, dx, dq, dy, dx, dq, dy)
    nb = len(batch)
    perm = tuple(range(nb)) + tuple(nb + j for j in (0, 2, 1, 3, 5, 4))
    return t.transpose(perm).reshape(*batch, dx * dy * dq, dx * dy * dq)


def _bob_apply(m: np.ndarray, dx: int, dy: int, vb: np.ndarray) -> np.ndarray:
    """State(s) on (X, Y) -> (X, Y, A)."""
    return apply_local(m, (dx, dy), 1, vb)


def _grouped(keys: list[str], stack: np.ndarray, chan: Callable[[str], object],
             kernel: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply per-branch channels, batching branches that received the same matrix object."""
    mats = [chan(k) for k in keys]
    groups: dict[int, list[int]] = {}
    for j, v in enumerate(mats):
        groups.setdefault(id(v), []).append(j)
    out = None
    for idx in groups.values():
        res = kernel(stack[idx], _as_matrix(mats[idx[0]]))
        if out is None:
            out = np.empty((len(keys),) + res.shape[1:], dtype=complex)
        out[idx] = res
    return out


def _split(keys: list[str], stack: np.ndarray, d_rest: int, d_last: int, width: int
           ) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Measure the last register of every branch; drop outcomes of negligible weight."""
    blk = _blocks(stack, d_rest, d_last)
    tr = _traces(blk)
    keep = tr > PRUNE * tr.sum(axis=1, keepdims=True)
    bi, oi = np.nonzero(keep)
    labels = [format(o, f"0{width}b") for o in range(d_last)]
    new_keys = [keys[b] + labels[o] for b, o in zip(bi, oi)]
    return new_keys, blk[bi, oi], tr[bi, oi]


# -- engine -----------------------------------------------------------------

def layout_xyq(spec: ProtocolSpec) -> RegisterLayout:
    return RegisterLayout((spec.x_reg, spec.y_reg, Register("Q", spec.q_width, "Message")))


def init(spec: ProtocolSpec) -> CqState:
    """Initial state with Alice's first message register prepared."""
    dx, dy = spec.x_reg.dim, spec.y_reg.dim
    m = _alice_apply(spec.initial.matrix, dx, dy, _as_matrix(spec.alice(0, "")))
    return CqState(layout_xyq(spec), {"": DensityOperator(layout_xyq(spec), m)}, ())


def initial_entropy(spec: ProtocolSpec) -> float:
    """H(X) of Alice's initial register."""
    return _ent(partial_trace(spec.initial, ["X"]).matrix)


def step(s: CqState, spec: ProtocolSpec, i: int, *,
         after_q: Callable[[CqState], CqState] | None = None,
         instrument: bool = True) -> tuple[CqState, StepTrace | None]:
    """Advance every branch by message pair ``i`` (1-based, global)."""
    dx, dy, dq = spec.x_reg.dim, spec.y_reg.dim, 1 << spec.q_width
    da = 1 << spec.a_width
    wq, wa = spec.q_width, spec.a_width
    lay = layout_xyq(spec)
    keys = list(s.branches)
    if not keys:
        raise ValueError("empty ensemble")
    stack = np.stack([b.matrix for b in s.branches.values()])

    if instrument:
        w0 = _traces(stack)
        h_y_before = float(w0 @ _ent_batch(_marg_batch(stack, (dx, dy, dq), (1,))))

    keys, mid, pm = _split(keys, stack, dx * dy, dq, wq)
    if after_q is not None:
        lay_xy = RegisterLayout((spec.x_reg, spec.y_reg))
        tmp = CqState(lay_xy, {k: DensityOperator(lay_xy, v) for k, v in zip(keys, mid)},
                      s.schema + ((A2B, wq),))
        tmp = after_q(tmp)
        keys = list(tmp.branches)
        mid = np.stack([b.matrix for b in tmp.branches.values()])
        pm = _traces(mid)

    if instrument:
        h_x_mid = float(pm @ _ent_batch(_marg_batch(mid, (dx, dy), (0,))))
        h_y_mid = float(pm @ _ent_batch(_marg_batch(mid, (dx, dy), (1,))))

    mb = _grouped(keys, mid, lambda k: spec.bob(i, k), lambda m, v: _bob_apply(m, dx, dy, v))
    keys, post, pa = _split(keys, mb, dx * dy, da, wa)
    if instrument:
        h_x_post = float(pa @ _ent_batch(_marg_batch(post, (dx, dy), (0,))))
    ma = _grouped(keys, post, lambda k: spec.alice(i, k), lambda m, v: _alice_apply(m, dx, dy, v))

    out = {k: DensityOperator(lay, m) for k, m in zip(keys, ma)}
    new = CqState(lay, out, s.schema + ((A2B, wq), (B2A, wa)))
    if not instrument:
        return new, None
    tr = StepTrace(step=i, h_x_given_transcript=h_x_post, h_x_mid=h_x_mid,
                   cmi_yq=h_y_before - h_y_mid, cmi_xa=h_x_mid - h_x_post,
                   branches=len(new))
    return new, tr


def _state_digest(m: np.ndarray) -> bytes:
    tr = float(np.real(np.trace(m)))
    r = np.round(m / tr, MERGE_DECIMALS) + 0.0
    return hashlib.blake2b(np.ascontiguousarray(r).tobytes(), digest_size=16).digest()


def merge(s: CqState, spec: ProtocolSpec) -> CqState:
    """Lump branches whose futures coincide (same memory, same normalized state).

    The lumped branch keeps the smallest key as representative.  Exact for
    every transcript-linear quantity provided ``spec.memory`` is faithful.
    """
    if spec.memory is None or len(s) < 2:
        return s
    groups: dict[tuple, list[str]] = {}
    for key, b in s.items():
        groups.setdefault((spec.memory(key), _state_digest(b.matrix)), []).append(key)
    if len(groups) == len(s):
        return s
    out = {}
    for keys in groups.values():
        rep = min(keys)
        w = math.fsum(s.branches[k].trace for k in keys)
        out[rep] = s.branches[rep].normalized().scaled(w)
    return CqState(s.layout, dict(sorted(out.items())), s.schema)


def iterate(spec: ProtocolSpec, steps: int, *, lump: bool = True, instrument: bool = True,
            branch_cap: int = DEFAULT_BRANCH_CAP) -> Iterator[tuple[int, CqState, StepTrace | None]]:
    """Yield ``(i, state_after_step_i, trace)`` for i = 0..steps (i = 0 is the initial state)."""
    s = init(spec)
    yield 0, s, None
    for i in range(1, steps + 1):
        s, tr = step(s, spec, i, instrument=instrument)
        if lump:
            s = merge(s, spec)
            if tr is not None:
                tr = StepTrace(tr.step, tr.h_x_given_transcript, tr.h_x_mid,
                               tr.cmi_yq, tr.cmi_xa, len(s))
        if len(s) > branch_cap:
            raise BranchCapExceeded(i, len(s), branch_cap)
        yield i, s, tr


def run(spec: ProtocolSpec, rounds: int, *, lump: bool = False,
        branch_cap: int = DEFAULT_BRANCH_CAP) -> tuple[CqState, list[StepTrace]]:
    """Run ``rounds`` full rounds (``rounds * t`` steps)."""
    if rounds > spec.max_rounds:
        raise ValueError(f"{rounds} rounds exceed max_rounds={spec.max_rounds}")
    traces = []
    s = None
    for _, s, tr in iterate(spec, rounds * spec.t, lump=lump, branch_cap=branch_cap):
        if tr is not None:
            traces.append(tr)
    return s, traces


def entropy_trace_monotone(traces: list[StepTrace], start: float | None = None,
                           tol: float = 1e-8) -> tuple[bool, int | None]:
    """Check that H(X-side | transcript) never increases, including the mid-step values.

    Returns ``(ok, first_violating_step)``.
    """
    prev = start
    for tr in traces:
        for v in (tr.h_x_mid, tr.h_x_given_transcript):
            if prev is not None and v > prev + tol:
                return False, tr.step
            prev = v
    return True, None


def telescoping_sums(traces: list[StepTrace]) -> tuple[float, float]:
    """(sum_i I(Y;Q_i|Q<i A<i), sum_i I(X;A_i|Q<=i A<i))."""
    return (math.fsum(t.cmi_yq for t in traces), math.fsum(t.cmi_xa for t in traces))


# -- deferred measurement ---------------------------------------------------

def deferred_distribution(spec: ProtocolSpec, steps: int) -> dict[str, float]:
    """Transcript distribution with every measurement replaced by a coherent copy.

    Copies accumulate in registers ``C1, C2, ...``; channels are controlled
    coherently on the copies.  Only a terminal dephasing of the copies is
    performed.  Practical for a handful of steps only.
    """
    wq, wa = spec.q_width, spec.a_width
    state = DensityOperator(RegisterLayout((spec.x_reg, spec.y_reg)), spec.initial.matrix)
    state = apply_isometry(state, _controlled([], "X", spec.x_reg, Register("Q", wq, "Message"),
                                              lambda h: _as_matrix(spec.alice(0, h))))
    copies: list[Register] = []

    for i in range(1, steps + 1):
        cq_reg = Register(f"C{len(copies) + 1}", wq, "Message")
        state = apply_isometry(state, _copy("Q", cq_reg))
        copies.append(cq_reg)
        state = apply_isometry(state, _copy_back(cq_reg, "Q"))
        state = partial_trace(state, [n for n in state.layout.names if n != "Q"])
        state = apply_isometry(state, _controlled(copies, "Y", spec.y_reg, Register("A", wa, "Message"),
                                                  lambda h, i=i: _as_matrix(spec.bob(i, h))))
        ca_reg = Register(f"C{len(copies) + 1}", wa, "Message")
        state = apply_isometry(state, _copy("A", ca_reg))
        copies.append(ca_reg)
        state = apply_isometry(state, _copy_back(ca_reg, "A"))
        state = partial_trace(state, [n for n in state.layout.names if n != "A"])
        state = apply_isometry(state, _controlled(copies, "X", spec.x_reg, Register("Q", wq, "Message"),
                                                  lambda h, i=i: _as_matrix(spec.alice(i, h))))

    red = partial_trace(state, [c.name for c in copies])
    red = red.reorder([c.name for c in copies])
    width = sum(c.width for c in copies)
    diag = np.real(np.diag(red.matrix))
    return {format(j, f"0{width}b"): float(p) for j, p in enumerate(diag) if p > PRUNE}


def _copy(src: str, dst: Register) -> Isometry:
    """|v>_src -> |v>_src |v>_dst."""
    w = dst.width
    d = 1 << w
    m = np.zeros((d * d, d), dtype=complex)
    for v in range(d):
        m[v * d + v, v] = 1
    return Isometry((src,), (Register(src, w, "Message"), dst), m)


def _copy_back(ctrl: Register, target: str) -> Isometry:
    """Uncompute ``target`` by XOR-ing the copy into it (target returns to |0>)."""
    w = ctrl.width
    d = 1 << w
    m = np.zeros((d * d, d * d), dtype=complex)
    for c in range(d):
        for v in range(d):
            m[c * d + (v ^ c), c * d + v] = 1
    return Isometry((ctrl.name, target), (ctrl, Register(target, w, "Message")), m)


def _controlled(copies: list[Register], reg: str, reg_def: Register, fresh: Register,
                fn: Callable[[str], np.ndarray]) -> Isometry:
    """Block-diagonal isometry ``sum_h |h><h| (x) V_h`` on (copies..., reg) -> (copies..., reg, fresh)."""
    width = sum(c.width for c in copies)
    blocks = []
    for h in range(1 << width):
        blocks.append(fn(format(h, f"0{width}b") if width else ""))
    din = reg_def.dim
    dout = blocks[0].shape[0]
    m = np.zeros(((1 << width) * dout, (1 << width) * din), dtype=complex)
    for h, v in enumerate(blocks):
        m[h * dout:(h + 1) * dout, h * din:(h + 1) * din] = v
    return Isometry(tuple(c.name for c in copies) + (reg,), tuple(copies) + (reg_def, fresh), m)


def coherent_copy() -> Isometry:
    """The 1-qubit coherent measurement |x> -> |x>|x> from Q to Q'."""
    return Isometry(("Q",), (Register("Q", 1, "Message"), Register("Q'", 1, "Message")),
                    cnot(0, 1, 2)[:, [0, 2]])
