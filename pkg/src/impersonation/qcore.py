"""Dense linear algebra over named multi-qubit registers.

Every operator carries a :class:`RegisterLayout`; all index arithmetic is
derived from it.  Matrix indices are big-endian in declaration order, so for
layout ``(X, Y)`` the basis state ``|x>|y>`` sits at ``x * dim(Y) + y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

OWNERS = ("Alice", "Bob", "Message", "Environment")

DEFAULT_QUBIT_CAP = 12
ATOL = 1e-10
PRUNE = 1e-12


class QubitCapExceeded(ValueError):
    pass


class LayoutError(ValueError):
    pass


_cap = DEFAULT_QUBIT_CAP


def qubit_cap() -> int:
    return _cap


def set_qubit_cap(cap: int) -> int:
    """Set the global qubit cap, returning the previous value."""
    global _cap
    old, _cap = _cap, int(cap)
    return old


@dataclass(frozen=True)
class Register:
    name: str
    width: int
    owner: str = "Alice"

    def __post_init__(self):
        if self.width < 1:
            raise LayoutError(f"register {self.name!r} must have width >= 1")
        if self.owner not in OWNERS:
            raise LayoutError(f"unknown owner {self.owner!r}")

    @property
    def dim(self) -> int:
        return 1 << self.width


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[Register, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        regs = tuple(self.registers)
        object.__setattr__(self, "registers", regs)
        index = {}
        for pos, r in enumerate(regs):
            if r.name in index:
                raise LayoutError(f"duplicate register name {r.name!r}")
            index[r.name] = pos
        object.__setattr__(self, "_index", index)
        if self.total_width > _cap:
            raise QubitCapExceeded(
                f"layout needs {self.total_width} qubits, cap is {_cap}")

    @classmethod
    def of(cls, *specs) -> "RegisterLayout":
        """Build from ``Register`` objects or ``(name, width[, owner])`` tuples."""
        regs = [s if isinstance(s, Register) else Register(*s) for s in specs]
        return cls(tuple(regs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def total_width(self) -> int:
        return sum(r.width for r in self.registers)

    @property
    def dim(self) -> int:
        return 1 << self.total_width

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.registers)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise LayoutError(f"unknown register {name!r}") from None

    def get(self, name: str) -> Register:
        return self.registers[self.index(name)]

    def subset(self, names: Iterable[str]) -> "RegisterLayout":
        """Layout restricted to ``names``, kept in canonical (declaration) order."""
        names = set(names)
        for n in names:
            self.index(n)
        return RegisterLayout(tuple(r for r in self.registers if r.name in names))

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers)

    def width_of(self, names: Iterable[str]) -> int:
        return sum(self.get(n).width for n in names)


def _check_names(layout: RegisterLayout, names: Iterable[str]) -> list[str]:
    names = list(names)
    for n in names:
        layout.index(n)
    if len(set(names)) != len(names):
        raise LayoutError(f"repeated register in {names}")
    return names


def _symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A (possibly subnormalized) density operator on a register layout.

    Construction only checks shapes; call :meth:`validate` for the physical
    invariants.  Library operations symmetrize their output.
    """

    layout: RegisterLayout
    matrix: np.ndarray

    def __post_init__(self):
        d = self.layout.dim
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (d, d):
            raise LayoutError(f"matrix shape {m.shape} does not match layout dim {d}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_pure(cls, layout: RegisterLayout, amplitudes) -> "DensityOperator":
        v = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(layout, np.outer(v, v.conj()))

    @classmethod
    def basis(cls, layout: RegisterLayout, bits: str) -> "DensityOperator":
        """Computational basis projector; ``bits`` is big-endian over the layout."""
        if len(bits) != layout.total_width:
            raise LayoutError("bitstring length does not match layout width")
        v = np.zeros(layout.dim, dtype=complex)
        v[int(bits, 2) if bits else 0] = 1.0
        return cls.from_pure(layout, v)

    @classmethod
    def maximally_mixed(cls, layout: RegisterLayout) -> "DensityOperator":
        d = layout.dim
        return cls(layout, np.eye(d, dtype=complex) / d)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    @property
    def dim(self) -> int:
        return self.layout.dim

    def normalized(self) -> "DensityOperator":
        tr = self.trace
        if tr <= 0:
            raise ValueError("cannot normalize a zero operator")
        return DensityOperator(self.layout, self.matrix / tr)

    def scaled(self, factor: float) -> "DensityOperator":
        return DensityOperator(self.layout, self.matrix * factor)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(_symmetrize(self.matrix))

    def validate(self, *, subnormalized: bool = False, atol: float = ATOL) -> "DensityOperator":
        m = self.matrix
        if not np.allclose(m, m.conj().T, atol=atol):
            raise ValueError("operator is not Hermitian")
        ev = np.linalg.eigvalsh(_symmetrize(m))
        if ev.min(initial=0.0) < -atol:
            raise ValueError(f"operator has negative eigenvalue {ev.min():.3g}")
        tr = self.trace
        if subnormalized:
            if not (0 < tr <= 1 + atol):
                raise ValueError(f"trace {tr} outside (0, 1]")
        elif abs(tr - 1) > atol:
            raise ValueError(f"trace {tr} != 1")
        return self

    def reorder(self, names: Sequence[str]) -> "DensityOperator":
        """Permute registers into the order given by ``names``."""
        names = _check_names(self.layout, names)
        if len(names) != len(self.layout):
            raise LayoutError("reorder needs every register exactly once")
        perm = [self.layout.index(n) for n in names]
        if perm == list(range(len(perm))):
            return self
        k = len(perm)
        t = self.matrix.reshape(self.layout.dims * 2)
        t = t.transpose(perm + [p + k for p in perm])
        new = RegisterLayout(tuple(self.layout.registers[p] for p in perm))
        return DensityOperator(new, t.reshape(new.dim, new.dim))

    def allclose(self, other: "DensityOperator", atol: float = 1e-9) -> bool:
        if self.layout.names != other.layout.names or self.layout.dims != other.layout.dims:
            return False
        return bool(np.allclose(self.matrix, other.matrix, atol=atol))


@dataclass(frozen=True, eq=False)
class PureState:
    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.shape != (self.layout.dim,):
            raise LayoutError("amplitude vector does not match layout dim")
        norm = float(np.vdot(v, v).real)
        if abs(norm - 1) > ATOL:
            raise ValueError(f"state has squared norm {norm}")
        object.__setattr__(self, "amplitudes", v)

    def density(self) -> DensityOperator:
        return DensityOperator.from_pure(self.layout, self.amplitudes)


@dataclass(frozen=True, eq=False)
class Isometry:
    """Linear map V with V^dagger V = I from ``inputs`` onto ``outputs``.

    Output registers sharing a name with an input replace it in place;
    other outputs are fresh registers appended to the layout.
    """

    inputs: tuple[str, ...]
    outputs: tuple[Register, ...]
    matrix: np.ndarray
    input_widths: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        out_dim = 1 << sum(r.width for r in self.outputs)
        if m.shape[0] != out_dim:
            raise LayoutError(f"isometry has {m.shape[0]} rows, outputs need {out_dim}")
        in_width = int(round(math.log2(m.shape[1])))
        if 1 << in_width != m.shape[1]:
            raise LayoutError("isometry column count is not a power of two")
        if self.input_widths and sum(self.input_widths) != in_width:
            raise LayoutError("declared input widths disagree with matrix")
        if sum(r.width for r in self.outputs) < in_width:
            raise LayoutError("isometry output is narrower than its input")

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.outputs)

    def check(self, atol: float = ATOL) -> "Isometry":
        m = self.matrix
        if not np.allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=atol):
            raise ValueError("matrix is not an isometry")
        return self


def unitary(register: Register | str, u, owner: str | None = None, width: int | None = None) -> Isometry:
    """Wrap a square unitary acting on a single register."""
    if isinstance(register, str):
        w = width if width is not None else int(round(math.log2(np.shape(u)[0])))
        register = Register(register, w, owner or "Alice")
    return Isometry((register.name,), (register,), np.asarray(u, dtype=complex))


def tensor(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    clash = set(a.layout.names) & set(b.layout.names)
    if clash:
        raise LayoutError(f"register name collision: {sorted(clash)}")
    return DensityOperator(a.layout.concat(b.layout), np.kron(a.matrix, b.matrix))


def apply_isometry(state: DensityOperator, v: Isometry) -> DensityOperator:
    """Return V rho V^dagger, acting as identity on registers outside ``v.inputs``."""
    layout = state.layout
    ins = _check_names(layout, v.inputs)
    in_width = layout.width_of(ins)
    if (1 << in_width) != v.matrix.shape[1]:
        raise LayoutError(
            f"isometry expects {v.matrix.shape[1]}-dim input, registers {ins} give {1 << in_width}")
    if v.input_widths and tuple(layout.get(n).width for n in ins) != tuple(v.input_widths):
        raise LayoutError("input register widths do not match isometry signature")
    fresh = [r for r in v.outputs if r.name not in ins]
    for r in fresh:
        if r.name in layout:
            raise LayoutError(f"output register {r.name!r} already present")
    rest = [r.name for r in layout.registers if r.name not in ins]
    moved = state.reorder(ins + rest)
    d_in = 1 << in_width
    d_rest = moved.dim // d_in
    d_out = v.matrix.shape[0]
    t = moved.matrix.reshape(d_in, d_rest, d_in, d_rest)
    t = np.tensordot(v.matrix, t, axes=([1], [0]))          # (o, r, i, s)
    t = np.tensordot(t, v.matrix.conj(), axes=([2], [1]))    # (o, r, s, p)
    t = t.transpose(0, 1, 3, 2).reshape(d_out * d_rest, d_out * d_rest)
    out_layout = RegisterLayout(tuple(v.outputs) + tuple(layout.get(n) for n in rest))
    result = DensityOperator(out_layout, _symmetrize(t))
    final = []
    for r in layout.registers:
        if r.name in ins:
            if r.name in v.output_names:
                final.append(r.name)
        else:
            final.append(r.name)
    final += [r.name for r in fresh]
    return result.reorder(final)


def apply_local(m: np.ndarray, dims: Sequence[int], k: int, v: np.ndarray) -> np.ndarray:
    """Raw kernel: conjugate axis ``k`` of a matrix over ``dims`` by ``v``.

    Axis ``k`` changes dimension from ``dims[k]`` to ``v.shape[0]``; all other
    axes keep their place.  Leading batch axes of ``m`` are carried along.
    """
    pre = math.prod(dims[:k])
    post = math.prod(dims[k + 1:])
    dk, do = dims[k], v.shape[0]
    d, d2 = pre * dk * post, pre * do * post
    batch = m.shape[:-2]
    perm = _monomial_map(v)
    if perm is not None:
        rows, phase = perm
        full = (np.arange(pre)[:, None, None] * do + rows[None, :, None]) * post + np.arange(post)[None, None, :]
        ph = np.broadcast_to(phase[None, :, None], (pre, dk, post)).reshape(-1)
        full = full.reshape(-1)
        out = np.zeros(batch + (d2, d2), dtype=complex)
        out[..., full[:, None], full[None, :]] = m * np.outer(ph, ph.conj())
        return out
    left = np.matmul(v, m.reshape(*batch, pre, dk, post * d))
    left = left.reshape(*batch, d2, pre, dk, post).swapaxes(-1, -2)
    out = np.matmul(left, v.conj().T).swapaxes(-1, -2).reshape(*batch, d2, d2)
    return 0.5 * (out + np.conj(out.swapaxes(-1, -2)))


def _monomial_map(v: np.ndarray) -> tuple[np.ndarray, np.ndarray] | None:
    """If every column of ``v`` has a single unit-modulus entry, return (row per column, phase)."""
    nz = v != 0
    if not np.all(nz.sum(axis=0) == 1):
        return None
    rows = np.argmax(nz, axis=0)
    phase = v[rows, np.arange(v.shape[1])]
    if not np.allclose(np.abs(phase), 1, atol=1e-12):
        return None
    return rows, phase


def partial_trace(state: DensityOperator, keep: Iterable[str]) -> DensityOperator:
    """Trace out every register not in ``keep``; survivors stay in canonical order."""
    layout = state.layout
    keep = set(_check_names(layout, keep))
    if len(keep) == len(layout):
        return state
    kept = [r.name for r in layout.registers if r.name in keep]
    gone = [r.name for r in layout.registers if r.name not in keep]
    moved = state.reorder(kept + gone)
    dk = 1 << layout.width_of(kept)
    dg = moved.dim // dk
    t = moved.matrix.reshape(dk, dg, dk, dg)
    red = np.einsum("ajbj->ab", t)
    return DensityOperator(layout.subset(kept), red)


def project(state: DensityOperator, register: str, outcome: int, *, drop: bool = False) -> DensityOperator:
    """Unnormalized post-measurement operator for one computational-basis outcome."""
    layout = state.layout
    k = layout.index(register)
    n = len(layout)
    t = state.matrix.reshape(layout.dims * 2)
    t = np.take(t, outcome, axis=k)
    t = np.take(t, outcome, axis=n - 1 + k)
    rest = RegisterLayout(tuple(r for r in layout.registers if r.name != register))
    block = t.reshape(rest.dim, rest.dim)
    if drop:
        return DensityOperator(rest, block)
    full = np.zeros(layout.dims * 2, dtype=complex)
    idx = [slice(None)] * (2 * n)
    idx[k] = outcome
    idx[n + k] = outcome
    full[tuple(idx)] = t
    return DensityOperator(layout, full.reshape(layout.dim, layout.dim))


def measure_raw(state: DensityOperator, register: str, *, drop: bool = False,
                prune: float = PRUNE) -> list[tuple[int, DensityOperator]]:
    """Unnormalized outcome blocks ``(value, p * post_state)`` with p above ``prune``."""
    reg = state.layout.get(register)
    total = state.trace
    out = []
    for o in range(reg.dim):
        blk = project(state, register, o, drop=drop)
        if blk.trace > prune * total:
            out.append((o, blk))
    return out


def measure(state: DensityOperator, register: str) -> list[tuple[str, float, DensityOperator]]:
    """Computational-basis measurement of ``register``.

    Returns ``(bits, probability, post_state)`` per surviving outcome.  Outcomes
    below the pruning threshold are dropped and the rest renormalized.
    """
    width = state.layout.get(register).width
    raw = measure_raw(state, register)
    total = sum(b.trace for _, b in raw)
    return [(format(o, f"0{width}b"), b.trace / total, b.normalized()) for o, b in raw]


def dephase(state: DensityOperator, register: str) -> DensityOperator:
    """Zero the off-diagonal blocks of ``register`` (measure and forget)."""
    reg = state.layout.get(register)
    acc = np.zeros_like(state.matrix)
    for o in range(reg.dim):
        acc += project(state, register, o).matrix
    return DensityOperator(state.layout, acc)


def purify(state: DensityOperator, env_name: str = "E") -> PureState:
    """Spectral purification; the environment register is appended last."""
    ev, vecs = np.linalg.eigh(_symmetrize(state.matrix))
    order = np.argsort(-ev, kind="stable")
    ev, vecs = ev[order], vecs[:, order]
    ev = np.where(ev < ATOL, 0.0, ev)
    rank = int(np.count_nonzero(ev > PRUNE))
    ev = ev / ev.sum()
    if rank <= 1:
        return PureState(state.layout, vecs[:, 0])
    env_w = math.ceil(math.log2(rank))
    env = Register(env_name, env_w, "Environment")
    d_e = env.dim
    amp = np.zeros((state.dim, d_e), dtype=complex)
    for j in range(rank):
        amp[:, j] = math.sqrt(ev[j]) * vecs[:, j]
    return PureState(state.layout.concat(RegisterLayout((env,))), amp.reshape(-1))


# -- common gates -----------------------------------------------------------

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=complex)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def on_qubit(gate: np.ndarray, qubit: int, width: int) -> np.ndarray:
    """Embed a 1-qubit gate at ``qubit`` (0 = most significant) of a ``width``-qubit register."""
    return kron_all([gate if j == qubit else I2 for j in range(width)])


def cnot(control: int, target: int, width: int) -> np.ndarray:
    d = 1 << width
    m = np.zeros((d, d), dtype=complex)
    for b in range(d):
        c = (b >> (width - 1 - control)) & 1
        m[b ^ (c << (width - 1 - target)), b] = 1
    return m


def permutation(fn, width_in: int, width_out: int | None = None) -> np.ndarray:
    """Matrix of the injective classical map ``b -> fn(b)`` on basis indices."""
    width_out = width_in if width_out is None else width_out
    m = np.zeros((1 << width_out, 1 << width_in), dtype=complex)
    for b in range(1 << width_in):
        m[fn(b), b] = 1
    return m


def bell_state() -> np.ndarray:
    return np.array([1, 0, 0, 1], dtype=complex) / math.sqrt(2)


def ghz_state(n: int) -> np.ndarray:
    v = np.zeros(1 << n, dtype=complex)
    v[0] = v[-1] = 1 / math.sqrt(2)
    return v
