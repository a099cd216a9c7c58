"""Classical-quantum ensembles keyed by transcript strings."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .qcore import (
    PRUNE,
    DensityOperator,
    LayoutError,
    Register,
    RegisterLayout,
    partial_trace,
    tensor,
)

A2B = "A>B"
B2A = "B>A"


class ZeroProbability(ValueError):
    pass


@dataclass(frozen=True)
class Transcript:
    """Ordered classical messages; ``symbols`` holds ``(direction, bits)`` pairs."""

    symbols: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple((d, b) for d, b in self.symbols))
        for d, b in self.symbols:
            if d not in (A2B, B2A):
                raise ValueError(f"bad direction {d!r}")
            if set(b) - {"0", "1"}:
                raise ValueError(f"symbol {b!r} is not a bitstring")

    @property
    def key(self) -> str:
        return "".join(b for _, b in self.symbols)

    @property
    def schema(self) -> tuple[tuple[str, int], ...]:
        return tuple((d, len(b)) for d, b in self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def extend(self, direction: str, bits: str) -> "Transcript":
        return Transcript(self.symbols + ((direction, bits),))

    @classmethod
    def from_key(cls, key: str, schema: Sequence[tuple[str, int]]) -> "Transcript":
        out, pos = [], 0
        for d, w in schema:
            out.append((d, key[pos:pos + w]))
            pos += w
        if pos != len(key):
            raise ValueError("key length does not match schema")
        return cls(tuple(out))

    @classmethod
    def alternating(cls, bits: Sequence[str]) -> "Transcript":
        """Messages alternating Alice->Bob, Bob->Alice, starting with Alice."""
        return cls(tuple((A2B if j % 2 == 0 else B2A, b) for j, b in enumerate(bits)))


@dataclass(frozen=True, eq=False)
class CqState:
    """Ensemble ``sum_tau |tau><tau| (x) rho_tau`` with subnormalized branches.

    Every key has the same length and is parsed by ``schema``.
    """

    layout: RegisterLayout
    branches: Mapping[str, DensityOperator]
    schema: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "branches", dict(self.branches))
        object.__setattr__(self, "schema", tuple(self.schema))
        klen = sum(w for _, w in self.schema)
        for k, b in self.branches.items():
            if len(k) != klen:
                raise LayoutError(f"key {k!r} does not fit schema of width {klen}")
            if b.layout.names != self.layout.names:
                raise LayoutError("branch layout differs from ensemble layout")

    @classmethod
    def single(cls, state: DensityOperator, key: str = "",
               schema: Sequence[tuple[str, int]] = ()) -> "CqState":
        return cls(state.layout, {key: state}, tuple(schema))

    @property
    def total(self) -> float:
        return sum(b.trace for b in self.branches.values())

    def __len__(self) -> int:
        return len(self.branches)

    def items(self):
        return self.branches.items()

    def transcript(self, key: str) -> Transcript:
        return Transcript.from_key(key, self.schema)

    def validate(self, atol: float = 1e-9) -> "CqState":
        if abs(self.total - 1) > atol:
            raise ValueError(f"branch weights sum to {self.total}")
        return self


def _prefix_key(prefix) -> str:
    return prefix.key if isinstance(prefix, Transcript) else str(prefix)


def condition(s: CqState, prefix) -> CqState:
    """Restrict to branches extending ``prefix`` and renormalize."""
    pk = _prefix_key(prefix)
    kept = {k: b for k, b in s.items() if k.startswith(pk)}
    tot = sum(b.trace for b in kept.values())
    if tot <= PRUNE:
        raise ZeroProbability(f"prefix {pk!r} has zero probability")
    return CqState(s.layout, {k: b.scaled(1 / tot) for k, b in kept.items()}, s.schema)


def classical_marginal(s: CqState) -> dict[str, float]:
    return {k: b.trace for k, b in s.items()}


def quantum_marginal(s: CqState, keep: Iterable[str]) -> CqState:
    keep = list(keep)
    branches = {k: partial_trace(b, keep) for k, b in s.items()}
    return CqState(s.layout.subset(keep), branches, s.schema)


def average(s: CqState) -> DensityOperator:
    """Forget the classical part: ``sum_tau rho_tau``."""
    acc = np.zeros((s.layout.dim, s.layout.dim), dtype=complex)
    for b in s.branches.values():
        acc += b.matrix
    return DensityOperator(s.layout, acc)


def decouple(state: DensityOperator, registers: Iterable[str]) -> DensityOperator:
    """``Tr_R(rho) (x) Tr_comp(rho)`` reassembled in the original register order.

    The trace of ``state`` is preserved (the factors are normalized first).
    """
    registers = set(registers)
    layout = state.layout
    inside = [n for n in layout.names if n in registers]
    outside = [n for n in layout.names if n not in registers]
    if len(inside) != len(registers):
        missing = registers - set(layout.names)
        raise LayoutError(f"unknown registers {sorted(missing)}")
    if not inside or not outside:
        return state
    w = state.trace
    rho = state.normalized()
    prod = tensor(partial_trace(rho, inside), partial_trace(rho, outside))
    return prod.reorder(layout.names).scaled(w)


def replace_subsystem(s: CqState, registers: Iterable[str]) -> CqState:
    """Swap ``registers`` for a fresh copy of their conditional state, per branch."""
    registers = list(registers)
    return CqState(s.layout, {k: decouple(b, registers) for k, b in s.items()}, s.schema)


def dephase_average(s: CqState, name: str = "T") -> DensityOperator:
    """Materialize the classical key as a register placed first: ``sum |tau><tau| (x) rho_tau``."""
    width = sum(w for _, w in s.schema)
    if width == 0:
        return average(s)
    reg = Register(name, width, "Message")
    layout = RegisterLayout((reg,)).concat(s.layout)
    d = s.layout.dim
    m = np.zeros((layout.dim, layout.dim), dtype=complex)
    for k, b in s.items():
        j = int(k, 2)
        m[j * d:(j + 1) * d, j * d:(j + 1) * d] = b.matrix
    return DensityOperator(layout, m)
