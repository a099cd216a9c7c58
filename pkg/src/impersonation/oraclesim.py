"""Fully materialized random oracles with logged classical queries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_INPUT_WIDTH = 12


class OracleDomainError(ValueError):
    pass


@dataclass(frozen=True)
class OracleInstance:
    input_width: int
    output_width: int
    table: tuple[str, ...]

    def __post_init__(self):
        if len(self.table) != 1 << self.input_width:
            raise ValueError("oracle table must cover the whole input domain")
        if any(len(y) != self.output_width for y in self.table):
            raise ValueError("oracle outputs must have the declared width")

    def lookup(self, x: str) -> str:
        if len(x) != self.input_width or set(x) - {"0", "1"}:
            raise OracleDomainError(f"query {x!r} outside {{0,1}}^{self.input_width}")
        return self.table[int(x, 2)] if self.input_width else self.table[0]

    def as_dict(self) -> dict[str, str]:
        return {format(j, f"0{self.input_width}b"): y for j, y in enumerate(self.table)}


@dataclass(frozen=True)
class QueryRecord:
    party: str
    x: str
    y: str


@dataclass
class QueryLog:
    entries: list[QueryRecord] = field(default_factory=list)

    def append(self, party: str, x: str, y: str) -> None:
        self.entries.append(QueryRecord(party, x, y))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def pairs(self) -> list[tuple[str, str]]:
        return [(e.x, e.y) for e in self.entries]


def sample_random_oracle(input_width: int, output_width: int, seed: int) -> OracleInstance:
    """Uniform independent outputs, reproducible from ``seed``."""
    if not 0 <= input_width <= MAX_INPUT_WIDTH:
        raise OracleDomainError(f"input width {input_width} exceeds {MAX_INPUT_WIDTH}")
    if output_width < 1:
        raise OracleDomainError("output width must be >= 1")
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=(1 << input_width, output_width))
    return OracleInstance(input_width, output_width, tuple("".join(map(str, row)) for row in bits))


def classical_query(o: OracleInstance, log: QueryLog, party: str, x: str) -> str:
    y = o.lookup(x)
    log.append(party, x, y)
    return y
