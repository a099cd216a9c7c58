"""Entropies, mutual informations and trace-distance checks.

All logarithms are base 2.  The ``ln 2`` in the Pinsker bound is kept
explicit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .cq import CqState
from .qcore import DensityOperator, LayoutError, partial_trace, tensor

EIG_ZERO = 1e-12
HOLD_TOL = 1e-8
LN2 = math.log(2)


@dataclass(frozen=True)
class InequalityReport:
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return self.slack >= -HOLD_TOL


@dataclass(frozen=True)
class TwoSidedReport:
    """``lower.lhs <= lower.rhs == upper.lhs <= upper.rhs``."""

    lower: InequalityReport
    upper: InequalityReport

    @property
    def holds(self) -> bool:
        return self.lower.holds and self.upper.holds

    @property
    def slacks(self) -> tuple[float, float]:
        return self.lower.slack, self.upper.slack


def _disjoint(*groups: Iterable[str]) -> list[list[str]]:
    out = [list(g) for g in groups]
    seen: set[str] = set()
    for g in out:
        if seen & set(g) or len(set(g)) != len(g):
            raise LayoutError(f"register groups overlap: {out}")
        seen |= set(g)
    return out


def entropy_of_spectrum(ev: np.ndarray) -> float:
    ev = ev[ev > EIG_ZERO]
    return float(-np.sum(ev * np.log2(ev)))


def entropy(rho: DensityOperator) -> float:
    """Von Neumann entropy in bits (eigenvalues below 1e-12 count as zero)."""
    ev = np.linalg.eigvalsh(0.5 * (rho.matrix + rho.matrix.conj().T))
    return entropy_of_spectrum(ev)


def _h(rho: DensityOperator, names: list[str]) -> float:
    if not names:
        return 0.0
    return entropy(partial_trace(rho, names))


def conditional_entropy(rho: DensityOperator, x: Iterable[str], y: Iterable[str]) -> float:
    x, y = _disjoint(x, y)
    return _h(rho, x + y) - _h(rho, y)


def mutual_information(rho: DensityOperator, x: Iterable[str], y: Iterable[str]) -> float:
    x, y = _disjoint(x, y)
    return _h(rho, x) + _h(rho, y) - _h(rho, x + y)


def cmi(rho: DensityOperator, x: Iterable[str], y: Iterable[str], z: Iterable[str] = ()) -> float:
    """I(X;Y|Z) = H(XZ) + H(YZ) - H(Z) - H(XYZ)."""
    x, y, z = _disjoint(x, y, z)
    return _h(rho, x + z) + _h(rho, y + z) - _h(rho, z) - _h(rho, x + y + z)


def cq_cmi(s: CqState, x: Iterable[str], y: Iterable[str]) -> float:
    """I(X;Y|T) for a cq state: branch-weighted mutual information."""
    x, y = _disjoint(x, y)
    total = 0.0
    for b in s.branches.values():
        p = b.trace
        if p > 0:
            total += p * mutual_information(b.normalized(), x, y)
    return total


def cq_conditional_entropy(s: CqState, x: Iterable[str]) -> float:
    """H(X|T) = sum_tau p_tau H(X)_{rho|tau}."""
    x = list(x)
    total = 0.0
    for b in s.branches.values():
        p = b.trace
        if p > 0:
            total += p * _h(b.normalized(), x)
    return total


def trace_norm(m: np.ndarray) -> float:
    """Trace norm of a Hermitian matrix."""
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))))


def trace_distance(rho: DensityOperator, sigma: DensityOperator) -> float:
    if rho.layout.names != sigma.layout.names or rho.layout.dims != sigma.layout.dims:
        raise LayoutError("trace distance needs identical layouts")
    return 0.5 * trace_norm(rho.matrix - sigma.matrix)


def statistical_distance(p: Mapping, q: Mapping) -> float:
    """Half the L1 distance; keys missing on one side count as probability 0."""
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def product_of_marginals(rho: DensityOperator, x: Iterable[str], y: Iterable[str]) -> tuple[DensityOperator, DensityOperator]:
    """Return ``(rho_XY, rho_X (x) rho_Y)`` on the same register order."""
    x, y = _disjoint(x, y)
    joint = partial_trace(rho, x + y)
    prod = tensor(partial_trace(rho, x), partial_trace(rho, y)).reorder(joint.layout.names)
    return joint, prod


def pinsker_check(rho: DensityOperator, x: Iterable[str], y: Iterable[str]) -> InequalityReport:
    """||rho_XY - rho_X (x) rho_Y||_1 <= sqrt((2 / ln 2) I(X;Y))."""
    joint, prod = product_of_marginals(rho, x, y)
    lhs = trace_norm(joint.matrix - prod.matrix)
    mi = max(mutual_information(rho, x, y), 0.0)
    return InequalityReport(lhs, math.sqrt(2 / LN2 * mi))


def araki_lieb_check(rho: DensityOperator, a: Iterable[str], b: Iterable[str]) -> TwoSidedReport:
    """|H(A) - H(B)| <= H(AB) <= H(A) + H(B)."""
    a, b = _disjoint(a, b)
    ha, hb, hab = _h(rho, a), _h(rho, b), _h(rho, a + b)
    return TwoSidedReport(InequalityReport(abs(ha - hb), hab), InequalityReport(hab, ha + hb))


def pinsker_term(mi: float) -> float:
    """Half-trace-norm Pinsker bound sqrt(I / (2 ln 2))."""
    return math.sqrt(max(mi, 0.0) / (2 * LN2))
