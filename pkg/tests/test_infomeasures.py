from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from impersonation.infomeasures import (
    LN2,
    araki_lieb_check,
    cmi,
    conditional_entropy,
    entropy,
    mutual_information,
    pinsker_check,
    pinsker_term,
    statistical_distance,
    trace_distance,
    trace_norm,
)
from impersonation.qcore import DensityOperator, LayoutError, RegisterLayout, bell_state, ghz_state

from test_qcore import rand_density

ONE = RegisterLayout.of(("A", 1))
AB = RegisterLayout.of(("A", 1), ("B", 1))
ABC = RegisterLayout.of(("A", 1), ("B", 1), ("C", 1))


def test_binary_entropy():
    rho = DensityOperator(ONE, np.diag([0.75, 0.25]))
    assert entropy(rho) == pytest.approx(0.8112781244591328, abs=1e-12)


def test_pure_state_has_zero_entropy():
    assert entropy(DensityOperator.from_pure(AB, bell_state())) == pytest.approx(0, abs=1e-12)


def test_maximally_mixed():
    assert entropy(DensityOperator.maximally_mixed(ABC)) == pytest.approx(3)


def test_bell_mutual_information_and_conditional_entropy():
    rho = DensityOperator.from_pure(AB, bell_state())
    assert mutual_information(rho, ["A"], ["B"]) == pytest.approx(2)
    assert conditional_entropy(rho, ["A"], ["B"]) == pytest.approx(-1)


def test_ghz_cmi():
    rho = DensityOperator.from_pure(ABC, ghz_state(3))
    assert cmi(rho, ["A"], ["B"], ["C"]) == pytest.approx(1)
    assert cmi(rho, ["A"], ["B"]) == pytest.approx(1)


def test_overlapping_groups_rejected():
    with pytest.raises(LayoutError):
        cmi(DensityOperator.maximally_mixed(ABC), ["A"], ["A", "B"])


def test_trace_norm_and_distance():
    assert trace_norm(np.diag([0.5, -0.25])) == pytest.approx(0.75)
    p = DensityOperator.basis(ONE, "0")
    q = DensityOperator.basis(ONE, "1")
    assert trace_distance(p, q) == pytest.approx(1)
    assert trace_distance(p, DensityOperator.maximally_mixed(ONE)) == pytest.approx(0.5)


def test_statistical_distance_missing_keys():
    assert statistical_distance({"0": 1.0}, {"1": 1.0}) == 1.0
    assert statistical_distance({"0": 0.5, "1": 0.5}, {"0": 0.5, "1": 0.5}) == 0.0
    assert statistical_distance({"0": 0.75, "1": 0.25}, {"0": 0.25, "1": 0.75}) == pytest.approx(0.5)


def test_pinsker_term():
    assert pinsker_term(2 * LN2) == pytest.approx(1)
    assert pinsker_term(-1e-15) == 0.0


def test_bell_equality_cases():
    rho = DensityOperator.from_pure(AB, bell_state())
    lo, hi = araki_lieb_check(rho, ["A"], ["B"]).slacks
    assert lo == pytest.approx(0, abs=1e-12) and hi == pytest.approx(2)
    rep = pinsker_check(rho, ["A"], ["B"])
    assert rep.lhs == pytest.approx(1.5)
    assert rep.rhs == pytest.approx(math.sqrt(4 / LN2))


@given(st.integers(0, 2**31), st.integers(1, 2), st.integers(1, 2), st.integers(1, 16))
def test_pinsker_random(seed, wa, wb, rank):
    lay = RegisterLayout.of(("A", wa), ("B", wb))
    rho = DensityOperator(lay, rand_density(seed, lay.dim, min(rank, lay.dim)))
    assert pinsker_check(rho, ["A"], ["B"]).holds


@given(st.integers(0, 2**31), st.integers(1, 2), st.integers(1, 2), st.integers(1, 16))
def test_araki_lieb_random(seed, wa, wb, rank):
    lay = RegisterLayout.of(("A", wa), ("B", wb))
    rho = DensityOperator(lay, rand_density(seed, lay.dim, min(rank, lay.dim)))
    assert araki_lieb_check(rho, ["A"], ["B"]).holds


@given(st.integers(0, 2**31))
def test_strong_subadditivity(seed):
    rho = DensityOperator(ABC, rand_density(seed, 8))
    assert cmi(rho, ["A"], ["C"], ["B"]) >= -1e-9
