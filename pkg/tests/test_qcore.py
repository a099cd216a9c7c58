from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from impersonation.qcore import (
    H,
    DensityOperator,
    Isometry,
    LayoutError,
    PureState,
    QubitCapExceeded,
    Register,
    RegisterLayout,
    X,
    apply_isometry,
    apply_local,
    bell_state,
    cnot,
    dephase,
    ghz_state,
    measure,
    on_qubit,
    partial_trace,
    permutation,
    purify,
    qubit_cap,
    set_qubit_cap,
    tensor,
    unitary,
)


def rand_density(seed: int, dim: int, rank: int | None = None) -> np.ndarray:
    rng = np.random.default_rng(seed)
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return m / np.trace(m)


def rand_unitary(seed: int, dim: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


widths = st.lists(st.integers(1, 2), min_size=1, max_size=3)


def layout_of(ws):
    return RegisterLayout(tuple(Register(f"R{j}", w) for j, w in enumerate(ws)))


class TestLayout:
    def test_zero_width_rejected(self):
        with pytest.raises(LayoutError):
            Register("A", 0)

    def test_duplicate_names_rejected(self):
        with pytest.raises(LayoutError):
            RegisterLayout.of(("A", 1), ("A", 2))

    def test_cap(self):
        old = set_qubit_cap(3)
        try:
            assert qubit_cap() == 3
            with pytest.raises(QubitCapExceeded):
                RegisterLayout.of(("A", 2), ("B", 2))
        finally:
            set_qubit_cap(old)

    def test_subset_keeps_declaration_order(self):
        lay = RegisterLayout.of(("A", 1), ("B", 2), ("C", 1))
        assert lay.subset(["C", "A"]).names == ("A", "C")
        assert lay.dim == 16 and lay.width_of(["B", "C"]) == 3


class TestDensityOperator:
    def test_shape_checked(self):
        with pytest.raises(LayoutError):
            DensityOperator(RegisterLayout.of(("A", 1)), np.eye(4))

    def test_validate(self):
        lay = RegisterLayout.of(("A", 1))
        DensityOperator.maximally_mixed(lay).validate()
        with pytest.raises(ValueError):
            DensityOperator(lay, np.diag([1.5, -0.5])).validate()
        with pytest.raises(ValueError):
            DensityOperator(lay, np.eye(2)).validate()
        DensityOperator(lay, np.eye(2) / 4).validate(subnormalized=True)

    def test_basis_is_big_endian(self):
        lay = RegisterLayout.of(("A", 1), ("B", 1))
        rho = DensityOperator.basis(lay, "10")
        assert rho.matrix[2, 2] == 1

    def test_pure_state_norm_checked(self):
        with pytest.raises(ValueError):
            PureState(RegisterLayout.of(("A", 1)), [1, 1])

    @given(widths, st.integers(0, 10_000), st.randoms())
    def test_reorder_round_trip(self, ws, seed, rnd):
        lay = layout_of(ws)
        rho = DensityOperator(lay, rand_density(seed, lay.dim))
        names = list(lay.names)
        rnd.shuffle(names)
        back = rho.reorder(names).reorder(lay.names)
        assert back.allclose(rho, atol=1e-12)

    def test_reorder_swaps_tensor_factors(self):
        a, b = rand_density(1, 2), rand_density(2, 4)
        lay = RegisterLayout.of(("A", 1), ("B", 2))
        rho = DensityOperator(lay, np.kron(a, b)).reorder(["B", "A"])
        assert np.allclose(rho.matrix, np.kron(b, a))


class TestIsometries:
    def test_unitary_on_one_register(self):
        lay = RegisterLayout.of(("A", 1), ("B", 1))
        rho = DensityOperator(lay, rand_density(3, 4))
        out = apply_isometry(rho, unitary("B", X))
        full = np.kron(np.eye(2), X)
        assert np.allclose(out.matrix, full @ rho.matrix @ full.conj().T)

    def test_fresh_output_is_appended(self):
        lay = RegisterLayout.of(("A", 1), ("B", 1))
        rho = DensityOperator(lay, rand_density(4, 4))
        copy = permutation(lambda b: (b << 1) | b, 1, 2)
        out = apply_isometry(rho, Isometry(("A",), (Register("A", 1), Register("C", 1)), copy))
        assert out.layout.names == ("A", "B", "C")
        assert math.isclose(out.trace, 1.0)
        assert np.allclose(partial_trace(out, ["A", "B"]).matrix, dephase(rho, "A").matrix)

    def test_non_isometry_detected(self):
        with pytest.raises(ValueError):
            Isometry(("A",), (Register("A", 1),), np.ones((2, 2))).check()

    def test_wrong_row_count(self):
        with pytest.raises(LayoutError):
            Isometry(("A",), (Register("A", 1),), np.eye(4)[:, :2])

    @given(st.integers(1, 2), st.integers(1, 2), st.integers(0, 1), st.integers(0, 1_000))
    def test_apply_local_matches_kron(self, w0, w1, k, seed):
        dims = (1 << w0, 1 << w1)
        rho = rand_density(seed, dims[0] * dims[1])
        dk = dims[k]
        v = rand_unitary(seed + 1, 2 * dk)[:, :dk]
        full = np.kron(v, np.eye(dims[1])) if k == 0 else np.kron(np.eye(dims[0]), v)
        assert np.allclose(apply_local(rho, dims, k, v), full @ rho @ full.conj().T)

    @given(st.integers(0, 1_000))
    def test_monomial_fast_path_matches_dense(self, seed):
        rng = np.random.default_rng(seed)
        rho = rand_density(seed, 8)
        perm = rng.permutation(4)
        v = np.zeros((4, 4), dtype=complex)
        v[perm, np.arange(4)] = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
        v = v[:, :2]
        # last factor grows from 2 to 4 through a phased permutation
        out = apply_local(rho, (2, 2, 2), 2, v)
        full = np.kron(np.eye(4), v)
        assert np.allclose(out, full @ rho @ full.conj().T)

    def test_batched_apply_local(self):
        stack = np.stack([rand_density(s, 4) for s in range(3)])
        v = rand_unitary(9, 4)[:, :2]
        out = apply_local(stack, (2, 2), 0, v)
        for j in range(3):
            assert np.allclose(out[j], apply_local(stack[j], (2, 2), 0, v))


class TestTraceAndMeasure:
    def test_bell_marginal_is_maximally_mixed(self):
        lay = RegisterLayout.of(("A", 1), ("B", 1))
        bell = DensityOperator.from_pure(lay, bell_state())
        assert np.allclose(partial_trace(bell, ["B"]).matrix, np.eye(2) / 2)

    @given(st.integers(0, 10_000))
    def test_partial_trace_of_product(self, seed):
        a, b = rand_density(seed, 2), rand_density(seed + 1, 4)
        rho = tensor(DensityOperator(RegisterLayout.of(("A", 1)), a),
                     DensityOperator(RegisterLayout.of(("B", 2)), b))
        assert np.allclose(partial_trace(rho, ["A"]).matrix, a)
        assert np.allclose(partial_trace(rho, ["B"]).matrix, b)

    def test_measure_bell(self):
        lay = RegisterLayout.of(("A", 1), ("B", 1))
        outcomes = measure(DensityOperator.from_pure(lay, bell_state()), "A")
        assert [o for o, _, _ in outcomes] == ["0", "1"]
        for bits, p, post in outcomes:
            assert math.isclose(p, 0.5)
            assert np.isclose(post.matrix[int(bits * 2, 2), int(bits * 2, 2)], 1)

    def test_measure_prunes_impossible_outcomes(self):
        lay = RegisterLayout.of(("A", 1))
        assert len(measure(DensityOperator.basis(lay, "1"), "A")) == 1

    def test_ghz_marginals(self):
        lay = RegisterLayout.of(("A", 1), ("B", 1), ("C", 1))
        rho = DensityOperator.from_pure(lay, ghz_state(3))
        ab = partial_trace(rho, ["A", "B"]).matrix
        assert np.allclose(ab, np.diag([0.5, 0, 0, 0.5]))

    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_purify_recovers_state(self, seed, rank):
        lay = RegisterLayout.of(("A", 2))
        rho = DensityOperator(lay, rand_density(seed, 4, rank))
        psi = purify(rho)
        back = partial_trace(psi.density(), ["A"])
        assert back.allclose(rho, atol=1e-9)
        assert ("E" in psi.layout) == (rank > 1)


class TestGates:
    def test_cnot_truth_table(self):
        c = cnot(0, 1, 2)
        for b, out in [(0, 0), (1, 1), (2, 3), (3, 2)]:
            assert c[out, b] == 1

    def test_on_qubit_most_significant(self):
        assert np.allclose(on_qubit(X, 0, 2), np.kron(X, np.eye(2)))
        assert np.allclose(on_qubit(H, 1, 2), np.kron(np.eye(2), H))
