from __future__ import annotations

import math

import numpy as np
import pytest

from impersonation import attack as A
from impersonation import protocol as P
from impersonation import schemes as Sc
from impersonation.cq import ZeroProbability

from test_protocol import echo_spec


class TestBudget:
    def test_reference_value(self):
        assert A.budget(2, 1, 0.5) == 24

    def test_exact_boundary_not_rounded_up(self):
        # 2nt / (eps^2 ln2) equal to an integer up to float noise
        eps = math.sqrt(2 / (10 * math.log(2)))
        assert A.budget(1, 1, eps) == 10

    def test_invalid_epsilon(self):
        for eps in (0, 1, -0.1, 1.5):
            with pytest.raises(ValueError):
                A.budget(1, 1, eps)

    def test_bound_values(self):
        assert A.distance_bound(1, 1, 100) == pytest.approx(0.16986, abs=1e-5)
        assert A.distance_bound(0, 2, 10) == 0
        assert A.implied_epsilon(2, 1, A.budget(2, 1, 0.5)) <= 0.5

    def test_from_epsilon(self):
        cfg = A.AttackConfig.from_epsilon(2, 1, 0.5)
        assert cfg.K == 24 and cfg.epsilon_target == 0.5
        with pytest.raises(ValueError):
            A.AttackConfig(0)


class TestImpersonate:
    def test_constant_protocol_is_perfectly_forged(self):
        out = A.impersonate(Sc.constant_protocol(1, 1, 2), A.AttackConfig(8))
        assert out.distance == pytest.approx(0, abs=1e-12)
        assert out.h0 == pytest.approx(1)
        assert out.passed

    def test_echo_spec_is_forged_exactly(self):
        # the transcript already reveals Alice's bit
        out = A.impersonate(echo_spec(), A.AttackConfig(6))
        assert out.distance == pytest.approx(0, abs=1e-12)

    def test_random_clifford_within_bound(self):
        out = A.impersonate(Sc.random_clifford_protocol(3, t=2), A.AttackConfig(16))
        assert len(out.per_k) == 16
        assert out.distance <= out.bound + 1e-9
        assert out.bound <= out.bound_n + 1e-12

    def test_truncated_matches_direct_run(self):
        spec = Sc.haar_protocol(5, 1, 1, 1, burst=3)
        long = A.impersonate(spec, A.AttackConfig(12)).truncated(5)
        short = A.impersonate(spec, A.AttackConfig(5))
        assert long.distance == pytest.approx(short.distance, abs=1e-12)
        assert long.bound == pytest.approx(short.bound)
        with pytest.raises(ValueError):
            short.truncated(6)

    def test_fixed_k_matches_uniform_entry(self):
        spec = Sc.random_clifford_protocol(1)
        uni = A.impersonate(spec, A.AttackConfig(6))
        for k in (1, 4, 6):
            fixed = A.impersonate(spec, A.AttackConfig(6), fixed_k=k)
            assert fixed.distance == pytest.approx(uni.per_k[k - 1].distance, abs=1e-12)
        with pytest.raises(ValueError):
            A.impersonate(spec, A.AttackConfig(6), fixed_k=7)

    def test_lumping_does_not_change_distance(self):
        spec = Sc.epr_auth(2).spec
        a = A.impersonate(spec, A.AttackConfig(6), lump=True)
        b = A.impersonate(spec, A.AttackConfig(6), lump=False)
        assert a.distance == pytest.approx(b.distance, abs=1e-12)

    def test_horizon_checked(self):
        with pytest.raises(ValueError):
            A.impersonate(echo_spec(max_rounds=4), A.AttackConfig(4))

    def test_random_state_forger_fails_authentication(self):
        scheme = Sc.epr_auth(1)
        out = A.impersonate(scheme.spec, A.AttackConfig(4), forger=A.random_state_forger)
        assert out.next_round_probability(scheme.accepted) == pytest.approx(0.5)
        assert out.next_round_probability(scheme.accepted, forged=False) == pytest.approx(1)

    def test_epr_forged_acceptance_formula(self):
        scheme = Sc.epr_auth(2)
        K = 10
        out = A.impersonate(scheme.spec, A.AttackConfig(K))
        # only the first reuse of the second pair can fail, with probability 1/2
        assert out.next_round_probability(scheme.accepted) == pytest.approx(1 - 1 / (2 * K))

    def test_joint_distributions(self):
        out = A.impersonate(Sc.random_clifford_protocol(0), A.AttackConfig(3), keep_joint=True)
        real, forged = out.real_distribution(), out.forged_distribution()
        assert math.fsum(real.values()) == pytest.approx(1)
        assert math.fsum(forged.values()) == pytest.approx(1)
        no_joint = A.impersonate(Sc.random_clifford_protocol(0), A.AttackConfig(3))
        with pytest.raises(ValueError):
            no_joint.real_distribution()


class TestPosterior:
    def test_empty_transcript(self):
        rho = A.posterior(Sc.epr_auth(1).spec, "")
        # X maximally mixed, first message register holds the dummy 0
        assert np.allclose(rho.matrix, np.diag([0.5, 0, 0.5, 0]))

    def test_after_accepted_round(self):
        # challenge Z, Alice announced 1, Bob accepted: X is |1>, next message dummy 0
        rho = A.posterior(Sc.epr_auth(1).spec, "0011")
        assert np.allclose(rho.matrix, np.diag([0, 0, 1, 0]))

    def test_x_basis_round(self):
        rho = A.posterior(Sc.epr_auth(1).spec, "0111")
        plus = np.array([1, 0, -1, 0]) / math.sqrt(2)   # |->|0>
        assert np.allclose(rho.matrix, np.outer(plus, plus))

    def test_impossible_transcript(self):
        with pytest.raises(ZeroProbability):
            A.posterior(Sc.epr_auth(1).spec, "0010")

    def test_partial_transcript_rejected(self):
        with pytest.raises(ValueError):
            A.posterior(Sc.epr_auth(1).spec, "001")


class TestLadder:
    def test_product_state_has_flat_ladder(self):
        lad = A.hybrid_ladder(Sc.constant_protocol(1, 1, 2, entangled=False), 1)
        assert lad.end_to_end == pytest.approx(0, abs=1e-12)
        for r in lad.rungs:
            assert r.adjacent == pytest.approx(0, abs=1e-12)
            assert r.delta_y == pytest.approx(0, abs=1e-12)
            assert r.delta_x == pytest.approx(0, abs=1e-12)

    @pytest.mark.parametrize("build,k", [
        (lambda: Sc.random_clifford_protocol(0, t=2), 1),
        (lambda: Sc.haar_protocol(1, 2, 1, 2, burst=2), 2),
        (lambda: Sc.epr_auth(2).spec, 2),
    ])
    def test_ladder_inequalities(self, build, k):
        spec = build()
        lad = A.hybrid_ladder(spec, k)
        direct = A.impersonate(spec, A.AttackConfig(k), fixed_k=k).distance
        assert lad.end_to_end == pytest.approx(direct, abs=1e-10)
        assert lad.end_to_end <= sum(lad.adjacent) + 1e-10
        for r in lad.rungs:
            assert r.adjacent <= r.to_primed + r.primed_to_next + 1e-10
            assert r.to_primed <= r.delta_y + 1e-9
            assert r.primed_to_next <= r.delta_x + 1e-9
            assert r.delta_y <= r.pinsker_y + 1e-9
            assert r.delta_x <= r.pinsker_x + 1e-9


class TestExtrapolation:
    def test_orthogonal_branches(self):
        inst = A.ExtrapolationInstance.from_branches([1 / math.sqrt(2)] * 2, [[1, 0], [0, 1]])
        assert A.extrapolation_overlap(inst, A.brute_force_extrapolator(inst)) == pytest.approx(1)
        assert A.extrapolation_overlap(inst, A.maximally_mixed_extrapolator(2)) == pytest.approx(0.5)

    def test_wrong_guess(self):
        inst = A.ExtrapolationInstance.from_branches([1 / math.sqrt(2)] * 2, [[1, 0], [0, 1]])
        flipped = A.extrapolation_overlap(inst, lambda s: np.array([0, 1]) if s == 0 else np.array([1, 0]))
        assert flipped == pytest.approx(0)
        fixed = A.extrapolation_overlap(inst, lambda s: np.array([1, 0]))
        assert fixed == pytest.approx(0.5)

    def test_density_input(self):
        inst = A.ExtrapolationInstance.from_branches([0.6, 0.8], [[1, 0], [1 / math.sqrt(2)] * 2])
        assert inst.density().trace == pytest.approx(1)
        assert A.extrapolation_overlap(inst, A.brute_force_extrapolator(inst)) == pytest.approx(1)


class TestCloning:
    def test_public_money_clones_perfectly(self):
        scheme = Sc.toy_money(1, public=True)
        out = A.cloning_adversary(scheme, A.AttackConfig(4))
        assert out.real_verify == pytest.approx(1)
        assert out.both_verify == pytest.approx(1)

    def test_private_money_forgery(self):
        out = A.cloning_adversary(Sc.toy_money(1), A.AttackConfig(4))
        assert out.real_verify == pytest.approx(1)
        assert out.both_verify >= out.union_floor - 1e-12
        assert out.real_note.trace == pytest.approx(1)
        assert out.forged_note.trace == pytest.approx(1)

    def test_guessing_baseline(self):
        out = A.cloning_adversary(Sc.toy_money(1), A.AttackConfig(4), forge=False)
        assert out.forged_verify == pytest.approx(0.5)

    def test_quantum_queries_rejected(self):
        class Quantum:
            quantum_queries = True
        with pytest.raises(ValueError):
            A.cloning_adversary(Quantum(), A.AttackConfig(1))
