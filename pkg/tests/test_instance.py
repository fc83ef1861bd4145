import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from oracles import binomial_poisson_tv
from rarebai.instance import (ArmSpec, BanditInstance, EmpiricalState, RewardTape, arm_mean,
                              atom_count_tv, empirical_distribution, make_rng, sample_arm,
                              sample_counts, validate)


def two_arm(atom2=(1.0, 0.5), gamma=0.01):
    return BanditInstance(gamma, [ArmSpec(1, [(2.0, 0.5)], 3), ArmSpec(1, [atom2], 3)])


class TestValidate:
    def test_valid_instance_passes(self):
        rep = validate(two_arm())
        assert rep.ok and bool(rep)

    def test_atom_above_bound(self):
        rep = validate(two_arm(atom2=(4.0, 0.5)))
        assert any("atom exceeds bound" in v for v in rep.violations)

    def test_total_probability(self):
        inst = BanditInstance(0.9, [ArmSpec(1, [(1.0, 0.6), (2.0, 0.6)], 3), ArmSpec(1, [(1.0, 0.1)], 3)])
        assert "arm 0: total atom probability 1.08 > 1" in validate(inst).violations

    def test_duplicated_means(self):
        inst = BanditInstance(0.01, [ArmSpec(1, [(2.0, 0.5)], 3), ArmSpec(2, [(1.0, 1.0)], 3)])
        assert any("duplicated means" in v for v in validate(inst).violations)

    @pytest.mark.parametrize("gamma,alpha", [(0.0, 1), (1.0, 1), (0.5, 0), (0.5, -1)])
    def test_nonpositive_gamma_or_alpha(self, gamma, alpha):
        inst = BanditInstance(gamma, [ArmSpec(alpha, [(2.0, 0.5)], 3), ArmSpec(1, [(1.0, 0.5)], 3)])
        assert not validate(inst).ok

    def test_single_arm_rejected(self):
        assert not validate(BanditInstance(0.1, [ArmSpec(1, [(1.0, 0.5)], 3)])).ok


class TestMean:
    def test_single_atom(self):
        assert arm_mean(ArmSpec(1, [(2.0, 0.5)], 3)) == 1.0

    def test_two_atoms(self):
        assert arm_mean(ArmSpec(1, [(1.0, 0.3), (2.0, 0.2)], 3)) == pytest.approx(0.7)

    def test_empty(self):
        assert arm_mean(ArmSpec(1, [], 3)) == 0.0

    @given(st.floats(1e-4, 0.5))
    def test_mean_independent_of_gamma(self, gamma):
        inst = BanditInstance(gamma, [ArmSpec(1.5, [(1.0, 0.3), (2.0, 0.2)], 3),
                                      ArmSpec(1, [(1.0, 0.2)], 3)])
        v, p = inst.real_arm(0)
        assert v @ p == pytest.approx(0.7, rel=1e-12)


class TestSampling:
    def test_zero_branch(self):
        class Top:
            def random(self):
                return 1.0 - 1e-16
        assert sample_arm(two_arm(), 0, Top()) == 0.0

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            sample_arm(two_arm(), 2, make_rng(0))

    def test_nonzero_frequency(self):
        inst = two_arm()
        rng = make_rng(1)
        n = 10**6
        hits = sum(sample_counts(inst, 0, n, rng)[:-1])
        p = 0.005
        assert abs(hits / n - p) <= 3 * np.sqrt(p * (1 - p) / n)

    def test_sample_arm_frequency(self):
        inst = two_arm(gamma=0.1)
        rng = make_rng(2)
        n = 200_000
        hits = sum(sample_arm(inst, 0, rng) > 0 for _ in range(n))
        p = 0.05
        assert abs(hits / n - p) <= 3 * np.sqrt(p * (1 - p) / n)
        assert sample_arm(inst, 0, make_rng(3)) in (0.0, 20.0)

    def test_conditional_atom_frequencies(self):
        inst = BanditInstance(0.1, [ArmSpec(1, [(1.0, 0.3), (2.0, 0.2)], 3), ArmSpec(1, [(1.0, 0.1)], 3)])
        c = sample_counts(inst, 0, 10**6, make_rng(4))
        nz = c[0] + c[1]
        assert abs(c[0] / nz - 0.6) <= 3 * np.sqrt(0.24 / nz)

    @pytest.mark.parametrize("seed", [11, 12, 13])
    def test_chi_square_goodness_of_fit(self, seed):
        inst = BanditInstance(0.1, [ArmSpec(1, [(1.0, 0.3), (2.0, 0.2)], 3), ArmSpec(1, [(1.0, 0.1)], 3)])
        n = 10**6
        c = sample_counts(inst, 0, n, make_rng(seed))
        expected = n * np.array([0.03, 0.02, 0.95])
        assert chisquare(c, expected).pvalue > 1e-3

    def test_determinism(self):
        inst = two_arm(gamma=0.1)
        a = [sample_arm(inst, 0, r) for r in [make_rng(9)] for _ in range(100)]
        r = make_rng(9)
        b = [sample_arm(inst, 0, r) for _ in range(100)]
        assert a == b


class TestRewardTape:
    @given(st.lists(st.integers(0, 5000), min_size=1, max_size=20), st.integers(0, 2**31))
    def test_chunking_does_not_change_the_stream(self, chunks, seed):
        probs = np.array([0.003, 0.001])
        a = RewardTape(probs, make_rng(seed))
        b = RewardTape(probs, make_rng(seed))
        total = sum(chunks)
        got = sum((a.pull(n) for n in chunks), np.zeros(2, dtype=np.int64))
        assert np.array_equal(got, b.pull(total))

    def test_rate(self):
        tape = RewardTape(np.array([0.002, 0.001]), make_rng(5))
        c = tape.pull(10**7)
        assert abs(c.sum() - 3e4) <= 4 * np.sqrt(3e4)
        assert abs(c[0] / c.sum() - 2 / 3) < 0.01

    def test_zero_rate(self):
        tape = RewardTape(np.array([0.0]), make_rng(5))
        assert tape.pull(100).sum() == 0


class TestEmpirical:
    def state(self, counts, zeros):
        return EmpiricalState([np.array([5.0, 10.0])], [counts], [zeros])

    def test_single_observation(self):
        v, p = empirical_distribution(self.state([1, 0], 9), 0)
        assert dict(zip(v, p)) == {0.0: 0.9, 5.0: 0.1}

    def test_only_zeros(self):
        v, p = empirical_distribution(self.state([0, 0], 10), 0)
        assert list(v) == [0.0] and list(p) == [1.0]

    def test_two_atoms(self):
        v, p = empirical_distribution(self.state([2, 3], 5), 0)
        assert dict(zip(v, p)) == {0.0: 0.5, 5.0: 0.2, 10.0: 0.3}

    def test_no_samples(self):
        with pytest.raises(ValueError):
            empirical_distribution(self.state([0, 0], 0), 0)

    def test_bookkeeping(self):
        s = EmpiricalState([np.array([5.0, 10.0]), np.array([1.0])])
        s.add(0, [2, 1], 10)
        s.add(1, [4], 4)
        assert list(s.pulls) == [10, 4] and s.total == 14
        assert s.atom_counts(0) == {5.0: 2, 10.0: 1}
        assert s.means() == pytest.approx([2.0, 1.0])
        assert s.best() == 0


def test_poisson_limit_estimator_matches_exact_distance():
    arm = ArmSpec(1, [(1.0, 1.0)], 3)
    for gamma in (0.1, 0.03):
        n = int(np.ceil(1.0 / gamma))
        exact = binomial_poisson_tv(n, gamma, 1.0)
        est = atom_count_tv(arm, gamma, 1.0, 10**6, make_rng(6))[0]
        assert abs(est - exact) < 0.003
