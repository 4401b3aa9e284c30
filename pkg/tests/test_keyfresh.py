import numpy as np
import pytest

from y00lab.breach import BreachParams, breach_report
from y00lab.errors import RefreshAbortedError
from y00lab.keyfresh import (CHECK_BITS, ExtractorParams, HashSpec, eve_bit_guess_probability,
                             guess_probability_bound, integrity_check, optimal_tau, plan_refresh,
                             refresh_roundtrip, sd_from_uniform, toeplitz_hash)
from y00lab.prng import LfsrSpec

from conftest import DX_TAPS, S_TAPS, make_cfg


@pytest.fixture
def wide_cfg():
    """M = 4 with 16-bit generators, so hashed keys are practically never zero"""
    return make_cfg(4, s=LfsrSpec(16, S_TAPS, 0xACE1), dx=LfsrSpec(16, DX_TAPS, 0x1D2C))


class TestToeplitzHash:

    def test_small_example(self):
        spec = HashSpec(3, 2, (1, 0, 1, 1))
        np.testing.assert_array_equal(spec.matrix(), [[1, 1, 1], [0, 1, 1]])
        np.testing.assert_array_equal(toeplitz_hash(spec, [1, 0, 1]), [0, 1])

    def test_linear(self, rng):
        spec = HashSpec.random(20, 6, rng)
        a, b = rng.integers(0, 2, 20), rng.integers(0, 2, 20)
        np.testing.assert_array_equal(toeplitz_hash(spec, a ^ b), toeplitz_hash(spec, a) ^ toeplitz_hash(spec, b))

    def test_constant_diagonals(self, rng):
        t = HashSpec.random(9, 4, rng).matrix()
        for i in range(1, 4):
            np.testing.assert_array_equal(t[i, 1:], t[i - 1, :-1])

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            HashSpec(3, 4, (0,) * 6)
        with pytest.raises(ValueError):
            HashSpec(3, 2, (1, 0))
        with pytest.raises(ValueError):
            toeplitz_hash(HashSpec(3, 2, (1, 0, 1, 1)), [1, 0])

    def test_zero_output(self):
        assert toeplitz_hash(HashSpec(5, 0), [1, 0, 1, 1, 0]).size == 0


class TestSacrifice:

    @pytest.mark.parametrize("h_inf, tau", [(30, 10), (1536, 512), (2, 1)])
    def test_one_third(self, h_inf, tau):
        assert optimal_tau(h_inf).tau == tau

    def test_grid_agrees(self):
        choice = optimal_tau(30)
        assert choice.grid_tau == 10
        assert choice.guess_bound == pytest.approx(3 * 2.0 ** -10)
        assert choice.grid_bound == pytest.approx(choice.guess_bound)

    def test_no_entropy(self):
        with pytest.raises(ValueError):
            optimal_tau(0)

    def test_guess_bound_margin(self):
        bound = guess_probability_bound(ExtractorParams.from_h_inf(30), margin=100)
        assert bound.bound == pytest.approx(3 * 2.0 ** -10)
        assert bound.satisfied

    def test_worst_key_entropy_rederives_tau(self):
        bound = guess_probability_bound(ExtractorParams.from_h_inf(90), min_r_h_inf=60)
        assert bound.tau == 20
        assert bound.bound == pytest.approx(3 * 2.0 ** -20)

    def test_inconsistent_params(self):
        with pytest.raises(ValueError):
            ExtractorParams(h_inf=30, tau=10, kappa=30, epsilon=0.5)
        with pytest.raises(ValueError):
            ExtractorParams(h_inf=30, tau=10, kappa=40, epsilon=2.0 ** -15)


class TestStatisticalDistance:

    def test_uniform_source_within_bound(self):
        report = sd_from_uniform(12, 4, np.full(1 << 12, 2.0 ** -12))
        assert report.certifying
        assert report.seeds == 1 << 15
        assert report.h_inf == pytest.approx(12.0)
        assert report.within_bound
        assert report.split_holds
        assert report.positive_part == pytest.approx(report.negative_part)

    def test_point_mass(self):
        source = np.zeros(16)
        source[5] = 1.0
        report = sd_from_uniform(4, 2, source)
        assert report.l1 == pytest.approx(1.5)
        assert report.guess_probability == pytest.approx(1.0)
        assert report.h_inf == 0.0
        assert report.within_bound

    def test_conditioned_source(self, rng):
        joint = rng.dirichlet(np.ones(2 * 64)).reshape(2, 64)
        report = sd_from_uniform(6, 2, joint)
        assert report.within_bound
        assert report.distance == pytest.approx(report.l1 / 2)

    def test_zero_output(self):
        report = sd_from_uniform(4, 0, np.full(16, 1 / 16))
        assert report.l1 == 0.0 and report.certifying

    def test_sampled_mode(self):
        report = sd_from_uniform(8, 3, np.full(256, 1 / 256), exact=False, seed=1)
        assert not report.certifying
        assert report.seeds == 4096
        assert report.ci_halfwidth >= 0

    def test_invalid_source(self):
        with pytest.raises(ValueError):
            sd_from_uniform(4, 2, np.full(8, 1 / 8))
        with pytest.raises(ValueError):
            sd_from_uniform(3, 2, np.full(8, 0.2))


class TestEveGuess:

    def test_no_tap(self):
        guess = eve_bit_guess_probability(make_cfg(4, eta=0.0), rate=3)
        assert guess.probability == pytest.approx(0.5)
        assert guess.h_per_bit == pytest.approx(1.0)

    def test_exact_below_union_bound(self):
        cfg = make_cfg(4, alpha0=3.2, eta=0.016)
        bound = eve_bit_guess_probability(cfg, rate=3, mode='bound')
        exact = eve_bit_guess_probability(cfg, rate=3, mode='exact')
        assert 0.5 - 1e-12 <= exact.probability <= bound.probability + 1e-12
        assert exact.per_slot == bound.per_slot

    def test_invalid_arguments(self, small_cfg):
        with pytest.raises(ValueError):
            eve_bit_guess_probability(small_cfg, rate=0)
        with pytest.raises(ValueError):
            eve_bit_guess_probability(small_cfg, mode='shannon')


class TestPlan:

    def test_sizes(self, small_cfg):
        plan = plan_refresh(small_cfg, 0.5, rate=5)
        assert plan.tau == 7
        assert plan.n_raw == 42
        assert plan.seed_bits == 48
        assert plan.payload_bits == 48 + 42 + CHECK_BITS
        assert plan.slots == 5 * plan.payload_bits

    def test_no_entropy_aborts(self, small_cfg):
        with pytest.raises(RefreshAbortedError):
            plan_refresh(small_cfg, 0.0)

    def test_integrity_check_width(self, rng):
        assert integrity_check(rng.integers(0, 2, 100)).size == CHECK_BITS


class TestRoundtrip:

    def test_noiseless_agreement(self, wide_cfg):
        plan = plan_refresh(wide_cfg, 1.0, rate=3)
        transcript = refresh_roundtrip(wide_cfg, (0xACE1, 0x1D2C), np.random.default_rng(5),
                                       plan=plan, noiseless_bob=True)
        assert transcript.agreed
        assert transcript.raw_errors == 0
        assert len(transcript.eve_outcomes) == plan.slots

    def test_single_flip_corrected(self, wide_cfg):
        plan = plan_refresh(wide_cfg, 1.0, rate=3)
        transcript = refresh_roundtrip(wide_cfg, (0xACE1, 0x1D2C), np.random.default_rng(5),
                                       plan=plan, noiseless_bob=True, tamper=[4])
        assert transcript.agreed
        assert transcript.corrected_errors == 0

    def test_majority_flip_aborts(self, wide_cfg):
        plan = plan_refresh(wide_cfg, 1.0, rate=3)
        with pytest.raises(RefreshAbortedError):
            refresh_roundtrip(wide_cfg, (0xACE1, 0x1D2C), np.random.default_rng(5),
                              plan=plan, noiseless_bob=True, tamper=[0, 1])

    def test_same_randomness_same_keys(self, wide_cfg):
        plan = plan_refresh(wide_cfg, 1.0, rate=3)
        a = refresh_roundtrip(wide_cfg, (0xACE1, 0x1D2C), np.random.default_rng(9), plan=plan, noiseless_bob=True)
        b = refresh_roundtrip(wide_cfg, (0xACE1, 0x1D2C), np.random.default_rng(9), plan=plan, noiseless_bob=True)
        assert a.alice_keys == b.alice_keys

    def test_threshold_reached_refuses(self, wide_cfg):
        report = breach_report(BreachParams(prior=1 / 105, inv_n_breach=0.1))
        with pytest.raises(RefreshAbortedError):
            refresh_roundtrip(wide_cfg, (0xACE1, 0x1D2C), np.random.default_rng(5),
                              breach_report=report, periods_elapsed=20)
