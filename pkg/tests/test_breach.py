from fractions import Fraction

import numpy as np
import pytest

from y00lab.breach import (BreachParams, Classification, KeyHypothesisModel, average_success,
                           binomial_chain, breach_curve, breach_report, classify_its,
                           count_vectors, distance_to_one, reference_params, key_prior, mp,
                           multinomial_coefficient, n_breach, omega_complement_count,
                           simulate_key_recovery, success_exact_small, success_upper_bound,
                           time_to_threshold)
from y00lab.channel import ErrorPatternDist, pattern_dist
from y00lab.errors import InfeasibleSizeError

from conftest import make_cfg


def single_slot(row, M=2):
    row = np.asarray(row, dtype=float)
    return ErrorPatternDist(M=M, t_lcm=1, rows=row[None, :], counts=np.array([1]), probs=row)


class TestNBreach:

    @pytest.mark.parametrize("row, inv, label", [
        ([0.25, 0.25, 0.25, 0.25], 0.0, Classification.IDEAL),
        ([0.375, 0.25, 0.25, 0.125], 1.0, Classification.ITS),
        ([0.49, 0.25, 0.25, 0.01], 4.643856189774724, Classification.NON_ITS),
    ])
    def test_examples(self, row, inv, label):
        value, _ = n_breach(single_slot(row))
        assert float(value) == pytest.approx(inv, abs=1e-12)
        assert classify_its(value) is label

    def test_zero_probability_pattern(self):
        inv, n = n_breach(single_slot([0.5, 0.5, 0.0, 0.0]))
        assert inv == mp.inf
        assert n == 0
        assert classify_its(inv) is Classification.NON_ITS

    @pytest.mark.parametrize("inv, label", [
        (0, Classification.IDEAL),
        (1e-6, Classification.ITS),
        (1, Classification.ITS),
        (1.0000001, Classification.NON_ITS),
    ])
    def test_classification_boundaries(self, inv, label):
        assert classify_its(inv) is label

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            classify_its(-0.5)

    def test_moderate_snr_is_not_its(self, small_cfg):
        params = BreachParams.from_dist(pattern_dist(small_cfg), prior=key_prior((4, 3), (True, True)))
        assert params.classification is Classification.NON_ITS

    def test_protected_design_is_its(self, protected_cfg):
        dist = pattern_dist(protected_cfg, t_lcm=65535)
        params = BreachParams.from_dist(dist, prior=key_prior(protected_cfg.key_widths, (True, True)))
        assert params.inv_n_breach <= 1
        assert params.classification in (Classification.ITS, Classification.IDEAL)

    def test_same_physics_without_dsr_is_not_its(self, identity_cfg):
        dist = pattern_dist(identity_cfg, t_lcm=65535)
        params = BreachParams.from_dist(dist, prior=key_prior(identity_cfg.key_widths, (True, True)))
        assert params.classification is Classification.NON_ITS

    def test_no_tap_is_ideal(self):
        dist = pattern_dist(make_cfg(4, eta=0.0))
        inv, n = n_breach(dist)
        assert inv == 0
        assert n == mp.inf


class TestUpperBound:

    def test_starts_at_prior(self):
        for params in reference_params():
            assert success_upper_bound(params, 0) == params.prior
            assert mp.almosteq(params.prior, 1 / (mp.mpf(2) ** 256 - 1) ** 2, rel_eps=mp.mpf(10) ** -30)

    def test_ordering_of_curves(self):
        weak, middle, strong = reference_params()
        for n in (1, 10, 100):
            assert distance_to_one(weak, n) > distance_to_one(middle, n) > distance_to_one(strong, n)

    def test_monotone_in_n(self):
        params = reference_params()[0]
        values = [success_upper_bound(params, n) for n in range(0, 50, 5)]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_ten_periods(self):
        params = reference_params()[2]
        assert float(success_upper_bound(params, 10)) == pytest.approx(1 - 2.0 ** -10, rel=1e-12)

    def test_distance_matches_bound(self):
        params = BreachParams(prior=0.01, inv_n_breach=0.3)
        for n in (0, 1, 7):
            assert mp.almosteq(success_upper_bound(params, n) + distance_to_one(params, n), 1)

    def test_negative_n(self):
        with pytest.raises(ValueError):
            success_upper_bound(BreachParams(prior=0.01, inv_n_breach=1), -1)

    def test_instant_breach(self):
        params = BreachParams(prior=0.01, inv_n_breach=mp.inf)
        assert success_upper_bound(params, 0) == params.prior
        assert success_upper_bound(params, 1) == 1
        assert time_to_threshold(params) == 0


class TestTimeToThreshold:

    def test_half_threshold_is_n_breach(self):
        params = BreachParams(prior=key_prior((256,)), inv_n_breach=0.5)
        assert float(time_to_threshold(params)) == pytest.approx(2.0, rel=1e-12)

    def test_quarter_distance_takes_twice(self):
        params = BreachParams(prior=key_prior((256,)), inv_n_breach=0.5, p_th=0.75)
        assert float(time_to_threshold(params)) == pytest.approx(4.0, rel=1e-12)

    def test_bound_at_threshold_time(self):
        params = BreachParams(prior=0.001, inv_n_breach=0.2, p_th=0.9)
        n = time_to_threshold(params)
        assert mp.almosteq(success_upper_bound(params, n), params.p_th)

    def test_ideal_never_reaches(self):
        assert time_to_threshold(BreachParams(prior=0.001, inv_n_breach=0)) == mp.inf

    @pytest.mark.parametrize("prior, p_th", [(0.6, 0.5), (0.1, 1.0)])
    def test_invalid_threshold(self, prior, p_th):
        with pytest.raises(ValueError):
            time_to_threshold(BreachParams(prior=prior, inv_n_breach=1, p_th=p_th))


class TestReport:

    def test_curve_and_report(self):
        params = BreachParams(prior=1 / 105, inv_n_breach=2)
        report = breach_report(params, [0, 1, 2])
        assert report.classification is Classification.NON_ITS
        assert report.n_breach == 0.5
        assert [p.n for p in report.curve] == [0.0, 1.0, 2.0]
        assert report.curve[0].upper_bound == params.prior

    def test_unsorted_grid(self):
        with pytest.raises(ValueError):
            breach_curve(BreachParams(prior=0.1, inv_n_breach=1), [2, 1])

    def test_key_prior(self):
        assert key_prior((4, 3), (True, True)) == mp.mpf(1) / 105
        assert key_prior((8,)) == mp.mpf(1) / 256

    def test_invalid_prior(self):
        with pytest.raises(ValueError):
            BreachParams(prior=1, inv_n_breach=1)


class TestCounting:

    def test_average_success(self):
        assert average_success({'a': 0.6, 'b': 0.8}, {'a': 0.5, 'b': 0.5}) == pytest.approx(0.7)
        with pytest.raises(ValueError):
            average_success({'a': 0.6}, {'a': 0.5, 'b': 0.5})
        with pytest.raises(ValueError):
            average_success({'a': 0.6}, {'a': 0.9})

    @pytest.mark.parametrize("counts", [(3, 0, 2), (1, 1, 1, 1), (5,), (0, 4, 2, 1)])
    def test_multinomial_forms_agree(self, counts):
        assert multinomial_coefficient(counts) == binomial_chain(counts)

    def test_count_vectors(self):
        vectors = list(count_vectors(3, 2))
        assert len(vectors) == 6
        assert vectors[0] == (2, 0, 0)
        assert all(sum(v) == 2 for v in vectors)


class TestExactSuccess:

    @pytest.fixture
    def binary_model(self):
        return KeyHypothesisModel(np.array([0.8, 0.2]), M=1, t_lcm=1)

    def test_binary_majority(self, binary_model):
        exact = success_exact_small(binary_model.probs, 3, binary_model.omega())
        assert float(exact) == pytest.approx(0.8 ** 3 + 3 * 0.8 ** 2 * 0.2)

    def test_ties_count_against(self, binary_model):
        assert not binary_model.omega()((1, 1))
        assert binary_model.omega()((2, 0))

    def test_whole_space(self, binary_model):
        assert success_exact_small(binary_model.probs, 4, lambda counts: True) == 1

    def test_single_vector(self):
        probs = np.array([0.4, 0.3, 0.2, 0.1])
        exact = success_exact_small(probs, 3, lambda counts: counts == (3, 0, 0, 0))
        assert float(exact) == pytest.approx(0.4 ** 3)

    def test_mpmath_matches_fraction(self, binary_model):
        a = success_exact_small(binary_model.probs, 5, binary_model.omega())
        b = success_exact_small(binary_model.probs, 5, binary_model.omega(), arithmetic='mpmath')
        assert isinstance(a, Fraction)
        assert float(b) == pytest.approx(float(a), rel=1e-15)

    def test_limits(self, binary_model):
        with pytest.raises(InfeasibleSizeError):
            success_exact_small(binary_model.probs, 9, binary_model.omega())
        with pytest.raises(InfeasibleSizeError):
            success_exact_small(np.full(1 << 13, 2.0 ** -13), 1, lambda counts: True)
        with pytest.raises(InfeasibleSizeError):
            success_exact_small(single_slot([0.25] * 4), 2, lambda counts: True, cap=5)
        with pytest.raises(ValueError):
            success_exact_small(binary_model.probs, 2, binary_model.omega(), arithmetic='float')

    def test_model_size_check(self):
        with pytest.raises(ValueError):
            KeyHypothesisModel(np.full(3, 1 / 3), M=1, t_lcm=1)

    @pytest.mark.parametrize("trial", range(8))
    def test_exact_below_bound(self, trial):
        rng = np.random.default_rng(trial)
        t_lcm = 1 + trial % 2
        row = rng.dirichlet(np.full(2, 2.0))
        probs = row if t_lcm == 1 else np.kron(row, row)
        model = KeyHypothesisModel(probs, M=1, t_lcm=t_lcm)
        dist = ErrorPatternDist(M=1, t_lcm=t_lcm, rows=row[None, :], counts=np.array([t_lcm]), probs=probs)
        params = BreachParams.from_dist(dist, prior=mp.mpf(1) / probs.size)
        for n in range(1, 6):
            exact = success_exact_small(probs, n, model.omega())
            assert float(exact) <= float(success_upper_bound(params, n)) + 1e-12

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_complement_count_reference(self, n):
        model = KeyHypothesisModel(np.array([0.1, 0.2, 0.3, 0.4]), M=2, t_lcm=1)
        outside, reference = omega_complement_count(4, n, model.omega())
        assert outside >= reference

    def test_monte_carlo_agrees(self):
        model = KeyHypothesisModel(np.array([0.4, 0.3, 0.2, 0.1]), M=2, t_lcm=1)
        exact = float(success_exact_small(model.probs, 4, model.omega()))
        freq, se = simulate_key_recovery(model, 4, 100_000, seed=3)
        assert abs(freq - exact) <= 4 * se
