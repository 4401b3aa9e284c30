from dataclasses import replace

import numpy as np
import pytest
from scipy.special import ndtr

from y00lab.channel import (bob_receive, decide_symbol, decision_regions, eve_view_joint,
                            pattern_dist, slot_offset_dist, symbol_error_dist, tap_and_measure)
from y00lab.config import BreachSettings
from y00lab.errors import PeriodUnknownError, UnsupportedConfigurationError
from y00lab.prng import expand_running_key
from y00lab.y00core import SymbolTrace, symbol_amplitudes

from conftest import make_cfg


def constant_trace(cfg, m, n):
    m = np.full(n, m, dtype=np.int64)
    return SymbolTrace(m=m, amplitude=symbol_amplitudes(cfg)[m], x=np.zeros(n, dtype=np.uint8))


def within_sigma(freq, probs, n, k=4.0):
    sd = np.sqrt(probs * (1 - probs) / n)
    return np.all(np.abs(freq - probs) <= k * sd + 1e-12)


class TestDecisionRegions:

    @pytest.mark.parametrize("geometry", ['psk', 'isk'])
    def test_signal_means_decide_to_themselves(self, geometry):
        cfg = make_cfg(4, geometry=geometry)
        regions = decision_regions(cfg, cfg.alpha0)
        np.testing.assert_array_equal(decide_symbol(symbol_amplitudes(cfg), regions), np.arange(8))

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_psk_rotation_shifts_index(self, k):
        cfg = make_cfg(8)
        regions = decision_regions(cfg)
        rotated = symbol_amplitudes(cfg) * np.exp(1j * np.pi * k / 8)
        np.testing.assert_array_equal(decide_symbol(rotated, regions), (np.arange(16) + k) % 16)

    def test_boundary_goes_to_lower_index(self):
        regions = decision_regions(make_cfg(2))
        assert decide_symbol(1 + 1j, regions) == 0

    def test_isk_cells_tile_real_line(self):
        regions = decision_regions(make_cfg(4, geometry='isk'), 8.0)
        bounds = [regions.cell_bounds(m) for m in range(8)]
        assert bounds[0][0] == -np.inf and bounds[-1][1] == np.inf
        for (_, hi), (lo, _) in zip(bounds, bounds[1:]):
            assert hi == lo

    def test_uniform_outcomes_match_cell_measures(self, rng):
        regions = decision_regions(make_cfg(4))
        n = 200_000
        outcomes = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        freq = np.bincount(decide_symbol(outcomes, regions), minlength=8) / n
        assert within_sigma(freq, np.full(8, 1 / 8), n)


class TestSampling:

    def test_deterministic_given_seed(self, small_cfg):
        trace = constant_trace(small_cfg, 3, 100)
        np.testing.assert_array_equal(tap_and_measure(trace, small_cfg, [1, 2]),
                                      tap_and_measure(trace, small_cfg, [1, 2]))

    def test_no_tap_is_vacuum(self):
        cfg = make_cfg(4, eta=0.0)
        outcomes = tap_and_measure(constant_trace(cfg, 1, 100_000), cfg, 5)
        assert abs(outcomes.mean()) < 0.02
        np.testing.assert_allclose(outcomes.real.var(), 1.0, rtol=0.02)

    def test_binary_crossover_gaussian_tail(self):
        cfg = make_cfg(2, eta=1.0, alpha0=2.0)
        n = 200_000
        outcomes = tap_and_measure(constant_trace(cfg, 0, n), cfg, 17)
        crossover = np.mean(outcomes.real < 0)
        expected = ndtr(-2.0)
        assert abs(crossover - expected) <= 4 * np.sqrt(expected * (1 - expected) / n)

    def test_bob_noiseless(self, small_cfg):
        trace = constant_trace(small_cfg, 2, 4)
        np.testing.assert_allclose(bob_receive(trace, small_cfg, 0, noiseless=True),
                                   0.5 * trace.amplitude)


class TestSymbolErrorDist:

    @pytest.mark.parametrize("geometry", ['psk', 'isk'])
    @pytest.mark.parametrize("true_m", [0, 3, 7])
    def test_sums_to_one(self, geometry, true_m):
        cfg = make_cfg(4, geometry=geometry, eta=1.0, alpha0=2.0)
        np.testing.assert_allclose(symbol_error_dist(true_m, cfg).sum(), 1.0, atol=1e-9)

    def test_vanishing_noise(self, small_cfg):
        dist = symbol_error_dist(0, small_cfg, scale=30.0)
        np.testing.assert_allclose(dist, np.eye(8)[0], atol=1e-9)

    @pytest.mark.parametrize("geometry", ['psk', 'isk'])
    def test_pure_noise_uniform(self, geometry):
        cfg = make_cfg(4, geometry=geometry)
        np.testing.assert_allclose(symbol_error_dist(2, cfg, scale=0.0), np.full(8, 1 / 8))

    def test_psk_shift_invariant(self, small_cfg):
        reference = symbol_error_dist(0, small_cfg)
        for m in range(1, 8):
            np.testing.assert_allclose(symbol_error_dist(m, small_cfg), reference)

    def test_psk_matches_monte_carlo(self):
        cfg = make_cfg(4, eta=1.0, alpha0=1.0)
        n = 1_000_000
        outcomes = tap_and_measure(constant_trace(cfg, 0, n), cfg, 23)
        freq = np.bincount(decide_symbol(outcomes, decision_regions(cfg)), minlength=8) / n
        assert within_sigma(freq, symbol_error_dist(0, cfg), n)

    def test_isk_matches_monte_carlo(self):
        cfg = make_cfg(4, geometry='isk', eta=1.0, alpha0=8.0)
        n = 400_000
        m = 5
        outcomes = tap_and_measure(constant_trace(cfg, m, n), cfg, 29)
        detected = decide_symbol(outcomes, decision_regions(cfg))
        freq = np.bincount((detected - m) % 8, minlength=8) / n
        assert within_sigma(freq, symbol_error_dist(m, cfg), n)

    def test_out_of_range_index(self, small_cfg):
        with pytest.raises(ValueError):
            symbol_error_dist(8, small_cfg)


class TestPatternDist:

    def test_uniform_single_slot(self):
        dist = pattern_dist(make_cfg(2, eta=0.0), t_lcm=1)
        assert dist.pattern_len == 2
        np.testing.assert_allclose(dist.min_prob, 0.25)

    def test_uniform_two_slots(self):
        dist = pattern_dist(make_cfg(2, eta=0.0), t_lcm=2)
        assert dist.pattern_len == 4
        np.testing.assert_allclose(dist.min_prob, 1 / 16)
        np.testing.assert_allclose(dist.probs.sum(), 1.0, atol=1e-10)

    def test_product_of_slot_rows(self):
        cfg = make_cfg(4, eta=1.0, alpha0=1.0)
        dist = pattern_dist(cfg, t_lcm=2)
        row = symbol_error_dist(0, cfg)
        np.testing.assert_allclose(dist.probs, np.kron(row, row))
        np.testing.assert_allclose(dist.min_prob, row.min() ** 2)
        assert dist.min_prob <= 8.0 ** -2

    def test_product_form_beyond_dense_cap(self, small_cfg):
        dist = pattern_dist(small_cfg)
        assert dist.t_lcm == 105
        assert dist.probs is None
        row = slot_offset_dist(small_cfg, 0)
        np.testing.assert_allclose(dist.log2_min_prob, 105 * np.log2(row.min()))
        assert dist.log2_min_prob <= -105 * 3

    def test_period_unknown_refused(self, identity_cfg):
        with pytest.raises(PeriodUnknownError):
            pattern_dist(identity_cfg, settings=BreachSettings(period_cap=100))

    def test_isk_needs_key_and_plaintext(self, rng):
        cfg = make_cfg(4, geometry='isk')
        with pytest.raises(ValueError):
            pattern_dist(cfg, t_lcm=105)
        r = expand_running_key(cfg.prng_s.seed, cfg.prng_dx.seed, cfg, 105)
        x = rng.integers(0, 2, 105)
        dist = pattern_dist(cfg, r, x)
        assert dist.counts.sum() == 105
        assert dist.slot_rows is not None

    def test_isk_product_cap(self, rng):
        cfg = make_cfg(4, geometry='isk')
        r = expand_running_key(cfg.prng_s.seed, cfg.prng_dx.seed, cfg, 105)
        with pytest.raises(UnsupportedConfigurationError):
            pattern_dist(cfg, r, rng.integers(0, 2, 105), settings=BreachSettings(product_cap_slots=10))

    def test_true_random_dsr_flattens(self):
        plain = make_cfg(4, eta=1.0, alpha0=3.0)
        dsr = replace(plain, dsr=replace(plain.dsr, mode='true_random'))
        uniform = np.full(8, 1 / 8)
        tv = lambda row: 0.5 * np.abs(row - uniform).sum()
        row_dsr = slot_offset_dist(dsr, 0)
        np.testing.assert_allclose(row_dsr.sum(), 1.0, atol=1e-9)
        assert tv(row_dsr) < tv(slot_offset_dist(plain, 0))

    @pytest.mark.parametrize("m_ref", [0, 3, 4, 7])
    def test_true_random_dsr_row_is_uniform(self, m_ref):
        cfg = make_cfg(4, eta=1.0, alpha0=6.0, mapping='irregular', dsr='true_random')
        np.testing.assert_allclose(slot_offset_dist(cfg, m_ref), np.full(8, 1 / 8), atol=1e-12)

    def test_true_random_dsr_hides_half_plane(self, protected_cfg):
        joint = eve_view_joint(protected_cfg, s=5, dx=1)
        np.testing.assert_allclose(joint.table[0], joint.table[1], atol=1e-12)


class TestEveView:

    def test_joint_is_distribution(self, small_cfg):
        joint = eve_view_joint(small_cfg)
        np.testing.assert_allclose(joint.table.sum(), 1.0, atol=1e-12)
        np.testing.assert_allclose(joint.table.sum(axis=1), [0.5, 0.5], atol=1e-12)

    def test_known_key_reveals_plaintext(self, small_cfg):
        joint = eve_view_joint(replace(small_cfg, alpha0=40.0), s=1, dx=0)
        assert joint.table.max(axis=0).sum() > 1 - 1e-9
