import numpy as np
import pytest

from y00lab.errors import InfeasibleSizeError
from y00lab.infotheory import (JointDist, entropy_chain_check, entropy, min_entropy,
                               perfect_secrecy_check, shannon)


def cipher_table(p_s, p_x, e_given_x):
    """Table over (S, C_E, X, E) with C_E = X xor S xor E"""
    table = np.zeros((2, 2, 2, 2))
    for s in range(2):
        for x in range(2):
            for e in range(2):
                table[s, x ^ s ^ e, x, e] += p_s[s] * p_x[x] * e_given_x[x][e]
    return JointDist(('S', 'C_E', 'X', 'E'), table)


class TestJointDist:

    def test_rejects_bad_tables(self):
        with pytest.raises(ValueError):
            JointDist(('A',), [0.5, 0.6])
        with pytest.raises(ValueError):
            JointDist(('A',), [1.5, -0.5])
        with pytest.raises(ValueError):
            JointDist(('A', 'A'), np.full((2, 2), 0.25))

    def test_size_cap(self):
        with pytest.raises(InfeasibleSizeError):
            JointDist(('A',), np.zeros(1 << 21))

    def test_marginal_keeps_requested_order(self, rng):
        table = rng.random((2, 3, 4))
        dist = JointDist(('A', 'B', 'C'), table / table.sum())
        np.testing.assert_allclose(dist.marginal(['C', 'A']).table, (table / table.sum()).sum(axis=1).T)


class TestEntropy:

    def test_shannon_examples(self):
        assert shannon([0.5, 0.5]) == pytest.approx(1.0)
        assert shannon([1.0, 0.0]) == 0.0
        assert shannon(np.full(8, 1 / 8)) == pytest.approx(3.0)

    def test_conditional(self):
        # B copies A, both uniform
        dist = JointDist(('A', 'B'), np.diag([0.5, 0.5]))
        assert entropy(dist, ['A']) == pytest.approx(1.0)
        assert entropy(dist, ['A'], ['B']) == pytest.approx(0.0)
        assert entropy(dist, ['A', 'B']) == pytest.approx(1.0)

    def test_overlap_rejected(self):
        dist = JointDist(('A', 'B'), np.full((2, 2), 0.25))
        with pytest.raises(ValueError):
            entropy(dist, ['A'], ['A'])


class TestEntropyChain:

    def test_uniform_noise_has_gap(self):
        report = entropy_chain_check(cipher_table([0.5, 0.5], [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]]))
        assert report.lhs == pytest.approx(1.0)
        assert report.rhs == pytest.approx(0.0, abs=1e-12)
        assert report.rhs_joint == pytest.approx(0.0, abs=1e-12)
        assert report.gap == pytest.approx(1.0)
        assert report.residual_equivocation == pytest.approx(1.0)
        assert report.holds and not report.equality

    def test_noiseless_collapses_to_equality(self):
        report = entropy_chain_check(cipher_table([0.5, 0.5], [0.3, 0.7], [[1.0, 0.0], [1.0, 0.0]]))
        assert report.lhs == pytest.approx(0.0, abs=1e-12)
        assert report.equality

    def test_error_determined_by_plaintext(self):
        report = entropy_chain_check(cipher_table([0.5, 0.5], [0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]]))
        assert report.residual_equivocation == pytest.approx(0.0, abs=1e-12)
        assert report.equality

    @pytest.mark.parametrize("trial", range(20))
    def test_random_tables_hold(self, trial):
        rng = np.random.default_rng(trial)
        p_s, p_x = rng.dirichlet([1, 1]), rng.dirichlet([1, 1])
        e_given_x = rng.dirichlet([1, 1], size=2)
        report = entropy_chain_check(cipher_table(p_s, p_x, e_given_x))
        assert report.holds
        assert report.gap >= -1e-12

    def test_constraint_violation(self):
        table = np.zeros((2, 2, 2, 2))
        table[0, 1, 0, 0] = 1.0
        with pytest.raises(ValueError):
            entropy_chain_check(JointDist(('S', 'C_E', 'X', 'E'), table))


class TestPerfectSecrecy:

    def test_one_time_pad(self):
        p_x = np.array([0.3, 0.7])
        table = np.zeros((2, 2))
        for x in range(2):
            for k in range(2):
                table[x, x ^ k] += p_x[x] * 0.5
        report = perfect_secrecy_check(JointDist(('X', 'C'), table))
        assert report.perfect
        # the Pr(X|C) = Pr(C) form disagrees for a non-uniform plaintext
        assert report.ciphertext_marginal_deviation == pytest.approx(0.2)

    def test_cleartext_not_secret(self):
        report = perfect_secrecy_check(JointDist(('X', 'C'), np.diag([0.3, 0.7])))
        assert not report.perfect
        assert report.max_deviation == pytest.approx(0.7)


class TestMinEntropy:

    def test_uniform(self):
        dist = JointDist(('X',), np.full(4, 0.25))
        assert min_entropy(dist, ['X']).average == pytest.approx(2.0)

    def test_revealing_side_information(self):
        dist = JointDist(('X', 'C'), np.diag(np.full(4, 0.25)))
        assert min_entropy(dist, ['X'], ['C']).average == pytest.approx(0.0, abs=1e-12)

    def test_worst_key(self):
        # R = 0 leaves X uniform, R = 1 reveals it
        table = np.array([[0.25, 0.5], [0.25, 0.0]])
        dist = JointDist(('X', 'R'), table)
        result = min_entropy(dist, ['X'], ['R'], key='R')
        assert result.average == pytest.approx(-np.log2(0.75))
        assert result.worst_key == pytest.approx(0.0, abs=1e-12)
        assert result.worst_key <= result.average

    def test_key_must_be_conditioning(self):
        dist = JointDist(('X', 'R'), np.full((2, 2), 0.25))
        with pytest.raises(ValueError):
            min_entropy(dist, ['X'], key='R')

    @pytest.mark.parametrize("trial", range(10))
    def test_bounded_by_shannon(self, trial):
        rng = np.random.default_rng(100 + trial)
        table = rng.dirichlet(np.ones(12)).reshape(3, 4)
        dist = JointDist(('X', 'C'), table)
        assert min_entropy(dist, ['X'], ['C']).average <= entropy(dist, ['X'], ['C']) + 1e-12
