"""
Exact entropy computations on enumerated joint distributions

All logarithms are base 2 and 0 * log 0 = 0.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from y00lab.errors import InfeasibleSizeError

logger = logging.getLogger(__name__)

MAX_TABLE_ENTRIES = 1 << 20
TOLERANCE = 1e-12


class JointDist:
    """
    Probability table over named finite random variables

    Args:
        names: Variable names, one per table axis
        table: Non-negative array summing to one
    """

    def __init__(self, names: Sequence[str], table: np.ndarray):
        table = np.asarray(table, dtype=float)
        names = tuple(names)
        if table.ndim != len(names) or len(set(names)) != len(names):
            raise ValueError(f"{len(names)} distinct names needed for a {table.ndim}-axis table")
        if table.size > MAX_TABLE_ENTRIES:
            raise InfeasibleSizeError(f"joint table has {table.size} entries, cap is {MAX_TABLE_ENTRIES}")
        if table.size and table.min() < 0:
            raise ValueError("probabilities must be non-negative")
        total = table.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        self.names = names
        self.table = table

    def axes(self, names: Sequence[str]) -> Tuple[int, ...]:
        missing = [n for n in names if n not in self.names]
        if missing:
            raise KeyError(f"unknown variables {missing}")
        return tuple(self.names.index(n) for n in names)

    def marginal(self, names: Sequence[str]) -> "JointDist":
        """Marginal over names, axes in the given order"""
        keep = self.axes(names)
        drop = tuple(i for i in range(len(self.names)) if i not in keep)
        table = self.table.sum(axis=drop) if drop else self.table
        # After summation the kept axes appear in ascending order
        order = sorted(keep)
        table = np.transpose(table, [order.index(i) for i in keep])
        return JointDist(tuple(names), table)

    def __repr__(self) -> str:
        return f"JointDist({self.names}, shape={self.table.shape})"


def shannon(p: np.ndarray) -> float:
    """Shannon entropy of a probability array, in bits"""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _joint_entropy(dist: JointDist, names: Sequence[str]) -> float:
    if not names:
        return 0.0
    return shannon(dist.marginal(names).table)


def entropy(dist: JointDist, variables: Sequence[str], given: Sequence[str] = ()) -> float:
    """
    Conditional entropy H(variables | given) = H(variables, given) - H(given)

    Args:
        dist: Joint distribution
        variables: Target variables
        given: Conditioning variables, disjoint from variables

    Returns:
        Entropy in bits
    """
    variables, given = tuple(variables), tuple(given)
    if set(variables) & set(given):
        raise ValueError("target and conditioning variables overlap")
    return _joint_entropy(dist, variables + given) - _joint_entropy(dist, given)


@dataclass
class EntropyChainReport:
    """Secrecy inequality chain for S given Eve's ciphertext view and X"""
    lhs: float
    rhs_joint: float
    rhs: float
    gap: float
    residual_equivocation: float
    equality: bool
    holds: bool


def entropy_chain_check(dist: JointDist, names: Tuple[str, str, str, str] = ('S', 'C_E', 'X', 'E')) -> EntropyChainReport:
    """
    Check H(S|C_E,X) >= H(S,C_E,X) - H(C_E,X,E) under C_E = X xor S xor E

    The chain's right-hand side evaluates to H(S|C_E,X,E) = 0 for any table
    satisfying the cipher constraint; the gap to it is the key equivocation,
    which vanishes exactly when E is a function of (C_E, X).

    Args:
        dist: Joint distribution over the four variables (integer alphabets)
        names: Names of (S, C_E, X, E) in dist

    Returns:
        EntropyChainReport
    """
    s_name, c_name, x_name, e_name = names
    full = dist.marginal([s_name, c_name, x_name, e_name]).table
    s, c, x, e = np.indices(full.shape)
    violating = full[(c != (x ^ s ^ e)) & (full > 0)]
    if violating.size:
        raise ValueError("distribution violates C_E = X + S + E mod 2")

    lhs = entropy(dist, [s_name], [c_name, x_name])
    rhs_joint = (_joint_entropy(dist, [s_name, c_name, x_name])
                   - _joint_entropy(dist, [c_name, x_name, e_name]))
    residual = entropy(dist, [s_name], [c_name, x_name, e_name])
    gap = lhs - residual
    report = EntropyChainReport(
        lhs=lhs,
        rhs_joint=rhs_joint,
        rhs=residual,
        gap=gap,
        residual_equivocation=entropy(dist, [e_name], [c_name, x_name]),
        equality=abs(gap) <= 1e-10,
        holds=lhs >= rhs_joint - 1e-10 and lhs >= residual - 1e-10
    )
    logger.debug(f"Entropy chain: {report}")
    return report


@dataclass
class SecrecyReport:
    """Perfect-secrecy test of Pr(X|C) against Pr(X)"""
    perfect: bool
    max_deviation: float
    ciphertext_marginal_deviation: float


def perfect_secrecy_check(dist: JointDist, x_name: str = 'X', c_name: str = 'C',
                          tolerance: float = 1e-12) -> SecrecyReport:
    """
    Test Pr(X=x | C=c) = Pr(X=x) for every c with Pr(c) > 0

    The deviation of the form Pr(X|C) = Pr(C) is reported alongside.
    """
    table = dist.marginal([x_name, c_name]).table
    p_c = table.sum(axis=0)
    p_x = table.sum(axis=1)
    seen = p_c > 0
    conditional = table[:, seen] / p_c[seen]
    deviation = float(np.abs(conditional - p_x[:, None]).max()) if seen.any() else 0.0
    against_c = np.abs(conditional - p_c[seen][None, :])
    marginal_deviation = float(against_c.max()) if seen.any() else 0.0
    return SecrecyReport(perfect=deviation <= tolerance, max_deviation=deviation,
                         ciphertext_marginal_deviation=marginal_deviation)


@dataclass
class MinEntropy:
    """Average-conditional min-entropy and its worst-key variant"""
    average: float
    worst_key: float


def min_entropy(dist: JointDist, target: Sequence[str], given: Sequence[str] = (),
                key: Optional[str] = None) -> MinEntropy:
    """
    H_inf(target | given) = -log2 sum_c max_x Pr(x, c)

    Args:
        dist: Joint distribution
        target: Variables being guessed
        given: Conditioning variables
        key: Conditioning variable replaced by its worst single value for the
            second form, min_r H_inf(target | other given, R = r)

    Returns:
        MinEntropy; worst_key <= average
    """
    target, given = tuple(target), tuple(given)
    if set(target) & set(given):
        raise ValueError("target and conditioning variables overlap")
    table = dist.marginal(target + given).table
    n_target = len(target)
    flat = table.reshape(int(np.prod(table.shape[:n_target])), -1)
    average = float(-np.log2(flat.max(axis=0).sum()))

    worst = average
    if key is not None:
        if key not in given:
            raise ValueError(f"key variable {key!r} must be a conditioning variable")
        others = tuple(g for g in given if g != key)
        keyed = dist.marginal((key,) + target + others).table
        worst = np.inf
        for r in range(keyed.shape[0]):
            p_r = keyed[r].sum()
            if p_r <= 0:
                continue
            block = (keyed[r] / p_r).reshape(flat.shape[0], -1)
            worst = min(worst, float(-np.log2(block.max(axis=0).sum())))
    return MinEntropy(average=max(average, 0.0), worst_key=max(worst, 0.0))
