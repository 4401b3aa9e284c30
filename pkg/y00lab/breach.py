"""
Breach-time analytics for the generalised fast correlation attack

Everything that touches Pr(r) or 1/N_Breach runs through mpmath at
extended precision: the key-scale parameters involve 2**-512 quantities
that double precision cannot hold next to 1.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import comb, factorial, prod
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from mpmath.ctx_mp import MPContext

from y00lab.channel import ErrorPatternDist
from y00lab.errors import InfeasibleSizeError

logger = logging.getLogger(__name__)

PRECISION_BITS = 128
IDEAL_TOLERANCE = 1e-12
LIKELIHOOD_TOLERANCE = 1e-9

mp = MPContext()
mp.prec = PRECISION_BITS

Number = Union[float, int, mpmath.mpf]


class Classification(str, Enum):
    NON_ITS = "NonITS"
    ITS = "ITS"
    IDEAL = "Ideal"


def n_breach(dist: ErrorPatternDist, M: Optional[int] = None,
             t_lcm: Optional[int] = None) -> Tuple[mpmath.mpf, mpmath.mpf]:
    """
    Characteristic number of periods before Eve's bound halves its distance to one

    Args:
        dist: Per-period error-pattern distribution
        M: Number of bases (defaults to dist.M)
        t_lcm: Period in slots (defaults to dist.t_lcm)

    Returns:
        (1/N_Breach, N_Breach) as mpf; N_Breach = +inf when 1/N_Breach = 0 and
        1/N_Breach = +inf (N_Breach = 0) when some pattern has probability zero
    """
    M = dist.M if M is None else M
    t_lcm = dist.t_lcm if t_lcm is None else t_lcm
    log2_min = dist.log2_min_prob
    if dist.probs is not None:
        minimum = float(dist.probs.min())
        log2_min = -np.inf if minimum <= 0 else float(np.log2(minimum))
    if log2_min == -np.inf:
        logger.warning("Some error pattern has probability zero: instant breach")
        return mp.inf, mp.mpf(0)
    base = 2 * M
    log2_base = mp.mpf(base.bit_length() - 1) if base & (base - 1) == 0 else mp.log(base, 2)
    inv = -(mp.mpf(t_lcm) * log2_base + mp.mpf(log2_min))
    if inv < 0:
        # Rounding only: the minimum of a distribution never exceeds the uniform value
        inv = mp.mpf(0)
    return inv, (mp.inf if inv == 0 else 1 / inv)


def classify_its(inv_n_breach: Number) -> Classification:
    """NonITS when 1/N_Breach > 1, ITS when 0 < 1/N_Breach <= 1, Ideal at 0"""
    inv = mp.mpf(inv_n_breach)
    if inv < 0:
        raise ValueError("1/N_Breach must be non-negative")
    if inv <= IDEAL_TOLERANCE:
        return Classification.IDEAL
    if inv <= 1:
        return Classification.ITS
    return Classification.NON_ITS


@dataclass
class BreachParams:
    """Prior of the true key, 1/N_Breach and the security threshold"""
    prior: mpmath.mpf
    inv_n_breach: mpmath.mpf
    p_th: mpmath.mpf = field(default_factory=lambda: mp.mpf('0.5'))
    dist: Optional[ErrorPatternDist] = None

    def __post_init__(self):
        self.prior = mp.mpf(self.prior)
        self.inv_n_breach = mp.mpf(self.inv_n_breach)
        self.p_th = mp.mpf(self.p_th)
        if not 0 < self.prior < 1:
            raise ValueError("prior Pr(r) must lie in (0, 1)")

    @classmethod
    def from_dist(cls, dist: ErrorPatternDist, prior: Number, p_th: Number = 0.5) -> "BreachParams":
        inv, _ = n_breach(dist)
        return cls(prior=prior, inv_n_breach=inv, p_th=p_th, dist=dist)

    @property
    def n_breach(self) -> mpmath.mpf:
        return mp.inf if self.inv_n_breach == 0 else 1 / self.inv_n_breach

    @property
    def classification(self) -> Classification:
        return classify_its(self.inv_n_breach)


def key_prior(widths: Sequence[int], nonzero: Sequence[bool] = ()) -> mpmath.mpf:
    """
    Uniform prior 1/|Set(R)| over the running-key seeds

    Args:
        widths: Seed widths of the key generators
        nonzero: Per generator, whether the all-zero seed is excluded (LFSRs)
    """
    size = mp.mpf(1)
    for i, width in enumerate(widths):
        space = mp.mpf(2) ** width
        if i < len(nonzero) and nonzero[i]:
            space -= 1
        size *= space
    return 1 / size


def reference_params() -> List[BreachParams]:
    """Pr(r) = (2^256 - 1)^-2 with 1/N_Breach = 1 - 2^-13, 1 - 2^-26, 1 - 2^-52"""
    prior = key_prior((256, 256), (True, True))
    return [BreachParams(prior=prior, inv_n_breach=1 - mp.mpf(2) ** -k) for k in (13, 26, 52)]


def _decay(params: BreachParams, n: Number) -> mpmath.mpf:
    """2^(-N / N_Breach)"""
    if params.inv_n_breach == mp.inf:
        return mp.mpf(0) if n > 0 else mp.mpf(1)
    return mp.exp(-mp.mpf(n) * params.inv_n_breach * mp.ln2)


def success_upper_bound(params: BreachParams, n: Number) -> mpmath.mpf:
    """
    Eve's success bound 1 - (1 - Pr(r)) 2^(-N / N_Breach)

    Evaluated as (1 - 2^-a) + Pr(r) 2^-a so that Pr(r) survives at N = 0.
    """
    if n < 0:
        raise ValueError("N must be >= 0")
    if params.inv_n_breach == mp.inf:
        return mp.mpf(1) if n > 0 else params.prior
    a = mp.mpf(n) * params.inv_n_breach * mp.ln2
    return -mp.expm1(-a) + params.prior * mp.exp(-a)


def distance_to_one(params: BreachParams, n: Number) -> mpmath.mpf:
    """1 - success_upper_bound, computed without cancellation"""
    return (1 - params.prior) * _decay(params, n)


def time_to_threshold(params: BreachParams) -> mpmath.mpf:
    """
    Periods until the bound reaches P_Th: N_Breach * log2[(1 - Pr(r)) / (1 - P_Th)]

    Returns +inf for Ideal systems.
    """
    if not params.prior < params.p_th < 1:
        raise ValueError("need Pr(r) < P_Th < 1")
    if params.classification is Classification.IDEAL:
        return mp.inf
    if params.inv_n_breach == mp.inf:
        return mp.mpf(0)
    log_ratio = (mp.log1p(-params.prior) - mp.log1p(-params.p_th)) / mp.ln2
    return log_ratio / params.inv_n_breach


@dataclass
class CurvePoint:
    n: float
    upper_bound: mpmath.mpf
    distance_to_one: mpmath.mpf
    exact: Optional[float] = None


def breach_curve(params: BreachParams, n_grid: Sequence[Number]) -> List[CurvePoint]:
    """Sampled (N, bound) pairs over a sorted grid"""
    grid = list(n_grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted")
    return [CurvePoint(float(n), success_upper_bound(params, n), distance_to_one(params, n))
            for n in grid]


@dataclass
class BreachReport:
    """N_Breach, classification and the success curve of one system"""
    inv_n_breach: mpmath.mpf
    n_breach: mpmath.mpf
    classification: Classification
    n_at_threshold: mpmath.mpf
    prior: mpmath.mpf
    p_th: mpmath.mpf
    curve: List[CurvePoint] = field(default_factory=list)


def breach_report(params: BreachParams, n_grid: Sequence[Number] = ()) -> BreachReport:
    """Assemble a BreachReport from parameters and a grid"""
    return BreachReport(
        inv_n_breach=params.inv_n_breach,
        n_breach=params.n_breach,
        classification=params.classification,
        n_at_threshold=time_to_threshold(params),
        prior=params.prior,
        p_th=params.p_th,
        curve=breach_curve(params, n_grid) if len(n_grid) else []
    )


def average_success(per_key: Dict, prior: Dict) -> float:
    """
    Prior-weighted average of per-key success probabilities

    Args:
        per_key: Mapping key -> Pr(correct | key)
        prior: Mapping key -> Pr(key), summing to one
    """
    total = sum(prior.values())
    if abs(float(total) - 1.0) > 1e-12:
        raise ValueError(f"prior sums to {total}, not 1")
    if set(per_key) != set(prior):
        raise ValueError("per-key table and prior cover different keys")
    return sum(prior[k] * per_key[k] for k in prior)


# Pattern-count enumeration

PatternCounts = Tuple[int, ...]


def multinomial_coefficient(counts: Sequence[int]) -> int:
    """N! / prod n(e)!"""
    return factorial(sum(counts)) // prod(factorial(c) for c in counts)


def binomial_chain(counts: Sequence[int]) -> int:
    """Product of C(N - n_1 - ... - n_{k-1}, n_k), equal to the multinomial coefficient"""
    remaining = sum(counts)
    result = 1
    for c in counts:
        result *= comb(remaining, c)
        remaining -= c
    return result


def count_vectors(n_patterns: int, total: int):
    """All count vectors of length n_patterns summing to total (lexicographic)"""
    if n_patterns == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in count_vectors(n_patterns - 1, total - first):
            yield (first,) + rest


class KeyHypothesisModel:
    """
    Eve's pattern-level key decision

    Hypothesis s shifts every slot's detected index by s, so with the true key
    at shift zero, hypothesis s has log-likelihood sum_e n(e) log Pr(e - s).
    The decision is correct only when shift zero is the unique maximum; ties
    count against Eve.

    Args:
        probs: Dense pattern probabilities (length (2M)^T)
        M: Number of bases
        t_lcm: Slots per pattern
    """

    def __init__(self, probs: np.ndarray, M: int, t_lcm: int):
        self.probs = np.asarray(probs, dtype=float)
        self.M = M
        self.t_lcm = t_lcm
        base = 2 * M
        n = base ** t_lcm
        if self.probs.size != n:
            raise ValueError(f"expected {n} pattern probabilities, got {self.probs.size}")
        digits = np.array(np.unravel_index(np.arange(n), (base,) * t_lcm)).T
        diff = (digits[:, None, :] - digits[None, :, :]) % base
        self.shifted = np.ravel_multi_index(tuple(diff.transpose(2, 0, 1)), (base,) * t_lcm)
        with np.errstate(divide='ignore'):
            log_p = np.log(self.probs)
        self.log_likelihood = np.where(np.isfinite(log_p), log_p, -1e250)[self.shifted]

    @property
    def n_hypotheses(self) -> int:
        return self.probs.size

    def scores(self, counts: np.ndarray) -> np.ndarray:
        """Log-likelihood of every hypothesis for count vectors (rows)"""
        return np.asarray(counts, dtype=float) @ self.log_likelihood

    def correct(self, counts: np.ndarray) -> np.ndarray:
        scores = np.atleast_2d(self.scores(counts))
        rivals = scores[:, 1:].max(axis=1) if scores.shape[1] > 1 else np.full(len(scores), -np.inf)
        return scores[:, 0] > rivals + LIKELIHOOD_TOLERANCE

    def omega(self) -> Callable[[PatternCounts], bool]:
        """Membership predicate for counts on which the true key wins"""
        return lambda counts: bool(self.correct(np.asarray(counts))[0])


def success_exact_small(dist: Union[ErrorPatternDist, np.ndarray], n: int,
                        omega: Callable[[PatternCounts], bool], *,
                        arithmetic: str = 'fraction',
                        cap: int = 2_000_000) -> Union[Fraction, mpmath.mpf]:
    """
    Exact probability that the N-period count vector lands in Omega

    Args:
        dist: Pattern distribution with a dense table, or the table itself
        n: Number of observed periods
        omega: Membership predicate over count vectors
        arithmetic: 'fraction' (exact rationals) or 'mpmath' (128-bit mantissa)
        cap: Largest number of count vectors enumerated

    Returns:
        Sum over Omega of N!/prod n(e)! * prod Pr(e)^n(e)
    """
    probs = dist.probs if isinstance(dist, ErrorPatternDist) else np.asarray(dist, dtype=float)
    if probs is None:
        raise InfeasibleSizeError("exact success needs a dense pattern table")
    k = probs.size
    if k > 1 << 12 or n > 8:
        raise InfeasibleSizeError(f"exact enumeration limited to |e| <= 12 bits and N <= 8 "
                                  f"(got {k} patterns, N={n})")
    vectors = comb(n + k - 1, n)
    if vectors > cap:
        raise InfeasibleSizeError(f"{vectors} count vectors exceed the enumeration cap {cap}")

    if arithmetic == 'fraction':
        weights = [Fraction(float(p)) for p in probs]
        norm = sum(weights)
        weights = [w / norm for w in weights]
        total = Fraction(0)
    elif arithmetic == 'mpmath':
        weights = [mp.mpf(float(p)) for p in probs]
        norm = mp.fsum(weights)
        weights = [w / norm for w in weights]
        total = mp.mpf(0)
    else:
        raise ValueError(f"unknown arithmetic {arithmetic!r}")

    for counts in count_vectors(k, n):
        if not omega(counts):
            continue
        term = multinomial_coefficient(counts)
        for w, c in zip(weights, counts):
            if c:
                term *= w ** c
        total += term
    return total


def omega_complement_count(k: int, n: int, omega: Callable[[PatternCounts], bool],
                           cap: int = 2_000_000) -> Tuple[int, Fraction]:
    """
    Sequences of N patterns outside Omega, and the reference (1 - 1/K) K^N

    For a shift-invariant decision the first is never below the second.
    """
    if comb(n + k - 1, n) > cap:
        raise InfeasibleSizeError("count-vector space exceeds the enumeration cap")
    outside = sum(multinomial_coefficient(c) for c in count_vectors(k, n) if not omega(c))
    return outside, (1 - Fraction(1, k)) * Fraction(k) ** n


def simulate_key_recovery(model: KeyHypothesisModel, n: int, trials: int,
                          seed, batch: int = 100_000) -> Tuple[float, float]:
    """
    Monte Carlo frequency of correct ML key decisions

    Returns:
        (success frequency, binomial standard error)
    """
    rng = np.random.default_rng(seed)
    probs = model.probs / model.probs.sum()
    wins = 0
    done = 0
    while done < trials:
        size = min(batch, trials - done)
        counts = rng.multinomial(n, probs, size=size)
        wins += int(model.correct(counts).sum())
        done += size
    freq = wins / trials
    return freq, float(np.sqrt(max(freq * (1 - freq), 1e-300) / trials))
