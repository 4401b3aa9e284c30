"""
Leftover-hash key refreshment

Alice sends a random string over the Y00 channel instead of a message: a
Toeplitz hash seed, a raw key k_R and a short integrity check, protected
by a repetition code. Both parties hash k_R into the next (k, dk).
"""

import hashlib
import logging
from dataclasses import dataclass, field
from math import ceil, floor, log2
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import toeplitz

from y00lab.breach import BreachReport
from y00lab.channel import bob_receive, eve_view_joint, tap_and_measure
from y00lab.config import Y00Config
from y00lab.errors import InfeasibleSizeError, RefreshAbortedError
from y00lab.infotheory import JointDist, MAX_TABLE_ENTRIES, min_entropy
from y00lab.prng import bits_to_int, expand_running_key
from y00lab.y00core import demodulate_bob, dsr_words, modulate, modulate_dsr

logger = logging.getLogger(__name__)

CHECK_BITS = 32
EXACT_MAX_INPUT_BITS = 20
EXACT_MAX_CONDITIONS = 1 << 10
EXACT_MAX_SEEDS = 1 << 16
SAMPLED_SEEDS = 4096


@dataclass(frozen=True)
class HashSpec:
    """
    Toeplitz hash from n input bits to tau output bits

    The seed holds n + tau - 1 bits: the first column T[0:tau, 0] followed
    by the rest of the first row T[0, 1:n].
    """
    n: int
    tau: int
    seed: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= self.tau <= self.n:
            raise ValueError(f"need 0 <= tau <= n, got tau={self.tau}, n={self.n}")
        if len(self.seed) != self.seed_bits:
            raise ValueError(f"seed must hold {self.seed_bits} bits, got {len(self.seed)}")

    @property
    def seed_bits(self) -> int:
        return max(self.n + self.tau - 1, 0) if self.tau else 0

    @classmethod
    def random(cls, n: int, tau: int, rng: np.random.Generator) -> "HashSpec":
        bits = max(n + tau - 1, 0) if tau else 0
        return cls(n, tau, tuple(int(b) for b in rng.integers(0, 2, size=bits)))

    def matrix(self) -> np.ndarray:
        if self.tau == 0:
            return np.zeros((0, self.n), dtype=np.uint8)
        seed = np.asarray(self.seed, dtype=np.uint8)
        column = seed[:self.tau]
        row = np.concatenate([seed[:1], seed[self.tau:]])
        return toeplitz(column, row).astype(np.uint8)


def _toeplitz_index(n: int, tau: int) -> np.ndarray:
    i, j = np.indices((tau, n))
    return np.where(i >= j, i - j, tau + j - i - 1)


def toeplitz_hash(spec: HashSpec, bits: Sequence[int]) -> np.ndarray:
    """
    Hash n input bits to tau output bits over GF(2)

    Args:
        spec: Hash spec with seed
        bits: Input bits

    Returns:
        Output bits, output[i] = xor_j T[i, j] bits[j]
    """
    bits = np.asarray(bits, dtype=np.int64)
    if len(bits) != spec.n:
        raise ValueError(f"input has {len(bits)} bits, hash expects {spec.n}")
    return ((spec.matrix().astype(np.int64) @ bits) % 2).astype(np.uint8)


@dataclass
class TauChoice:
    """Optimal sacrifice for a given min-entropy"""
    h_inf: float
    tau_real: float
    tau: int
    epsilon: float
    guess_bound: float
    grid_tau: int
    grid_bound: float


def _bound(tau: float, h_inf: float) -> float:
    return 2 * 2.0 ** ((tau - h_inf) / 2) + 2.0 ** -tau


def optimal_tau(h_inf: float) -> TauChoice:
    """
    Output length tau = H_inf / 3 minimising 2 eps + 2^-tau

    Args:
        h_inf: Min-entropy of the raw key given Eve's view, in bits

    Returns:
        TauChoice with the floored integer tau and the integer grid optimum
    """
    if h_inf <= 0:
        raise ValueError("no extractable min-entropy: refresh refused")
    tau = max(1, floor(h_inf / 3))
    top = max(1, floor(h_inf))
    grid = np.arange(1, top + 1)
    values = 2 * np.exp2((grid - h_inf) / 2) + np.exp2(-grid.astype(float))
    best = int(np.argmin(values))
    choice = TauChoice(
        h_inf=h_inf,
        tau_real=h_inf / 3,
        tau=tau,
        epsilon=2.0 ** ((tau - h_inf) / 2),
        guess_bound=_bound(tau, h_inf),
        grid_tau=int(grid[best]),
        grid_bound=float(values[best])
    )
    logger.debug(f"Optimal tau for H_inf={h_inf:.6g}: {choice.tau} (grid {choice.grid_tau})")
    return choice


@dataclass
class ExtractorParams:
    """Min-entropy, output length and the resulting extractor error"""
    h_inf: float
    tau: int
    kappa: float
    epsilon: float
    p_th: float = 0.5

    def __post_init__(self):
        if self.h_inf < self.kappa:
            raise ValueError("kappa must not exceed the min-entropy")
        expected = 2.0 ** ((self.tau - self.kappa) / 2)
        if abs(self.epsilon - expected) > 1e-12 * expected:
            raise ValueError("epsilon inconsistent with tau and kappa")

    @classmethod
    def from_h_inf(cls, h_inf: float, p_th: float = 0.5, tau: Optional[int] = None) -> "ExtractorParams":
        tau = optimal_tau(h_inf).tau if tau is None else tau
        return cls(h_inf=h_inf, tau=tau, kappa=h_inf, epsilon=2.0 ** ((tau - h_inf) / 2), p_th=p_th)


@dataclass
class GuessBound:
    bound: float
    tau: int
    p_th: float
    margin_factor: float
    satisfied: bool
    min_r_h_inf: Optional[float] = None


def guess_probability_bound(params: ExtractorParams, margin: float = 100.0,
                            min_r_h_inf: Optional[float] = None) -> GuessBound:
    """
    Eve's average guessing probability on the hashed key, 2 eps + 2^-tau

    With min_r_h_inf given (the worst-key min-entropy) tau is re-derived from
    the smaller of the two entropies.

    Args:
        params: Extractor parameters
        margin: Required factor between p_th and the bound
        min_r_h_inf: Worst-key min-entropy

    Returns:
        GuessBound; satisfied when bound <= p_th / margin
    """
    tau, kappa = params.tau, params.kappa
    if min_r_h_inf is not None and min_r_h_inf < kappa:
        kappa = min_r_h_inf
        tau = optimal_tau(kappa).tau
    bound = min(1.0, _bound(tau, kappa))
    return GuessBound(
        bound=bound,
        tau=tau,
        p_th=params.p_th,
        margin_factor=params.p_th / bound,
        satisfied=bound <= params.p_th / margin,
        min_r_h_inf=min_r_h_inf
    )


@dataclass
class SdReport:
    """Distance of (hash output, seed) from (uniform, seed), seed-averaged"""
    l1: float
    distance: float
    epsilon: float
    h_inf: float
    positive_part: float
    negative_part: float
    guess_probability: float
    seeds: int
    certifying: bool
    ci_halfwidth: float = 0.0

    @property
    def within_bound(self) -> bool:
        return self.l1 <= 2 * self.epsilon + 1e-12

    @property
    def split_holds(self) -> bool:
        return self.positive_part <= 2 * self.epsilon + 1e-12 and self.negative_part >= 0


def _hash_tables(seeds: np.ndarray, n: int, tau: int) -> np.ndarray:
    """Hash value (as an integer) of every n-bit input, one row per seed"""
    matrices = seeds[:, _toeplitz_index(n, tau)]
    weights = 1 << np.arange(tau - 1, -1, -1, dtype=np.int64)
    columns = np.einsum('sij,i->sj', matrices.astype(np.int64), weights)
    table = np.zeros((len(seeds), 1), dtype=np.int64)
    for b in range(n):
        table = np.concatenate([table, table ^ columns[:, n - 1 - b][:, None]], axis=1)
    return table


def sd_from_uniform(n: int, tau: int, source: np.ndarray, exact: bool = True,
                    seed=None, chunk: int = 256) -> SdReport:
    """
    Statistical distance of the hashed source from uniform, averaged over
    every Toeplitz seed and conditioning value

    Args:
        n: Input width
        tau: Output width
        source: Pr(x) over 2^n inputs (inputs MSB first), or Pr(c, x) with
            one row per conditioning value
        exact: Enumerate every hash seed when feasible
        seed: RNG seed for sampled hash seeds
        chunk: Hash seeds processed per batch

    Returns:
        SdReport with l1 = sum_c,y |Pr(c, y) - Pr(c) 2^-tau| and its
        one-sided split
    """
    source = np.atleast_2d(np.asarray(source, dtype=float))
    if source.shape[1] != 1 << n:
        raise ValueError(f"source needs {1 << n} columns for n = {n}")
    if abs(source.sum() - 1.0) > 1e-12:
        raise ValueError("source probabilities must sum to 1")
    h_inf = float(-np.log2(source.max(axis=1).sum()))
    epsilon = 2.0 ** ((tau - h_inf) / 2)
    if tau == 0:
        return SdReport(0.0, 0.0, epsilon, h_inf, 0.0, 0.0, 1.0, 0, True)

    seed_bits = n + tau - 1
    if seed_bits > 62:
        raise InfeasibleSizeError(f"hash seed of {seed_bits} bits cannot be enumerated or sampled")
    feasible = n <= EXACT_MAX_INPUT_BITS and source.shape[0] <= EXACT_MAX_CONDITIONS
    if exact and feasible and (1 << seed_bits) <= EXACT_MAX_SEEDS:
        seed_ints = np.arange(1 << seed_bits, dtype=np.int64)
        certifying = True
    else:
        if exact:
            logger.warning(f"Exact mode infeasible (n={n}, tau={tau}, {source.shape[0]} conditions): "
                           f"sampling {SAMPLED_SEEDS} hash seeds, result is not certifying")
        rng = np.random.default_rng(seed)
        seed_ints = rng.integers(0, 1 << seed_bits, size=SAMPLED_SEEDS, dtype=np.int64)
        certifying = False

    shifts = np.arange(seed_bits - 1, -1, -1, dtype=np.int64)
    outputs = 1 << tau
    uniform = source.sum(axis=1) / outputs
    per_seed_l1, positive, negative, guess = [], [], [], []
    for start in range(0, len(seed_ints), chunk):
        block = seed_ints[start:start + chunk]
        seeds = ((block[:, None] >> shifts) & 1).astype(np.uint8)
        tables = _hash_tables(seeds, n, tau)
        offsets = (np.arange(len(block)) * outputs)[:, None]
        l1 = np.zeros(len(block))
        pos = np.zeros(len(block))
        neg = np.zeros(len(block))
        best = np.zeros(len(block))
        for c, row in enumerate(source):
            hashed = np.bincount((tables + offsets).ravel(), weights=np.tile(row, len(block)),
                                 minlength=len(block) * outputs).reshape(len(block), outputs)
            diff = hashed - uniform[c]
            l1 += np.abs(diff).sum(axis=1)
            pos += np.clip(diff, 0, None).sum(axis=1)
            neg += np.clip(-diff, 0, None).sum(axis=1)
            best += hashed.max(axis=1)
        per_seed_l1.append(l1)
        positive.append(pos)
        negative.append(neg)
        guess.append(best)

    per_seed_l1 = np.concatenate(per_seed_l1)
    l1 = float(per_seed_l1.mean())
    ci = 0.0 if certifying else float(1.96 * per_seed_l1.std(ddof=1) / np.sqrt(len(per_seed_l1)))
    report = SdReport(
        l1=l1,
        distance=l1 / 2,
        epsilon=epsilon,
        h_inf=h_inf,
        positive_part=float(np.concatenate(positive).mean()),
        negative_part=float(np.concatenate(negative).mean()),
        guess_probability=float(np.concatenate(guess).mean()),
        seeds=len(seed_ints),
        certifying=certifying,
        ci_halfwidth=ci
    )
    logger.info(f"Hash distance n={n} tau={tau}: l1={l1:.6g} vs 2eps={2 * epsilon:.6g}"
                f"{'' if certifying else ' (sampled)'}")
    return report


@dataclass
class BitGuess:
    """Eve's probability of guessing one refresh payload bit"""
    per_slot: float
    probability: float
    rate: int
    mode: str

    @property
    def h_per_bit(self) -> float:
        return max(0.0, -log2(self.probability))


def eve_bit_guess_probability(cfg: Y00Config, rate: int = 5, mode: str = 'bound') -> BitGuess:
    """
    Probability that Eve guesses a repetition-coded bit, with the running key
    known to her (worst single key)

    'bound' multiplies the single-slot total-variation advantage by the
    repetition rate; 'exact' enumerates the joint view of all copies.
    """
    if rate < 1:
        raise ValueError("repetition rate must be >= 1")
    best_slot, worst_table = 0.0, None
    for s in range(cfg.M):
        for dx in (0, 1):
            table = eve_view_joint(cfg, s=s, dx=dx).table
            guess = float(table.max(axis=0).sum())
            if guess > best_slot:
                best_slot, worst_table = guess, table
    if mode == 'bound':
        probability = 0.5 + 0.5 * min(1.0, rate * (2 * best_slot - 1))
    elif mode == 'exact':
        conditional = worst_table / worst_table.sum(axis=1, keepdims=True)
        size = 2 * conditional.shape[1] ** rate
        if size > MAX_TABLE_ENTRIES:
            raise InfeasibleSizeError(f"exact repetition view has {size} entries")
        joint = np.array([0.5, 0.5]).reshape((2,) + (1,) * rate)
        for copy in range(rate):
            shape = [2] + [1] * rate
            shape[copy + 1] = conditional.shape[1]
            joint = joint * conditional.reshape(shape)
        names = ['X'] + [f'C{i}' for i in range(rate)]
        h = min_entropy(JointDist(names, joint), ['X'], names[1:]).average
        probability = 2.0 ** -h
    else:
        raise ValueError(f"unknown min-entropy mode {mode!r}")
    return BitGuess(per_slot=best_slot, probability=probability, rate=rate, mode=mode)


@dataclass
class RefreshPlan:
    """Sizes of one refresh round"""
    tau: int
    n_raw: int
    h_per_bit: float
    h_inf: float
    seed_bits: int
    payload_bits: int
    rate: int
    guess_bound: float

    @property
    def slots(self) -> int:
        return self.payload_bits * self.rate


def plan_refresh(cfg: Y00Config, h_per_bit: float, rate: int = 5) -> RefreshPlan:
    """
    Raw key length giving tau = |k| + |dk| output bits at the optimal sacrifice

    Args:
        cfg: System design (its key widths fix tau)
        h_per_bit: Eve's min-entropy per raw key bit
        rate: Repetition rate
    """
    if h_per_bit <= 0:
        raise RefreshAbortedError("Eve's view leaves no min-entropy per bit: refresh refused")
    tau = sum(cfg.key_widths)
    n_raw = ceil(3 * tau / h_per_bit)
    h_inf = n_raw * h_per_bit
    seed_bits = n_raw + tau - 1
    return RefreshPlan(
        tau=tau,
        n_raw=n_raw,
        h_per_bit=h_per_bit,
        h_inf=h_inf,
        seed_bits=seed_bits,
        payload_bits=seed_bits + n_raw + CHECK_BITS,
        rate=rate,
        guess_bound=min(1.0, _bound(tau, h_inf))
    )


def integrity_check(bits: np.ndarray) -> np.ndarray:
    digest = hashlib.sha256(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()).digest()
    return np.unpackbits(np.frombuffer(digest[:CHECK_BITS // 8], dtype=np.uint8))


@dataclass
class RefreshTranscript:
    """Outcome of one refresh round"""
    plan: RefreshPlan
    alice_keys: Tuple[int, int]
    bob_keys: Tuple[int, int]
    raw_errors: int
    corrected_errors: int
    eve_outcomes: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0, complex))

    @property
    def agreed(self) -> bool:
        return self.alice_keys == self.bob_keys


def refresh_roundtrip(cfg: Y00Config, keys: Tuple[int, int], rng: np.random.Generator, *,
                      plan: Optional[RefreshPlan] = None, rate: int = 5, hinf_mode: str = 'bound',
                      noiseless_bob: bool = False, tamper: Sequence[int] = (),
                      breach_report: Optional[BreachReport] = None,
                      periods_elapsed: float = 0) -> RefreshTranscript:
    """
    One refresh round: Alice sends (hash seed, k_R, check) under the current
    keys, Bob decodes, both hash k_R into the next key pair

    Args:
        cfg: System design
        keys: Current (k, dk) seeds
        rng: Entropy source for k_R, the hash seed, DSR words and channel noise
        plan: Round sizes (derived from Eve's per-bit guess probability when omitted)
        rate: Repetition rate
        hinf_mode: 'bound' or 'exact' per-bit min-entropy estimate
        noiseless_bob: Give Bob the noise-free outcomes
        tamper: Slot indices whose decoded bit is flipped before correction
        breach_report: Breach analysis of the current design
        periods_elapsed: Periods already sent under the current keys

    Returns:
        RefreshTranscript with identical key pairs on both sides

    Raises:
        RefreshAbortedError: decode failure, integrity mismatch or threshold reached;
            neither party changes keys
    """
    if breach_report is not None and periods_elapsed >= breach_report.n_at_threshold:
        raise RefreshAbortedError("breach threshold already reached under the current keys")
    if plan is None:
        plan = plan_refresh(cfg, eve_bit_guess_probability(cfg, rate, hinf_mode).h_per_bit, rate)

    k, dk = keys
    raw = rng.integers(0, 2, size=plan.n_raw).astype(np.uint8)
    hash_seed = rng.integers(0, 2, size=plan.seed_bits).astype(np.uint8)
    body = np.concatenate([hash_seed, raw])
    payload = np.concatenate([body, integrity_check(body)])
    x = np.repeat(payload, plan.rate)

    running_key = expand_running_key(k, dk, cfg, len(x))
    if cfg.dsr.mode == 'none':
        trace = modulate(running_key, x, cfg)
    else:
        trace = modulate_dsr(running_key, x, dsr_words(cfg, len(x), rng), cfg)
    noise_seed = int(rng.integers(0, 2 ** 63))
    eve = tap_and_measure(trace, cfg, [noise_seed, 0])
    outcomes = bob_receive(trace, cfg, [noise_seed, 1], noiseless=noiseless_bob)
    decision = demodulate_bob(outcomes, running_key, cfg, x_true=x,
                              d=trace.d if cfg.dsr.mode == 'keyed' else None)
    received = decision.bits.copy()
    for slot in tamper:
        received[slot] ^= 1

    votes = received.reshape(-1, plan.rate).sum(axis=1)
    decoded = (2 * votes > plan.rate).astype(np.uint8)
    corrected = int(np.count_nonzero(decoded != payload))
    body_hat = decoded[:len(body)]
    if not np.array_equal(integrity_check(body_hat), decoded[len(body):]):
        logger.warning(f"Refresh aborted: integrity check failed ({corrected} payload bits wrong)")
        raise RefreshAbortedError("integrity check failed: keys unchanged")

    def derive(seed_bits, raw_bits):
        hashed = toeplitz_hash(HashSpec(plan.n_raw, plan.tau, tuple(int(b) for b in seed_bits)), raw_bits)
        k_bits, dk_bits = cfg.key_widths
        return bits_to_int(hashed[:k_bits]), bits_to_int(hashed[k_bits:k_bits + dk_bits])

    alice = derive(hash_seed, raw)
    bob = derive(body_hat[:plan.seed_bits], body_hat[plan.seed_bits:])
    if 0 in alice:
        raise RefreshAbortedError("hashed key is all zero: round must be repeated")
    transcript = RefreshTranscript(plan, alice, bob, decision.errors or 0, corrected, eve)
    if not transcript.agreed:
        raise RefreshAbortedError("key mismatch after integrity check: keys unchanged")
    logger.info(f"Refresh complete: {plan.slots} slots, {transcript.raw_errors} raw errors corrected")
    return transcript
