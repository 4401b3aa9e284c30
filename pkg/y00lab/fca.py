"""
Fast correlation attack on weak Y00 designs

Includes the conventional-cipher baseline (plaintext xor ciphertext gives
the keystream, Berlekamp-Massey gives the seed) and the noisy variant:
hard-decision extraction of one keystream bit per slot from Eve's detected
symbols, sparse parity checks of the LFSR, Gallager-style bit flipping and
seed synthesis.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from y00lab.channel import symbol_error_dist
from y00lab.config import AttackSettings, Y00Config
from y00lab.errors import (AttackFailedError, InfeasibleSizeError, InsufficientKeystreamError,
                           NoLeakyBitsError, UnsupportedConfigurationError)
from y00lab.prng import (LfsrSpec, basis_streams, berlekamp_massey, bits_to_int,
                         generator_period, gf2_solve, lfsr_from_connection)

logger = logging.getLogger(__name__)


@dataclass
class NoisyKeystream:
    """Eve's estimates of one keystream bit per slot with their crossover"""
    bits: np.ndarray
    crossover: np.ndarray
    bit_position: int = 0
    word_bits: int = 1

    @property
    def mean_crossover(self) -> float:
        return float(np.mean(self.crossover)) if len(self.crossover) else 0.5


@dataclass
class ParityCheckSet:
    """Check templates: offset tuples whose bits xor to zero at every shift"""
    templates: List[Tuple[int, ...]] = field(default_factory=list)

    @property
    def max_weight(self) -> int:
        return max((len(t) for t in self.templates), default=0)

    def expand(self, n: int) -> List[np.ndarray]:
        """Index arrays (checks x weight) of every check fitting in n bits, grouped by weight"""
        groups: Dict[int, List[np.ndarray]] = {}
        for template in self.templates:
            span = template[-1]
            if span >= n:
                continue
            starts = np.arange(n - span)[:, None]
            groups.setdefault(len(template), []).append(starts + np.asarray(template)[None, :])
        return [np.vstack(parts) for _, parts in sorted(groups.items())]

    def violations(self, bits: np.ndarray) -> int:
        return sum(int(np.count_nonzero(np.bitwise_xor.reduce(bits[idx], axis=1)))
                   for idx in self.expand(len(bits)))


@dataclass
class AttackResult:
    """Seed candidate and decoder diagnostics"""
    seed: Optional[int]
    confidence: float
    iterations: int
    converged: bool
    agreement: float = 0.0
    low_confidence: bool = False
    source_seed: Optional[int] = None
    decoded: Optional[np.ndarray] = field(default=None, repr=False)


def recover_key_conventional(c: Sequence[int], x: Sequence[int], spec: LfsrSpec) -> int:
    """
    Known-plaintext break of an LFSR stream cipher

    Args:
        c: Ciphertext bits
        x: Plaintext bits
        spec: LFSR structure (its seed is ignored)

    Returns:
        Recovered seed
    """
    c = np.asarray(c, dtype=np.uint8)
    x = np.asarray(x, dtype=np.uint8)
    if len(c) != len(x):
        raise ValueError("ciphertext and plaintext lengths differ")
    if len(c) < 2 * spec.degree:
        raise InsufficientKeystreamError(
            f"{len(c)} keystream bits cannot determine a degree-{spec.degree} LFSR "
            f"(need {2 * spec.degree})")
    s = c ^ x
    complexity, _ = berlekamp_massey(s)
    if complexity > spec.degree:
        raise AttackFailedError(f"keystream linear complexity {complexity} exceeds {spec.degree}")
    seed = bits_to_int(s[:spec.degree])
    if seed == 0 or not np.array_equal(spec.with_seed(seed).stream(len(s)), s):
        raise AttackFailedError("keystream is not an output of this LFSR")
    return seed


def leak_crossovers(cfg: Y00Config, scale: Optional[float] = None) -> np.ndarray:
    """
    Crossover of each key-word bit as read from Eve's detected band

    Position 0 is the most significant bit. Eve inverts the static mapping;
    any DSR word is unknown to her and averaged over.
    """
    M, w = cfg.M, cfg.word_bits
    inverse = np.asarray(cfg.mapping.inverse())
    table = np.asarray(cfg.mapping.table)
    dsr_values = range(M) if cfg.dsr.mode != 'none' else (0,)
    shifts = np.arange(w - 1, -1, -1)
    errors = np.zeros(w)
    weight = 1.0 / (M * 2 * len(dsr_values))
    for s in range(M):
        s_bits = (s >> shifts) & 1
        for half in (0, 1):
            for d in dsr_values:
                m_true = table[s ^ d] + M * half
                row = symbol_error_dist(int(m_true), cfg, scale)
                estimates = inverse[(m_true + np.arange(2 * M)) % M]
                wrong = ((estimates[:, None] >> shifts) & 1) != s_bits[None, :]
                errors += weight * (row @ wrong)
    return errors


def extract_leaky_bits(outcomes: np.ndarray, cfg: Y00Config, *,
                       scale: Optional[float] = None, min_bias: float = 1e-6) -> NoisyKeystream:
    """
    Hard-decision keystream estimates from Eve's detected symbol indices

    The key-word bit with the smallest analytic crossover is extracted.

    Args:
        outcomes: Detected indices in [0, 2M)
        cfg: System design
        scale: Eve's received amplitude (eta * alpha0 by default)
        min_bias: Required distance of the crossover below one half

    Returns:
        NoisyKeystream with one bit per slot
    """
    if cfg.mapping.kind == 'scrambled':
        raise NoLeakyBitsError("per-slot scrambled mapping is unknown to Eve")
    crossovers = leak_crossovers(cfg, scale)
    position = int(np.argmin(crossovers))
    if crossovers[position] >= 0.5 - min_bias:
        raise NoLeakyBitsError(f"no key bit leaks: crossovers {np.round(crossovers, 6).tolist()}")
    w = cfg.word_bits
    inverse = np.asarray(cfg.mapping.inverse())
    words = inverse[np.asarray(outcomes, dtype=np.int64) % cfg.M]
    bits = ((words >> (w - 1 - position)) & 1).astype(np.uint8)
    logger.info(f"Leaky bit {position} of {w}: crossover {crossovers[position]:.4f}")
    return NoisyKeystream(bits=bits, crossover=np.full(len(bits), crossovers[position]),
                          bit_position=position, word_bits=w)


@dataclass
class DecimatedLfsr:
    """Recurrence and seed map of b_t = a_{step * t + offset}"""
    source: LfsrSpec
    step: int
    offset: int
    lfsr: LfsrSpec
    seed_map: np.ndarray

    def source_seed(self, decimated_seed: int) -> int:
        bits = np.array([(decimated_seed >> (self.lfsr.degree - 1 - i)) & 1
                         for i in range(self.lfsr.degree)], dtype=np.uint8)
        return bits_to_int(gf2_solve(self.seed_map.T, bits))


@lru_cache(maxsize=16)
def decimate_lfsr(spec: LfsrSpec, step: int, offset: int) -> DecimatedLfsr:
    """
    LFSR generating every step-th bit of spec's output, starting at offset

    Raises:
        UnsupportedConfigurationError: the decimated sequence needs a different
            degree, so the seed cannot be mapped back
    """
    L = spec.degree
    length = offset + step * 4 * L
    basis = basis_streams(L, spec.taps, length)
    sample = spec.with_seed(1).stream(length)[offset::step]
    complexity, connection = berlekamp_massey(sample)
    if complexity != L:
        raise UnsupportedConfigurationError(
            f"decimation by {step} changes the linear complexity to {complexity}")
    positions = offset + step * np.arange(L)
    seed_map = basis[:, positions]
    try:
        gf2_solve(seed_map.T, np.zeros(L, dtype=np.uint8))
    except ValueError as e:
        raise UnsupportedConfigurationError("decimated seed map is singular") from e
    return DecimatedLfsr(spec, step, offset, lfsr_from_connection(L, connection), seed_map)


def _poly_mul(a: int, b: int) -> int:
    result = 0
    while b:
        if b & 1:
            result ^= a
        a <<= 1
        b >>= 1
    return result


def _exponents(poly: int) -> Tuple[int, ...]:
    return tuple(i for i in range(poly.bit_length()) if (poly >> i) & 1)


@lru_cache(maxsize=16)
def derive_parity_checks(spec: LfsrSpec, max_weight: int = 5, horizon: int = 10000,
                         max_checks: int = 64) -> ParityCheckSet:
    """
    Sparse parity checks valid on every output of an LFSR

    Sources: the feedback polynomial, its repeated squares, its cube, and
    weight-3 multiples 1 + x^i + x^j found from a table of x^i mod f.

    Args:
        spec: LFSR structure
        max_weight: Largest number of terms per check
        horizon: Stream length the checks must fit into
        max_checks: Largest number of templates, lowest degree first

    Returns:
        ParityCheckSet, every template verified on a noise-free stream
    """
    period = generator_period(spec)
    if period is not None and horizon > period:
        raise InfeasibleSizeError(f"horizon {horizon} exceeds the LFSR period {period}")
    f = spec.polynomial
    L = spec.degree
    candidates = []
    square = f
    while square.bit_length() - 1 < horizon:
        candidates.append(_exponents(square))
        square = _poly_mul(square, square)
    cube = _poly_mul(_poly_mul(f, f), f)
    if cube.bit_length() - 1 < horizon:
        candidates.append(_exponents(cube))

    if max_weight >= 3:
        seen: Dict[int, List[int]] = {}
        residue = 1
        found = 0
        for j in range(1, horizon):
            residue <<= 1
            if (residue >> L) & 1:
                residue ^= f
            for i in seen.get(residue ^ 1, ()):
                candidates.append((0, i, j))
                found += 1
            seen.setdefault(residue, []).append(j)
            if found >= max_checks:
                break

    unique = sorted({c for c in candidates if len(c) <= max_weight},
                    key=lambda c: (c[-1], len(c), c))[:max_checks]
    reference = spec.with_seed(1).stream(horizon)
    verified = []
    for template in unique:
        if ParityCheckSet([template]).violations(reference):
            logger.warning(f"Dropping check {template}: violated on a noise-free stream")
            continue
        verified.append(template)
    logger.debug(f"Derived {len(verified)} parity checks for {spec.taps}")
    return ParityCheckSet(verified)


def correlation_attack(ks: NoisyKeystream, checks: ParityCheckSet, spec: LfsrSpec, *,
                       max_iterations: int = 50, margin: float = 1e-6,
                       windows: int = 32) -> AttackResult:
    """
    Iterative bit-flipping decode of a noisy LFSR stream, then seed synthesis

    Each round flips every bit for which more than half of its checks fail,
    stopping at a fixed point or the iteration cap. The seed is synthesised
    from the decoded window whose regenerated stream agrees best with the
    decoded bits.

    Args:
        ks: Noisy keystream
        checks: Parity checks valid for spec
        spec: LFSR generating the noise-free stream
        max_iterations: Round cap
        margin: Required distance of the mean crossover below one half
        windows: Number of candidate windows tried for synthesis

    Returns:
        AttackResult with the decimated-stream seed in `seed`
    """
    if ks.mean_crossover >= 0.5 - margin:
        raise NoLeakyBitsError(f"mean crossover {ks.mean_crossover:.4f} leaves no correlation")
    L = spec.degree
    n = len(ks.bits)
    if n < L:
        raise InsufficientKeystreamError(f"{n} bits cannot determine a degree-{L} LFSR")

    bits = ks.bits.astype(np.uint8).copy()
    index_sets = checks.expand(n)
    all_indices = np.concatenate([idx.ravel() for idx in index_sets]) if index_sets else np.zeros(0, int)
    participation = np.bincount(all_indices, minlength=n)
    total_checks = sum(len(idx) for idx in index_sets)

    def failing(current):
        per_bit = np.zeros(n, dtype=np.int64)
        unsatisfied = 0
        for idx in index_sets:
            bad = np.bitwise_xor.reduce(current[idx], axis=1).astype(bool)
            unsatisfied += int(bad.sum())
            per_bit += np.bincount(idx[bad].ravel(), minlength=n)
        return unsatisfied, per_bit

    best_bits, best_unsat = bits.copy(), None
    converged = False
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        unsatisfied, per_bit = failing(bits)
        if best_unsat is None or unsatisfied < best_unsat:
            best_bits, best_unsat = bits.copy(), unsatisfied
        flip = (participation > 0) & (2 * per_bit > participation)
        logger.debug(f"Round {iterations}: {unsatisfied} failing checks, flipping {int(flip.sum())}")
        if not flip.any():
            converged = True
            break
        bits[flip] ^= 1
    else:
        unsatisfied, _ = failing(bits)
        if unsatisfied < best_unsat:
            best_bits, best_unsat = bits.copy(), unsatisfied

    # A fixed point is returned as is; otherwise the iterate with fewest failing checks
    decoded, decoded_unsat = (bits, unsatisfied) if converged else (best_bits, best_unsat)
    confidence = 1.0 - (decoded_unsat / total_checks) if total_checks else 0.0

    basis = basis_streams(L, spec.taps, n)
    best_seed, best_agreement = None, -1.0
    for start in np.linspace(0, n - L, num=min(windows, n - L + 1)).astype(int):
        try:
            seed_bits = gf2_solve(basis[:, start:start + L].T, decoded[start:start + L])
        except ValueError:
            continue
        if not seed_bits.any():
            continue
        regenerated = (seed_bits.astype(np.int64) @ basis) % 2
        agreement = float(np.mean(regenerated == decoded))
        if agreement > best_agreement:
            best_seed, best_agreement = bits_to_int(seed_bits), agreement

    result = AttackResult(
        seed=best_seed,
        confidence=confidence,
        iterations=iterations,
        converged=converged,
        agreement=max(best_agreement, 0.0),
        low_confidence=not converged or confidence < 0.99,
        decoded=decoded
    )
    logger.debug(f"Correlation attack: {result}")
    return result


def attack_running_key(outcomes: np.ndarray, cfg: Y00Config,
                       settings: Optional[AttackSettings] = None,
                       scale: Optional[float] = None) -> AttackResult:
    """
    End-to-end attack on the s generator from Eve's detected symbols

    Returns:
        AttackResult with `source_seed` set to the recovered s-generator seed
    """
    settings = settings or AttackSettings()
    if not isinstance(cfg.prng_s, LfsrSpec):
        raise UnsupportedConfigurationError("the correlation attack targets LFSR key generators")
    ks = extract_leaky_bits(outcomes, cfg, scale=scale, min_bias=settings.min_bias)
    decimated = decimate_lfsr(cfg.prng_s.with_seed(1), cfg.word_bits, ks.bit_position)
    checks = derive_parity_checks(decimated.lfsr.with_seed(1), settings.max_weight,
                                  len(ks.bits), settings.max_checks)
    result = correlation_attack(ks, checks, decimated.lfsr,
                                max_iterations=settings.max_iterations, margin=settings.min_bias)
    if result.seed is not None:
        result.source_seed = decimated.source_seed(result.seed)
    return result
