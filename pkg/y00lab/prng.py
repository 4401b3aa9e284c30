"""
Deterministic key expansion

LFSRs and a keyed counter-mode generator, period computation, and the
running key r = (s, dx) shared by Alice and Bob.

Bit conventions used throughout the package:

* bit strings are numpy ``uint8`` arrays of 0/1 values;
* an LFSR seed integer holds (a_0, ..., a_{L-1}) most-significant-bit first;
* generator output is chopped into log2 M-bit words most-significant-bit first.
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from math import gcd, lcm
from typing import TYPE_CHECKING, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

if TYPE_CHECKING:
    from y00lab.config import Y00Config

logger = logging.getLogger(__name__)

DEFAULT_PERIOD_CAP = 1 << 24


def int_to_bits(value: int, width: int) -> np.ndarray:
    """
    Expand an integer into a bit array, most significant bit first

    Args:
        value: Non-negative integer below 2**width
        width: Number of bits

    Returns:
        uint8 array of length width
    """
    if width < 0 or value < 0 or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits: Iterable[int]) -> int:
    """Pack a bit sequence (most significant bit first) into an integer"""
    value = 0
    for bit in bits:
        value = (value << 1) | (int(bit) & 1)
    return value


def pack_words(bits: np.ndarray, width: int) -> np.ndarray:
    """Chop a bit stream into width-bit words, most significant bit first"""
    bits = np.asarray(bits, dtype=np.int64)
    if width == 0 or bits.size % width:
        raise ValueError(f"cannot chop {bits.size} bits into {width}-bit words")
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits.reshape(-1, width) @ weights


def unpack_words(words: np.ndarray, width: int) -> np.ndarray:
    """Inverse of pack_words"""
    words = np.asarray(words, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((words[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def _parity(value: int) -> int:
    return value.bit_count() & 1


@dataclass(frozen=True)
class LfsrSpec:
    """
    Fibonacci LFSR with feedback polynomial f(x) = 1 + sum_{j in taps} x^j

    The recurrence is a_{t+L} = a_t xor (xor of a_{t+j} for taps j < L), so
    taps (4, 1) realise the parity check (t, t+1, t+4).
    """
    degree: int
    taps: Tuple[int, ...]
    seed: int = 1

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"LFSR degree must be >= 1, got {self.degree}")
        taps = tuple(sorted({int(t) for t in self.taps}, reverse=True))
        if not taps or taps[0] != self.degree or taps[-1] < 1:
            raise ValueError(f"taps {self.taps} must lie in [1, {self.degree}] and include {self.degree}")
        object.__setattr__(self, 'taps', taps)
        if not 0 < self.seed < (1 << self.degree):
            raise ValueError("LFSR seed must be a nonzero "
                             f"{self.degree}-bit value, got {self.seed:#x}")

    @property
    def seed_width(self) -> int:
        return self.degree

    @property
    def feedback_mask(self) -> int:
        """State mask selecting a_t and every a_{t+j}, j a tap below the degree"""
        top = self.degree - 1
        mask = 1 << top
        for j in self.taps:
            if j < self.degree:
                mask |= 1 << (top - j)
        return mask

    @property
    def polynomial(self) -> int:
        """Feedback polynomial as an integer, bit j = coefficient of x^j"""
        poly = 1
        for j in self.taps:
            poly |= 1 << j
        return poly

    def with_seed(self, seed: Union[int, Sequence[int], np.ndarray]) -> "LfsrSpec":
        if not isinstance(seed, (int, np.integer)):
            seed_bits = np.asarray(seed)
            if seed_bits.size != self.degree:
                raise ValueError(f"seed has {seed_bits.size} bits, LFSR needs {self.degree}")
            seed = bits_to_int(seed_bits)
        return replace(self, seed=int(seed))

    def stream(self, n: int) -> np.ndarray:
        return lfsr_stream(self, n)


def lfsr_stream(spec: LfsrSpec, n: int) -> np.ndarray:
    """
    Run an LFSR for n steps

    Args:
        spec: LFSR description with a nonzero seed
        n: Number of output bits

    Returns:
        uint8 array (a_0, ..., a_{n-1})
    """
    if spec.seed == 0:
        raise ValueError("LFSR seed must be nonzero")
    top = spec.degree - 1
    mask = spec.feedback_mask
    full = (1 << spec.degree) - 1
    state = spec.seed
    out = bytearray(n)
    for t in range(n):
        out[t] = state >> top
        state = ((state << 1) & full) | _parity(state & mask)
    return np.fromiter(out, dtype=np.uint8, count=n)


@lru_cache(maxsize=32)
def basis_streams(degree: int, taps: Tuple[int, ...], n: int) -> np.ndarray:
    """
    Streams of the unit seeds e_0..e_{L-1}

    Every LFSR output is linear in its seed, so stream(seed) equals
    seed_bits @ basis_streams(...) mod 2.
    """
    rows = []
    for i in range(degree):
        unit = LfsrSpec(degree, taps, 1 << (degree - 1 - i))
        rows.append(lfsr_stream(unit, n))
    basis = np.vstack(rows)
    basis.setflags(write=False)
    return basis


def berlekamp_massey(bits: Iterable[int]) -> Tuple[int, int]:
    """
    Shortest linear recurrence generating a bit sequence

    Args:
        bits: Sequence s_0, s_1, ...

    Returns:
        (linear complexity L, connection polynomial C as integer with
        bit i = c_i and c_0 = 1), so that sum_i c_i s_{n-i} = 0 for n >= L
    """
    c, b = 1, 1
    length, shift = 0, 1
    recent = 0
    for n, bit in enumerate(bits):
        recent = (recent << 1) | (int(bit) & 1)
        if not _parity(c & recent):
            shift += 1
            continue
        previous = c
        c ^= b << shift
        if 2 * length <= n:
            length = n + 1 - length
            b = previous
            shift = 1
        else:
            shift += 1
    return length, c


def lfsr_from_connection(length: int, connection: int, seed: int = 1) -> LfsrSpec:
    """LfsrSpec realising the recurrence found by berlekamp_massey"""
    if length < 1 or not (connection >> length) & 1:
        raise ValueError("connection polynomial must have degree equal to the linear complexity")
    taps = {length} | {length - i for i in range(1, length) if (connection >> i) & 1}
    return LfsrSpec(length, tuple(taps), seed)


def gf2_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """
    Solve matrix @ x = rhs over GF(2) for a square nonsingular matrix

    Raises:
        ValueError: matrix is singular
    """
    a = (np.asarray(matrix, dtype=np.uint8) & 1).copy()
    b = (np.asarray(rhs, dtype=np.uint8) & 1).copy()
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n,):
        raise ValueError("gf2_solve needs a square system")
    for col in range(n):
        pivots = np.nonzero(a[col:, col])[0]
        if pivots.size == 0:
            raise ValueError("matrix is singular over GF(2)")
        pivot = col + pivots[0]
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        rows = np.nonzero(a[:, col])[0]
        rows = rows[rows != col]
        a[rows] ^= a[col]
        b[rows] ^= b[col]
    return b


@dataclass(frozen=True)
class KeyedCounterSpec:
    """
    Small ARX block permutation run in counter mode, one output bit per block

    The output repeats after 2**block_width bits because the counter wraps.
    """
    key: int = 1
    key_width: int = 32
    rounds: int = 8
    block_width: int = 16

    def __post_init__(self):
        if self.block_width % 2 or not 4 <= self.block_width <= 32:
            raise ValueError("block_width must be an even number in [4, 32]")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.key < 0 or self.key >> self.key_width:
            raise ValueError(f"key does not fit in {self.key_width} bits")

    @property
    def seed_width(self) -> int:
        return self.key_width

    def with_seed(self, seed: Union[int, Sequence[int], np.ndarray]) -> "KeyedCounterSpec":
        if not isinstance(seed, (int, np.integer)):
            seed_bits = np.asarray(seed)
            if seed_bits.size != self.key_width:
                raise ValueError(f"key has {seed_bits.size} bits, generator needs {self.key_width}")
            seed = bits_to_int(seed_bits)
        return replace(self, key=int(seed))

    def round_keys(self) -> Tuple[int, ...]:
        half = self.block_width // 2
        mask = (1 << half) - 1
        words = [(self.key >> (half * i)) & mask
                 for i in range(max(1, -(-self.key_width // half)))]
        return tuple((words[i % len(words)] ^ i) & mask for i in range(self.rounds))

    def encrypt(self, blocks: np.ndarray) -> np.ndarray:
        half = self.block_width // 2
        mask = np.uint64((1 << half) - 1)
        blocks = np.asarray(blocks, dtype=np.uint64)
        x = blocks >> np.uint64(half)
        y = blocks & mask
        a, b = np.uint64(3 % half), np.uint64(2 % half)
        width = np.uint64(half)
        for k in self.round_keys():
            x = (((x >> a) | (x << (width - a))) & mask)
            x = ((x + y) & mask) ^ np.uint64(k)
            y = (((y << b) | (y >> (width - b))) & mask) ^ x
        return (x << np.uint64(half)) | y

    def stream(self, n: int) -> np.ndarray:
        counters = np.arange(n, dtype=np.uint64) % np.uint64(1 << self.block_width)
        return (self.encrypt(counters) & np.uint64(1)).astype(np.uint8)


GeneratorSpec = Union[LfsrSpec, KeyedCounterSpec]


@lru_cache(maxsize=64)
def generator_period(spec: GeneratorSpec, cap: int = DEFAULT_PERIOD_CAP) -> Optional[int]:
    """
    Exact period of a generator's output, or None when the search exceeds cap
    """
    if isinstance(spec, KeyedCounterSpec):
        full = 1 << spec.block_width
        if full > cap:
            return None
        bits = spec.stream(full)
        period = full
        while period > 1 and np.array_equal(bits[: period // 2], bits[period // 2: period]):
            period //= 2
        return period

    # The tap at position L makes the state map invertible, so the
    # state orbit is a pure cycle through the seed.
    top = spec.degree - 1
    mask = spec.feedback_mask
    full = (1 << spec.degree) - 1
    state = spec.seed
    for step in range(1, cap + 1):
        state = ((state << 1) & full) | _parity(state & mask)
        if state == spec.seed:
            return step
    logger.warning(f"Period search for {spec} stopped at cap {cap}")
    return None


def slot_period(period: Optional[int], bits_per_slot: int) -> Optional[int]:
    """Period in slots of a generator consumed bits_per_slot bits at a time"""
    if period is None:
        return None
    if bits_per_slot == 0:
        return 1
    return period // gcd(period, bits_per_slot)


@dataclass(frozen=True)
class Periods:
    """Generator periods and their joint period T_LCM (None when unknown)"""
    p1: Optional[int]
    p2: Optional[int]
    t_lcm: Optional[int]

    @property
    def known(self) -> bool:
        return self.t_lcm is not None


def compute_periods(g1: GeneratorSpec, g2: GeneratorSpec, *,
                    cap: int = DEFAULT_PERIOD_CAP,
                    bits_per_slot: Tuple[int, int] = (1, 1)) -> Periods:
    """
    Periods of two generators and the LCM of their per-slot periods

    Args:
        g1: First generator (the s generator in a running key)
        g2: Second generator (the dx generator)
        cap: Cycle-detection step cap
        bits_per_slot: Bits each generator contributes per slot

    Returns:
        Periods; t_lcm is None when either period is unknown
    """
    p1 = generator_period(g1, cap)
    p2 = generator_period(g2, cap)
    s1 = slot_period(p1, bits_per_slot[0])
    s2 = slot_period(p2, bits_per_slot[1])
    t_lcm = lcm(s1, s2) if s1 is not None and s2 is not None else None
    return Periods(p1, p2, t_lcm)


@dataclass
class RunningKey:
    """Running key r = (s, dx) over a horizon of slots"""
    s: np.ndarray
    dx: np.ndarray
    t_lcm: Optional[int]
    word_bits: int

    @property
    def horizon(self) -> int:
        return len(self.dx)


def auxiliary_generators(cfg: "Y00Config") -> Tuple[Tuple[GeneratorSpec, int], ...]:
    """Keyed DSR and mapping-scramble generators with their bits per slot"""
    extra = []
    if cfg.dsr.mode == 'keyed' and cfg.dsr.generator is not None:
        extra.append((cfg.dsr.generator, cfg.word_bits))
    if cfg.mapping.kind == 'scrambled' and cfg.mapping.generator is not None:
        extra.append((cfg.mapping.generator, scramble_bits_per_slot(cfg.M)))
    return tuple(extra)


def scramble_bits_per_slot(M: int) -> int:
    """Generator bits drawn per slot by the per-slot Fisher-Yates shuffle"""
    return (M - 1) * max(1, (M - 1).bit_length())


def running_key_period(cfg: "Y00Config", cap: int = DEFAULT_PERIOD_CAP) -> Optional[int]:
    """T_LCM of every keyed sequence driving the transmitter, in slots"""
    periods = compute_periods(cfg.prng_s, cfg.prng_dx, cap=cap,
                              bits_per_slot=(cfg.word_bits, 1))
    t_lcm = periods.t_lcm
    for generator, bits in auxiliary_generators(cfg):
        extra = slot_period(generator_period(generator, cap), bits)
        if t_lcm is None or extra is None:
            return None
        t_lcm = lcm(t_lcm, extra)
    return t_lcm


def expand_running_key(k: Union[int, Sequence[int], np.ndarray],
                       dk: Union[int, Sequence[int], np.ndarray],
                       cfg: "Y00Config", horizon: int,
                       cap: int = DEFAULT_PERIOD_CAP) -> RunningKey:
    """
    Expand the shared secrets (k, dk) into the running key

    Args:
        k: Seed of the s generator (bit string of its seed width)
        dk: Seed of the dx generator
        cfg: System design
        horizon: Number of slots
        cap: Period-search cap for T_LCM

    Returns:
        RunningKey with horizon words s(t) and bits dx(t)
    """
    w = cfg.word_bits
    s_gen = cfg.prng_s.with_seed(k)
    dx_gen = cfg.prng_dx.with_seed(dk)
    s = pack_words(s_gen.stream(horizon * w), w) if horizon else np.zeros(0, dtype=np.int64)
    dx = dx_gen.stream(horizon)
    t_lcm = running_key_period(cfg.with_generators(s_gen, dx_gen), cap)
    logger.debug(f"Expanded running key: horizon={horizon}, T_LCM={t_lcm}")
    return RunningKey(s=s, dx=dx, t_lcm=t_lcm, word_bits=w)
