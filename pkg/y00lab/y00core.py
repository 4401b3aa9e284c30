"""
Y00 modulation and Bob's keyed demodulation

Encoding rule: m(t) = Map[s(t)] + M * ((Map[s(t)] + x(t) + dx(t)) mod 2).
With deliberate signal randomisation the base band becomes Map[s(t) xor d(t)]
while the parity term keeps Map[s(t)].
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from y00lab.config import DsrSpec, MappingTable, Y00Config
from y00lab.prng import RunningKey, pack_words, scramble_bits_per_slot

logger = logging.getLogger(__name__)

__all__ = [
    "Y00Config", "MappingTable", "DsrSpec", "SymbolTrace", "BobDecision",
    "symbol_amplitudes", "slot_mapping_tables", "dsr_words",
    "modulate", "modulate_dsr", "demodulate_bob",
]


@dataclass
class SymbolTrace:
    """Per-slot transmitter record"""
    m: np.ndarray
    amplitude: np.ndarray
    x: np.ndarray
    d: Optional[np.ndarray] = None

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.m))

    def __len__(self) -> int:
        return len(self.m)

    def to_rows(self) -> List[tuple]:
        """Rows for the trace CSV (t, m, re, im, x, d)"""
        d = self.d if self.d is not None else [""] * len(self.m)
        return [
            (t, int(m), f"{a.real:.12g}", f"{a.imag:.12g}", int(x), "" if dd == "" else int(dd))
            for t, m, a, x, dd in zip(range(len(self.m)), self.m, self.amplitude, self.x, d)
        ]


@dataclass
class BobDecision:
    """Bob's decoded bits and, when the truth is known, his error count"""
    bits: np.ndarray
    errors: Optional[int] = None


def symbol_amplitudes(cfg: Y00Config, scale: Optional[float] = None) -> np.ndarray:
    """
    Complex amplitudes of the 2M signal points

    Args:
        cfg: System design
        scale: Amplitude of the outermost point (default alpha0)

    Returns:
        Array of length 2M
    """
    scale = cfg.alpha0 if scale is None else scale
    m = np.arange(2 * cfg.M)
    if cfg.geometry == 'psk':
        return scale * np.exp(1j * np.pi * m / cfg.M)
    return (scale * (m + 1) / (2 * cfg.M)).astype(complex)


def slot_mapping_tables(cfg: Y00Config, horizon: int) -> Optional[np.ndarray]:
    """
    Per-slot mapping tables for the scrambled kind, None for static mappings

    Each slot runs a Fisher-Yates shuffle of 0..M-1 drawn from the scramble
    generator, consuming a fixed number of generator bits per slot.
    """
    if cfg.mapping.kind != 'scrambled':
        return None
    M = cfg.M
    chunk = max(1, (M - 1).bit_length())
    bits = cfg.mapping.generator.stream(horizon * scramble_bits_per_slot(M))
    draws = pack_words(bits, chunk).reshape(horizon, M - 1)
    tables = np.tile(np.arange(M), (horizon, 1))
    rows = np.arange(horizon)
    for step, i in enumerate(range(M - 1, 0, -1)):
        j = draws[:, step] % (i + 1)
        held = tables[rows, i].copy()
        tables[rows, i] = tables[rows, j]
        tables[rows, j] = held
    return tables


def _map(cfg: Y00Config, words: np.ndarray, tables: Optional[np.ndarray]) -> np.ndarray:
    if tables is None:
        return np.asarray(cfg.mapping.table, dtype=np.int64)[words]
    return tables[np.arange(len(words)), words]


def dsr_words(cfg: Y00Config, horizon: int,
              rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    DSR words d(t) for the configured mode

    TrueRandom draws from rng (the run's entropy source); Keyed draws from the
    DSR generator; mode none gives all-zero words.
    """
    if cfg.dsr.mode == 'true_random':
        if rng is None:
            raise ValueError("TrueRandom DSR needs an entropy source")
        return rng.integers(0, cfg.M, size=horizon, dtype=np.int64)
    if cfg.dsr.mode == 'keyed':
        w = cfg.word_bits
        return pack_words(cfg.dsr.generator.stream(horizon * w), w)
    return np.zeros(horizon, dtype=np.int64)


def _check_plaintext(r: RunningKey, x: Sequence[int]) -> np.ndarray:
    x = np.asarray(x, dtype=np.uint8)
    if len(x) > r.horizon:
        raise ValueError(f"plaintext has {len(x)} bits but the running key covers {r.horizon} slots")
    return x


def _encode(cfg: Y00Config, r: RunningKey, x: np.ndarray, d: np.ndarray) -> np.ndarray:
    n = len(x)
    s = r.s[:n].astype(np.int64)
    tables = slot_mapping_tables(cfg, n)
    parity_band = _map(cfg, s, tables)
    base_band = _map(cfg, s ^ d, tables)
    return base_band + cfg.M * ((parity_band + x + r.dx[:n]) % 2)


def modulate(r: RunningKey, x: Sequence[int], cfg: Y00Config) -> SymbolTrace:
    """
    Encode plaintext bits into symbol indices and amplitudes

    Args:
        r: Running key covering at least len(x) slots
        x: Plaintext bits
        cfg: System design without DSR

    Returns:
        SymbolTrace
    """
    if cfg.dsr.mode != 'none':
        raise ValueError("modulate handles DSR mode 'none'; use modulate_dsr")
    x = _check_plaintext(r, x)
    m = _encode(cfg, r, x, np.zeros(len(x), dtype=np.int64))
    return SymbolTrace(m=m, amplitude=symbol_amplitudes(cfg)[m], x=x)


def modulate_dsr(r: RunningKey, x: Sequence[int], d: Sequence, cfg: Y00Config) -> SymbolTrace:
    """
    Encode with deliberate signal randomisation of the base band

    Args:
        r: Running key
        x: Plaintext bits
        d: DSR words, either integers in [0, M) or an (n, log2 M) bit array
        cfg: System design

    Returns:
        SymbolTrace carrying d
    """
    x = _check_plaintext(r, x)
    d = np.asarray(d, dtype=np.int64)
    if d.ndim == 2:
        if d.shape[1] != cfg.word_bits:
            raise ValueError(f"DSR words have {d.shape[1]} bits, slots carry {cfg.word_bits}")
        d = pack_words(d.reshape(-1), cfg.word_bits)
    if len(d) < len(x):
        raise ValueError("fewer DSR words than plaintext bits")
    d = d[:len(x)]
    if d.size and (d.min() < 0 or d.max() >= cfg.M):
        raise ValueError(f"DSR words must fit in {cfg.word_bits} bits")
    m = _encode(cfg, r, x, d)
    return SymbolTrace(m=m, amplitude=symbol_amplitudes(cfg)[m], x=x, d=d)


def demodulate_bob(outcomes: np.ndarray, r: RunningKey, cfg: Y00Config,
                   x_true: Optional[Sequence[int]] = None,
                   d: Optional[Sequence[int]] = None) -> BobDecision:
    """
    Bob's keyed binary decision per slot

    With the key known each slot carries one of two hypotheses
    {alpha[m], alpha[m + M]}; Bob picks the nearer point. Under TrueRandom DSR
    the base band is unknown to him, so he decides which half of the
    constellation the outcome lies in and combines it with the key parity.

    Args:
        outcomes: Bob's complex receiver outcomes
        r: Running key (Bob always holds it)
        cfg: System design
        x_true: Optional ground truth for counting errors
        d: Keyed DSR words; derived from the DSR generator when omitted

    Returns:
        BobDecision
    """
    # Imported here: channel depends on this module for amplitudes
    from y00lab.channel import decide_symbol, decision_regions

    outcomes = np.asarray(outcomes, dtype=complex)
    n = len(outcomes)
    if n > r.horizon:
        raise ValueError("outcomes extend past the running key horizon")
    scale = (1.0 - cfg.eta) * cfg.alpha0
    s = r.s[:n].astype(np.int64)
    tables = slot_mapping_tables(cfg, n)
    parity = (_map(cfg, s, tables) + r.dx[:n]) % 2

    if cfg.dsr.mode == 'true_random':
        half = (decide_symbol(outcomes, decision_regions(cfg, scale)) >= cfg.M).astype(np.int64)
        bits = (half ^ parity).astype(np.uint8)
    else:
        if cfg.dsr.mode == 'keyed':
            d = dsr_words(cfg, n) if d is None else np.asarray(d, dtype=np.int64)[:n]
        else:
            d = np.zeros(n, dtype=np.int64)
        base = _map(cfg, s ^ d, tables)
        points = symbol_amplitudes(cfg, scale)
        m0 = base + cfg.M * parity
        m1 = base + cfg.M * (1 - parity)
        dist0 = np.abs(outcomes - points[m0])
        dist1 = np.abs(outcomes - points[m1])
        bits = (dist1 < dist0).astype(np.uint8)

    errors = None
    if x_true is not None:
        errors = int(np.count_nonzero(bits != np.asarray(x_true, dtype=np.uint8)[:n]))
        logger.debug(f"Bob decoded {n} slots with {errors} bit errors")
    return BobDecision(bits=bits, errors=errors)
