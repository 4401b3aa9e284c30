"""
Eve's physical layer

Beam-splitter tap, heterodyne outcome sampling, decision-region
quantisation and the induced per-symbol and per-period error-pattern
distributions. Bob's receiver shares the same Gaussian model.

Error patterns are offset sequences delta(t) = detected - true (mod 2M),
serialised most-significant digit first.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from math import log2
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr

from y00lab.config import BreachSettings, NoiseModel, Y00Config
from y00lab.errors import PeriodUnknownError, QuadratureError, UnsupportedConfigurationError
from y00lab.infotheory import JointDist
from y00lab.prng import RunningKey, running_key_period
from y00lab.y00core import SymbolTrace, slot_mapping_tables, symbol_amplitudes

logger = logging.getLogger(__name__)

__all__ = [
    "NoiseModel", "DecisionRegionSet", "ErrorPatternDist",
    "decision_regions", "decide_symbol", "tap_and_measure", "bob_receive",
    "symbol_error_dist", "slot_offset_dist", "pattern_dist", "eve_view_joint",
]


@dataclass(frozen=True)
class DecisionRegionSet:
    """
    Partition of the outcome plane into 2M cells

    PSK: angular sectors of width pi/M centred on phase pi*m/M.
    ISK: Voronoi intervals of the real part around the amplitude ladder.
    """
    geometry: str
    M: int
    scale: float

    def cell_bounds(self, m: int):
        """Lower and upper edge of cell m (angle for PSK, real part for ISK)"""
        if self.geometry == 'psk':
            width = np.pi / self.M
            return m * width - width / 2, m * width + width / 2
        step = self.scale / (2 * self.M)
        lo = -np.inf if m == 0 else step * (m + 0.5)
        hi = np.inf if m == 2 * self.M - 1 else step * (m + 1.5)
        return lo, hi


def decision_regions(cfg: Y00Config, scale: Optional[float] = None) -> DecisionRegionSet:
    """Decision regions for Eve's received amplitude (eta * alpha0 by default)"""
    scale = cfg.eta * cfg.alpha0 if scale is None else scale
    return DecisionRegionSet(cfg.geometry, cfg.M, float(scale))


def decide_symbol(outcome: Union[complex, np.ndarray],
                  regions: DecisionRegionSet) -> Union[int, np.ndarray]:
    """
    Index of the cell containing each outcome

    Boundary points go to the lower index.
    """
    y = np.asarray(outcome, dtype=complex)
    n_cells = 2 * regions.M
    if regions.geometry == 'psk':
        u = np.angle(y) / (np.pi / regions.M)
        m = np.mod(np.ceil(u - 0.5), n_cells).astype(np.int64)
    elif regions.scale == 0:
        m = np.zeros(y.shape, dtype=np.int64)
    else:
        u = y.real / (regions.scale / n_cells) - 1.0
        m = np.clip(np.ceil(u - 0.5), 0, n_cells - 1).astype(np.int64)
    return int(m) if m.ndim == 0 else m


def _sample(means: np.ndarray, variance: float, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    sd = np.sqrt(variance)
    noise = rng.standard_normal((2, len(means)))
    return means + sd * (noise[0] + 1j * noise[1])


def tap_and_measure(trace: SymbolTrace, cfg: Y00Config, seed) -> np.ndarray:
    """
    Eve's heterodyne outcomes on the tapped fraction eta of each symbol

    Args:
        trace: Transmitted symbols
        cfg: System design
        seed: RNG seed (int or sequence, as accepted by numpy default_rng)

    Returns:
        Complex outcomes, one per slot
    """
    return _sample(cfg.eta * trace.amplitude, cfg.noise.eve_variance, seed)


def bob_receive(trace: SymbolTrace, cfg: Y00Config, seed, noiseless: bool = False) -> np.ndarray:
    """Bob's outcomes on the remaining fraction 1 - eta"""
    means = (1.0 - cfg.eta) * trace.amplitude
    if noiseless:
        return means.astype(complex)
    return _sample(means, cfg.noise.bob_variance, seed)


def _psk_angular_density(phi: float, rho: float) -> float:
    c = rho * np.cos(phi)
    return (np.exp(-rho * rho / 2)
            + np.sqrt(2 * np.pi) * c * np.exp(-(rho * np.sin(phi)) ** 2 / 2) * ndtr(c)) / (2 * np.pi)


@lru_cache(maxsize=256)
def _psk_offsets(M: int, rho: float) -> np.ndarray:
    n_cells = 2 * M
    if rho == 0:
        return np.full(n_cells, 1.0 / n_cells)
    width = np.pi / M
    probs = np.empty(n_cells)
    for delta in range(n_cells):
        lo, hi = delta * width - width / 2, delta * width + width / 2
        result = quad(_psk_angular_density, lo, hi, args=(rho,),
                      epsabs=1e-12, epsrel=1e-10, limit=200, full_output=1)
        if len(result) > 3:
            raise QuadratureError(f"PSK cell {delta} (M={M}, rho={rho}): {result[3]}")
        probs[delta] = result[0]
    total = probs.sum()
    if abs(total - 1.0) > 1e-9:
        raise QuadratureError(f"PSK cells (M={M}, rho={rho}) sum to {total!r}")
    probs /= total
    probs.setflags(write=False)
    logger.debug(f"PSK offset distribution M={M} rho={rho:.6g}: sum={probs.sum():.15f}")
    return probs


@lru_cache(maxsize=1024)
def _isk_cells(M: int, scale: float, sd: float, m: int) -> np.ndarray:
    n_cells = 2 * M
    if scale == 0:
        return np.full(n_cells, 1.0 / n_cells)
    regions = DecisionRegionSet('isk', M, scale)
    mean = scale * (m + 1) / n_cells
    edges = [regions.cell_bounds(j)[0] for j in range(n_cells)] + [np.inf]
    cdf = ndtr((np.asarray(edges) - mean) / sd)
    probs = np.diff(cdf)
    probs.setflags(write=False)
    return probs


def symbol_error_dist(true_m: int, cfg: Y00Config, scale: Optional[float] = None,
                      variance: Optional[float] = None) -> np.ndarray:
    """
    Distribution of detected-index offsets for one transmitted symbol

    Args:
        true_m: Transmitted index in [0, 2M)
        cfg: System design
        scale: Received amplitude (eta * alpha0 for Eve)
        variance: Per-quadrature noise variance (Eve's by default)

    Returns:
        Array p with p[delta] = Pr(detected = true_m + delta mod 2M)
    """
    n_cells = 2 * cfg.M
    if not 0 <= true_m < n_cells:
        raise ValueError(f"symbol index {true_m} outside [0, {n_cells})")
    scale = cfg.eta * cfg.alpha0 if scale is None else float(scale)
    variance = cfg.noise.eve_variance if variance is None else float(variance)
    sd = np.sqrt(variance)
    if cfg.geometry == 'psk':
        return np.array(_psk_offsets(cfg.M, scale / sd))
    cells = _isk_cells(cfg.M, scale, float(sd), int(true_m))
    return np.roll(cells, -true_m)


def slot_offset_dist(cfg: Y00Config, m_ref: int, scale: Optional[float] = None) -> np.ndarray:
    """
    Offset distribution of one slot relative to its key-determined index

    Under TrueRandom DSR the IID DSR word makes every transmitted index of the
    2M-point constellation equally likely from Eve's side, so the row is the
    average over all 2M transmissions with offsets taken against m_ref (the
    d = 0 index). Every error pattern then has the same probability.
    """
    if cfg.dsr.mode != 'true_random':
        return symbol_error_dist(m_ref, cfg, scale)
    n_cells = 2 * cfg.M
    row = np.zeros(n_cells)
    for m_true in range(n_cells):
        detected = np.roll(symbol_error_dist(m_true, cfg, scale), m_true)
        row += np.roll(detected, -m_ref)
    return row / n_cells


@dataclass
class ErrorPatternDist:
    """
    Distribution of Eve's per-period error patterns

    Slots are independent, so the distribution is the product of per-slot
    rows. Distinct rows are stored once with their multiplicities; a dense
    table over all patterns is attached when it fits under the size cap.
    """
    M: int
    t_lcm: int
    rows: np.ndarray
    counts: np.ndarray
    slot_rows: Optional[np.ndarray] = None
    probs: Optional[np.ndarray] = None

    @property
    def pattern_len(self) -> int:
        return int(self.t_lcm * log2(2 * self.M))

    @property
    def log2_min_prob(self) -> float:
        with np.errstate(divide='ignore'):
            return float(np.sum(self.counts * np.log2(self.rows.min(axis=1))))

    @property
    def min_prob(self) -> float:
        if self.probs is not None:
            return float(self.probs.min())
        return float(2.0 ** self.log2_min_prob)

    def slot_row(self, t: int) -> np.ndarray:
        index = 0 if self.slot_rows is None else self.slot_rows[t]
        return self.rows[index]

    def pattern_hex(self, index: int) -> str:
        digits = -(-self.pattern_len // 4)
        return format(index, f'0{max(digits, 1)}x')


def _key_indices(cfg: Y00Config, r: RunningKey, x: Sequence[int], t_lcm: int) -> np.ndarray:
    """Key-determined symbol index per slot (the d = 0 index under TrueRandom DSR)"""
    from y00lab.y00core import dsr_words

    x = np.asarray(x, dtype=np.int64)[:t_lcm]
    if len(x) < t_lcm or r.horizon < t_lcm:
        raise ValueError(f"running key and plaintext must cover one period of {t_lcm} slots")
    s = r.s[:t_lcm].astype(np.int64)
    tables = slot_mapping_tables(cfg, t_lcm)
    table = np.asarray(cfg.mapping.table, dtype=np.int64)
    parity_band = table[s] if tables is None else tables[np.arange(t_lcm), s]
    d = dsr_words(cfg, t_lcm) if cfg.dsr.mode == 'keyed' else np.zeros(t_lcm, dtype=np.int64)
    base = table[s ^ d] if tables is None else tables[np.arange(t_lcm), s ^ d]
    return base + cfg.M * ((parity_band + x + r.dx[:t_lcm]) % 2)


def pattern_dist(cfg: Y00Config, r: Optional[RunningKey] = None,
                 x: Optional[Sequence[int]] = None, *,
                 t_lcm: Optional[int] = None,
                 settings: Optional[BreachSettings] = None) -> ErrorPatternDist:
    """
    Per-period error-pattern distribution Pr(e | r, x)

    PSK rows are shift invariant, so they do not depend on (r, x). ISK rows
    depend on the transmitted index and need the running key and plaintext
    over one full period.

    Args:
        cfg: System design
        r: Running key over at least one period (ISK only)
        x: Plaintext over one period (ISK only)
        t_lcm: Period in slots (computed from cfg when omitted)
        settings: Size caps

    Returns:
        ErrorPatternDist
    """
    settings = settings or BreachSettings()
    if t_lcm is None:
        t_lcm = r.t_lcm if r is not None and r.t_lcm is not None else running_key_period(
            cfg, settings.period_cap)
    if t_lcm is None:
        raise PeriodUnknownError("T_LCM unknown: breach analytics refused")

    n_cells = 2 * cfg.M
    pattern_bits = t_lcm * log2(n_cells)

    if cfg.geometry == 'psk':
        rows = slot_offset_dist(cfg, 0)[None, :]
        counts = np.array([t_lcm])
        slot_rows = None
    else:
        if t_lcm > settings.product_cap_slots:
            raise UnsupportedConfigurationError(
                f"T_LCM = {t_lcm} slots with slot-dependent ISK rows exceeds the product-form "
                f"cap of {settings.product_cap_slots} slots")
        if r is None or x is None:
            raise ValueError("ISK pattern distributions need the running key and plaintext")
        m_ref = _key_indices(cfg, r, x, t_lcm)
        used, slot_rows, counts = np.unique(m_ref, return_inverse=True, return_counts=True)
        rows = np.vstack([slot_offset_dist(cfg, int(m)) for m in used])

    probs = None
    if pattern_bits <= settings.dense_cap_bits:
        probs = np.ones(1)
        for t in range(t_lcm):
            row = rows[0] if slot_rows is None else rows[slot_rows[t]]
            probs = np.kron(probs, row)
        total = probs.sum()
        if abs(total - 1.0) > 1e-10:
            raise QuadratureError(f"pattern probabilities sum to {total!r}")

    dist = ErrorPatternDist(M=cfg.M, t_lcm=t_lcm, rows=rows, counts=counts,
                            slot_rows=slot_rows, probs=probs)
    logger.info(f"Pattern distribution: T_LCM={t_lcm}, |e|={dist.pattern_len} bits, "
                f"log2 min Pr={dist.log2_min_prob:.6g}"
                f"{' (dense)' if probs is not None else ' (product form)'}")
    return dist


def eve_view_joint(cfg: Y00Config, s: Optional[int] = None, dx: Optional[int] = None) -> JointDist:
    """
    Joint distribution of a uniform plaintext bit X and Eve's detected index C

    Args:
        cfg: System design
        s: Key word for a point-mass key prior (uniform over s when None)
        dx: Key parity bit for a point-mass prior (uniform when None)

    Returns:
        JointDist over ('X', 'C')
    """
    M = cfg.M
    words = range(M) if s is None else [s]
    parities = (0, 1) if dx is None else [dx]
    weight = 0.5 / (len(words) * len(parities))
    table = np.zeros((2, 2 * M))
    key_table = np.asarray(cfg.mapping.table)
    for word in words:
        for parity in parities:
            for x in (0, 1):
                band = key_table[word]
                m_ref = band + M * ((band + x + parity) % 2)
                row = slot_offset_dist(cfg, int(m_ref))
                table[x] += weight * np.roll(row, m_ref)
    return JointDist(('X', 'C'), table)
