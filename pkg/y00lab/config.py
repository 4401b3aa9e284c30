"""
Scenario configuration for y00lab

One YAML file describes a complete Y00 system design plus the settings of
every analysis run against it.
"""

import hashlib
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import yaml
from dotenv import load_dotenv

from y00lab.errors import ConfigError
from y00lab.prng import GeneratorSpec, KeyedCounterSpec, LfsrSpec

# Load environment variables
load_dotenv()

GEOMETRIES = ('psk', 'isk')
MAPPING_KINDS = ('regular', 'irregular', 'scrambled')
DSR_MODES = ('none', 'keyed', 'true_random')


def bit_reversal_table(M: int) -> Tuple[int, ...]:
    """Bit-reversal permutation of {0..M-1}"""
    width = (M - 1).bit_length()
    return tuple(int(format(s, f'0{width}b')[::-1], 2) if width else 0 for s in range(M))


def irregular_table(M: int, permutation: Optional[Tuple[int, ...]] = None) -> Tuple[int, ...]:
    """Map[s] = bitrev(permutation[s]); identity permutation gives pure bit reversal"""
    reverse = bit_reversal_table(M)
    permutation = tuple(range(M)) if permutation is None else tuple(permutation)
    return tuple(reverse[p] for p in permutation)


@dataclass(frozen=True)
class NoiseModel:
    """
    Gaussian noise seen by Eve's (and Bob's) receiver

    Heterodyne outcomes are complex Gaussian with per-quadrature variance
    (1 + xi)/2 + 1/2; amplitudes are in units where vacuum heterodyne noise
    has unit variance per quadrature.
    """
    xi: float = 0.0
    bob_xi: float = 0.0
    heterodyne: bool = True

    def __post_init__(self):
        if self.xi < 0 or self.bob_xi < 0:
            raise ConfigError("excess noise xi must be >= 0")

    def variance(self, xi: Optional[float] = None) -> float:
        xi = self.xi if xi is None else xi
        base = (1.0 + xi) / 2.0
        return base + 0.5 if self.heterodyne else base

    @property
    def eve_variance(self) -> float:
        return self.variance(self.xi)

    @property
    def bob_variance(self) -> float:
        return self.variance(self.bob_xi)


@dataclass(frozen=True)
class MappingTable:
    """Map[.] from keystream words to base bands"""
    kind: str = 'regular'
    table: Tuple[int, ...] = ()
    generator: Optional[GeneratorSpec] = None

    def inverse(self) -> Tuple[int, ...]:
        inv = [0] * len(self.table)
        for s, band in enumerate(self.table):
            inv[band] = s
        return tuple(inv)


@dataclass(frozen=True)
class DsrSpec:
    """Deliberate signal randomisation mode"""
    mode: str = 'none'
    generator: Optional[GeneratorSpec] = None


@dataclass(frozen=True)
class Y00Config:
    """Complete Y00 system design"""
    M: int
    prng_s: GeneratorSpec
    prng_dx: GeneratorSpec
    geometry: str = 'psk'
    mapping: MappingTable = field(default_factory=MappingTable)
    alpha0: float = 8.0
    eta: float = 0.5
    noise: NoiseModel = field(default_factory=NoiseModel)
    dsr: DsrSpec = field(default_factory=DsrSpec)

    def __post_init__(self):
        if self.M < 2 or self.M & (self.M - 1):
            raise ConfigError(f"M must be a power of two >= 2, got {self.M}")
        if self.geometry not in GEOMETRIES:
            raise ConfigError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if self.alpha0 <= 0:
            raise ConfigError(f"alpha0 must be > 0, got {self.alpha0}")
        if self.mapping.kind not in MAPPING_KINDS:
            raise ConfigError(f"mapping kind must be one of {MAPPING_KINDS}")
        if not self.mapping.table:
            object.__setattr__(self, 'mapping', replace(self.mapping, table=tuple(range(self.M))))
        if sorted(self.mapping.table) != list(range(self.M)):
            raise ConfigError(f"mapping table is not a permutation of 0..{self.M - 1}")
        if self.M == 2 and (self.mapping.kind != 'regular' or self.mapping.table != (0, 1)):
            raise ConfigError("M = 2 supports only the identity mapping")
        if self.mapping.kind == 'scrambled' and self.mapping.generator is None:
            raise ConfigError("scrambled mapping needs a generator")
        if self.dsr.mode not in DSR_MODES:
            raise ConfigError(f"dsr mode must be one of {DSR_MODES}")
        if self.dsr.mode == 'keyed' and self.dsr.generator is None:
            raise ConfigError("keyed DSR needs a generator")

    @property
    def word_bits(self) -> int:
        return self.M.bit_length() - 1

    @property
    def key_widths(self) -> Tuple[int, int]:
        return self.prng_s.seed_width, self.prng_dx.seed_width

    def with_generators(self, prng_s: GeneratorSpec, prng_dx: GeneratorSpec) -> "Y00Config":
        return replace(self, prng_s=prng_s, prng_dx=prng_dx)


@dataclass
class BreachSettings:
    """Breach analytics settings"""
    p_th: float = 0.5
    grid: str = "0:100:1"
    dense_cap_bits: int = 24
    product_cap_slots: int = 1 << 22
    period_cap: int = 1 << 24
    exact_cap: int = 2_000_000
    mc_trials: int = 1_000_000


@dataclass
class AttackSettings:
    """Fast correlation attack campaign settings"""
    trials: int = 100
    horizon: int = 10000
    max_weight: int = 3
    max_checks: int = 64
    max_iterations: int = 50
    min_bias: float = 1e-6
    workers: int = 4


@dataclass
class RefreshSettings:
    """Key refreshment settings"""
    rate: int = 5
    hinf_mode: str = 'bound'
    tau: str = 'auto'
    margin: float = 100.0
    runs: int = 1
    workers: int = 4


@dataclass
class QdetectSettings:
    """Small-scale quantum detection settings"""
    alpha: float = 1.0
    psk_order: int = 4
    channel_trials: int = 100
    ancilla_dim: int = 2


@dataclass
class SimulationSettings:
    """Trace simulation settings"""
    horizon: int = 4096


@dataclass
class OutputSettings:
    """Artifact output settings"""
    directory: str = "./out"


@dataclass
class LoggingSettings:
    """Logging configuration"""
    level: str = "INFO"
    file: str = ""
    console: bool = True
    max_bytes: int = 10485760  # 10MB
    backup_count: int = 5


def _parse_int(value: Any, name: str) -> int:
    if isinstance(value, int):
        return value
    try:
        return int(str(value), 16)
    except ValueError as e:
        raise ConfigError(f"{name}: expected hex string, got {value!r}") from e


def parse_generator(data: Dict[str, Any], name: str) -> GeneratorSpec:
    """Build a generator spec from a `prng.*`-style mapping"""
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping")
    kind = data.get('kind', 'lfsr')
    try:
        if kind == 'lfsr':
            degree = int(data['degree'])
            return LfsrSpec(
                degree=degree,
                taps=tuple(data.get('taps', (degree,))),
                seed=_parse_int(data.get('seed_hex', 1), f"{name}.seed_hex")
            )
        if kind == 'keyed_counter':
            return KeyedCounterSpec(
                key=_parse_int(data.get('key_hex', data.get('seed_hex', 1)), f"{name}.key_hex"),
                key_width=int(data.get('key_width', 32)),
                rounds=int(data.get('rounds', 8)),
                block_width=int(data.get('block_width', 16))
            )
    except KeyError as e:
        raise ConfigError(f"{name}: missing field {e}") from e
    except ValueError as e:
        raise ConfigError(f"{name}: {e}") from e
    raise ConfigError(f"{name}: unknown generator kind {kind!r}")


class ScenarioConfig:
    """Main configuration class"""

    def __init__(self, path: str):
        self.path = Path(path)
        self.y00: Optional[Y00Config] = None
        self.seed: int = 0
        self.key_bits: Optional[Tuple[int, int]] = None
        self.breach: BreachSettings = BreachSettings()
        self.attack: AttackSettings = AttackSettings()
        self.refresh: RefreshSettings = RefreshSettings()
        self.qdetect: QdetectSettings = QdetectSettings()
        self.simulation: SimulationSettings = SimulationSettings()
        self.output: OutputSettings = OutputSettings()
        self.logging: LoggingSettings = LoggingSettings()
        self.digest: str = ""

    def load(self) -> "ScenarioConfig":
        """Load and validate the scenario file"""
        if not self.path.exists():
            raise FileNotFoundError(f"Scenario configuration not found: {self.path}")

        raw = self.path.read_bytes()
        self.digest = hashlib.sha256(raw).hexdigest()[:16]
        try:
            data = yaml.safe_load(raw) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"{self.path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{self.path}: top level must be a mapping")

        try:
            self._load_system(data)
            self._load_settings(data)
        except (ValueError, TypeError, AttributeError) as e:
            raise ConfigError(f"{self.path}: {e}") from e
        self.validate()
        return self

    def _load_system(self, data: Dict[str, Any]):
        """Load the Y00 system design sections"""
        y00_data = data.get('y00', {})
        prng_data = data.get('prng', {})
        if 's' not in prng_data or 'dx' not in prng_data:
            raise ConfigError("prng.s and prng.dx sections are required")

        M = int(y00_data.get('M', 16))
        if 'key_bits' in y00_data:
            k_bits, dk_bits = y00_data['key_bits']
            self.key_bits = (int(k_bits), int(dk_bits))
        mapping_data = data.get('mapping', {})
        kind = mapping_data.get('kind', 'regular')
        if 'table' in mapping_data:
            table = tuple(int(v) for v in mapping_data['table'])
        elif kind == 'irregular':
            permutation = mapping_data.get('permutation')
            table = irregular_table(M, tuple(permutation) if permutation else None)
        else:
            table = tuple(range(M))
        mapping = MappingTable(
            kind=kind,
            table=table,
            generator=(parse_generator(mapping_data['generator'], 'mapping.generator')
                       if 'generator' in mapping_data else None)
        )

        dsr_data = data.get('dsr', {})
        dsr = DsrSpec(
            mode=dsr_data.get('mode', 'none'),
            generator=(parse_generator(dsr_data['generator'], 'dsr.generator')
                       if 'generator' in dsr_data else None)
        )

        noise_data = data.get('noise', {})
        noise = NoiseModel(
            xi=float(noise_data.get('xi', 0.0)),
            bob_xi=float(noise_data.get('bob_xi', 0.0)),
            heterodyne=bool(noise_data.get('heterodyne', True))
        )

        self.y00 = Y00Config(
            M=M,
            prng_s=parse_generator(prng_data['s'], 'prng.s'),
            prng_dx=parse_generator(prng_data['dx'], 'prng.dx'),
            geometry=str(y00_data.get('geometry', 'psk')).lower(),
            mapping=mapping,
            alpha0=float(y00_data.get('alpha0', 8.0)),
            eta=float(y00_data.get('eta', 0.5)),
            noise=noise,
            dsr=dsr
        )

    def _load_settings(self, data: Dict[str, Any]):
        """Load analysis, output and logging settings"""
        self.seed = int(os.getenv('Y00LAB_SEED', data.get('seed', 0)))

        breach_data = data.get('breach', {})
        self.breach = BreachSettings(
            p_th=float(breach_data.get('p_th', 0.5)),
            grid=str(breach_data.get('grid', '0:100:1')),
            dense_cap_bits=int(breach_data.get('dense_cap_bits', 24)),
            product_cap_slots=int(breach_data.get('product_cap_slots', 1 << 22)),
            period_cap=int(breach_data.get('period_cap', 1 << 24)),
            exact_cap=int(breach_data.get('exact_cap', 2_000_000)),
            mc_trials=int(breach_data.get('mc_trials', 1_000_000))
        )

        attack_data = data.get('attack', {})
        self.attack = AttackSettings(
            trials=int(attack_data.get('trials', 100)),
            horizon=int(attack_data.get('horizon', 10000)),
            max_weight=int(attack_data.get('max_weight', 3)),
            max_checks=int(attack_data.get('max_checks', 64)),
            max_iterations=int(attack_data.get('max_iterations', 50)),
            min_bias=float(attack_data.get('min_bias', 1e-6)),
            workers=int(attack_data.get('workers', 4))
        )

        refresh_data = data.get('refresh', {})
        self.refresh = RefreshSettings(
            rate=int(refresh_data.get('rate', 5)),
            hinf_mode=str(refresh_data.get('hinf_mode', 'bound')),
            tau=str(refresh_data.get('tau', 'auto')),
            margin=float(refresh_data.get('margin', 100.0)),
            runs=int(refresh_data.get('runs', 1)),
            workers=int(refresh_data.get('workers', 4))
        )

        qdetect_data = data.get('qdetect', {})
        self.qdetect = QdetectSettings(
            alpha=float(qdetect_data.get('alpha', 1.0)),
            psk_order=int(qdetect_data.get('psk_order', 4)),
            channel_trials=int(qdetect_data.get('channel_trials', 100)),
            ancilla_dim=int(qdetect_data.get('ancilla_dim', 2))
        )

        simulation_data = data.get('simulation', {})
        self.simulation = SimulationSettings(
            horizon=int(simulation_data.get('horizon', 4096))
        )

        output_data = data.get('output', {})
        self.output = OutputSettings(
            directory=os.getenv('Y00LAB_OUT_DIR', output_data.get('directory', './out'))
        )

        log_data = data.get('logging', {})
        self.logging = LoggingSettings(
            level=os.getenv('Y00LAB_LOG_LEVEL', log_data.get('level', 'INFO')),
            file=log_data.get('file', ''),
            console=log_data.get('console', True),
            max_bytes=log_data.get('max_bytes', 10485760),
            backup_count=log_data.get('backup_count', 5)
        )

    def validate(self):
        """Cross-field checks that must pass before any run"""
        cfg = self.y00
        if cfg is None:
            raise ConfigError("no y00 system loaded")
        if cfg.dsr.mode == 'keyed' and cfg.dsr.generator is None:
            raise ConfigError("dsr.mode = keyed requires dsr.generator")
        if self.key_bits is not None and self.key_bits != cfg.key_widths:
            raise ConfigError(f"y00.key_bits {list(self.key_bits)} does not match the generator "
                              f"seed widths {list(cfg.key_widths)}")
        if not 0.0 < self.breach.p_th < 1.0:
            raise ConfigError(f"breach.p_th must lie in (0, 1), got {self.breach.p_th}")
        if self.refresh.rate < 1 or self.refresh.rate % 2 == 0:
            raise ConfigError("refresh.rate must be an odd repetition factor")
        if self.refresh.hinf_mode not in ('exact', 'bound'):
            raise ConfigError("refresh.hinf_mode must be 'exact' or 'bound'")
        if self.attack.trials < 0 or self.attack.horizon < 1:
            raise ConfigError("attack.trials must be >= 0 and attack.horizon >= 1")
        if self.qdetect.psk_order < 2:
            raise ConfigError("qdetect.psk_order must be >= 2")
