import numpy as np
import pytest
import yaml

from y00lab.config import DsrSpec, MappingTable, NoiseModel, Y00Config, irregular_table
from y00lab.prng import LfsrSpec

S_TAPS = (16, 15, 13, 4)
DX_TAPS = (16, 14, 13, 11)


def make_cfg(M=4, *, geometry='psk', alpha0=8.0, eta=0.5, mapping='regular', dsr='none',
             xi=0.0, s=None, dx=None):
    s = s or LfsrSpec(4, (4, 1), 0b0001)
    dx = dx or LfsrSpec(3, (3, 1), 0b001)
    table = irregular_table(M) if mapping == 'irregular' else tuple(range(M))
    return Y00Config(
        M=M,
        prng_s=s,
        prng_dx=dx,
        geometry=geometry,
        mapping=MappingTable(kind=mapping, table=table),
        alpha0=alpha0,
        eta=eta,
        noise=NoiseModel(xi=xi),
        dsr=DsrSpec(mode=dsr)
    )


@pytest.fixture
def lfsr4():
    return LfsrSpec(4, (4, 1), 0b0001)


@pytest.fixture
def lfsr3():
    return LfsrSpec(3, (3, 1), 0b001)


@pytest.fixture
def small_cfg():
    """M = 4 PSK driven by degree-4 and degree-3 LFSRs (T_LCM = 105)"""
    return make_cfg(4)


@pytest.fixture
def identity_cfg():
    """Identity mapping, M = 16, 16-bit generators, Eve amplitude 4"""
    return make_cfg(16, s=LfsrSpec(16, S_TAPS, 0xACE1), dx=LfsrSpec(16, DX_TAPS, 0x1D2C))


@pytest.fixture
def protected_cfg():
    """Same physics as identity_cfg with bit-reversal mapping and TrueRandom DSR"""
    return make_cfg(16, mapping='irregular', dsr='true_random',
                    s=LfsrSpec(16, S_TAPS, 0xACE1), dx=LfsrSpec(16, DX_TAPS, 0x1D2C))


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


def scenario_dict(**overrides):
    data = {
        'seed': 7,
        'y00': {'M': 16, 'geometry': 'psk', 'alpha0': 8.0, 'eta': 0.5},
        'prng': {
            's': {'kind': 'lfsr', 'degree': 16, 'taps': list(S_TAPS), 'seed_hex': 'ace1'},
            'dx': {'kind': 'lfsr', 'degree': 16, 'taps': list(DX_TAPS), 'seed_hex': '1d2c'},
        },
        'mapping': {'kind': 'regular'},
        'dsr': {'mode': 'none'},
        'breach': {'p_th': 0.5, 'grid': '0:4:1'},
        'attack': {'trials': 2, 'horizon': 4000, 'workers': 2},
        'refresh': {'rate': 5, 'hinf_mode': 'bound', 'runs': 1},
        'qdetect': {'alpha': 1.0, 'psk_order': 4, 'channel_trials': 10},
        'simulation': {'horizon': 256},
        'logging': {'level': 'WARNING', 'console': False},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    return data


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario YAML (defaults plus overrides) and return its path"""
    def _write(name='scenario.yaml', **overrides):
        path = tmp_path / name
        path.write_text(yaml.safe_dump(scenario_dict(**overrides), sort_keys=False))
        return path
    return _write
