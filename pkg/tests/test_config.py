import pytest
import yaml

from y00lab.config import ScenarioConfig, bit_reversal_table
from y00lab.errors import ConfigError
from y00lab.prng import KeyedCounterSpec, LfsrSpec

from conftest import S_TAPS, scenario_dict


class TestLoad:

    def test_defaults_and_sections(self, write_scenario):
        config = ScenarioConfig(write_scenario()).load()
        assert config.seed == 7
        assert config.y00.M == 16
        assert config.y00.prng_s == LfsrSpec(16, S_TAPS, 0xACE1)
        assert config.y00.key_widths == (16, 16)
        assert config.attack.trials == 2
        assert config.breach.grid == '0:4:1'
        assert config.refresh.margin == 100.0
        assert len(config.digest) == 16

    def test_digest_tracks_content(self, write_scenario):
        a = ScenarioConfig(write_scenario('a.yaml')).load().digest
        b = ScenarioConfig(write_scenario('b.yaml')).load().digest
        c = ScenarioConfig(write_scenario('c.yaml', seed=8)).load().digest
        assert a == b != c

    def test_irregular_mapping(self, write_scenario):
        config = ScenarioConfig(write_scenario(mapping={'kind': 'irregular'})).load()
        assert config.y00.mapping.table == bit_reversal_table(16)

    def test_keyed_counter_dsr(self, write_scenario):
        dsr = {'mode': 'keyed', 'generator': {'kind': 'keyed_counter', 'key_hex': 'beef', 'key_width': 16}}
        config = ScenarioConfig(write_scenario(dsr=dsr)).load()
        assert config.y00.dsr.generator == KeyedCounterSpec(key=0xBEEF, key_width=16)

    def test_environment_overrides(self, write_scenario, monkeypatch, tmp_path):
        monkeypatch.setenv('Y00LAB_SEED', '99')
        monkeypatch.setenv('Y00LAB_OUT_DIR', str(tmp_path / 'artifacts'))
        monkeypatch.setenv('Y00LAB_LOG_LEVEL', 'DEBUG')
        config = ScenarioConfig(write_scenario()).load()
        assert config.seed == 99
        assert config.output.directory == str(tmp_path / 'artifacts')
        assert config.logging.level == 'DEBUG'


class TestErrors:

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ScenarioConfig(tmp_path / 'absent.yaml').load()

    @pytest.mark.parametrize("overrides", [
        {'refresh': {'rate': 4}},
        {'refresh': {'hinf_mode': 'shannon'}},
        {'breach': {'p_th': 1.5}},
        {'qdetect': {'psk_order': 1}},
        {'y00': {'M': 12}},
        {'y00': {'geometry': 'qam'}},
        {'y00': {'eta': 1.5}},
        {'dsr': {'mode': 'keyed'}},
        {'mapping': {'kind': 'scrambled'}},
        {'mapping': {'table': [0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14]}},
    ])
    def test_invalid_settings(self, write_scenario, overrides):
        with pytest.raises(ConfigError):
            ScenarioConfig(write_scenario(**overrides)).load()

    @pytest.mark.parametrize("generator", [
        {'kind': 'lfsr', 'degree': 16, 'taps': [16, 15, 13, 4], 'seed_hex': 'zz'},
        {'kind': 'lfsr', 'degree': 16, 'taps': [15, 13, 4], 'seed_hex': 'ace1'},
        {'kind': 'lfsr', 'taps': [16]},
        {'kind': 'shift_register'},
    ])
    def test_invalid_generator(self, write_scenario, generator):
        with pytest.raises(ConfigError):
            ScenarioConfig(write_scenario(prng={'s': generator})).load()

    @pytest.mark.parametrize("overrides", [
        {'y00': {'M': 'sixteen'}},
        {'y00': {'alpha0': 'bright'}},
        {'noise': {'xi': [0.1]}},
        {'attack': {'horizon': 'long'}},
        {'breach': {'p_th': 'half'}},
        {'y00': {'key_bits': 16}},
        {'mapping': 'irregular'},
    ])
    def test_malformed_values(self, write_scenario, overrides):
        with pytest.raises(ConfigError):
            ScenarioConfig(write_scenario(**overrides)).load()

    def test_key_bits_must_match_generators(self, write_scenario):
        config = ScenarioConfig(write_scenario(y00={'key_bits': [16, 16]})).load()
        assert config.key_bits == config.y00.key_widths
        with pytest.raises(ConfigError, match="key_bits"):
            ScenarioConfig(write_scenario(y00={'key_bits': [16, 12]})).load()

    def test_missing_generator_section(self, tmp_path):
        data = scenario_dict()
        del data['prng']['dx']
        path = tmp_path / 'scenario.yaml'
        path.write_text(yaml.safe_dump(data))
        with pytest.raises(ConfigError):
            ScenarioConfig(path).load()

    @pytest.mark.parametrize("text", ["- just\n- a list\n", "y00: [unclosed\n"])
    def test_malformed_yaml(self, tmp_path, text):
        path = tmp_path / 'scenario.yaml'
        path.write_text(text)
        with pytest.raises(ConfigError):
            ScenarioConfig(path).load()
