import pytest

from emrseg.config import PipelineConfig, load_config, parse_config_text, set_value
from emrseg.errors import ConfigurationError
from emrseg.notes import CorpusKind
from tests.conftest import RESOURCES


class TestDefaults:

    def test_documented_defaults(self):
        config = load_config()
        assert config.seed == 42
        assert config.corpus_kind is CorpusKind.MIXED
        assert config.encoder_mode == 'sif'
        assert config.skipgram.dim == 300
        assert config.skipgram.window == 16
        assert config.sif.alpha == pytest.approx(0.001)
        assert config.train.hidden_size == 128
        assert config.train.learning_rate == pytest.approx(1e-3)
        assert config.train.clip_norm == pytest.approx(5.0)
        assert config.train.batch_size == 8
        assert config.train.patience == 5
        assert (config.synth.n_train, config.synth.n_test) == (2000, 500)

    def test_example_file_matches_defaults(self):
        from_file = load_config(str(RESOURCES / 'emrseg.conf'))
        assert from_file.config_hash() == load_config().config_hash()
        assert from_file.paths.units == 'resources/units.txt'


class TestPrecedence:

    def test_file_then_environment_then_flags(self, tmp_path, monkeypatch):
        path = tmp_path / 'run.conf'
        path.write_text("seed = 1\nsif.alpha = 0.01  # lighter weighting\n", encoding='utf-8')
        assert load_config(str(path)).seed == 1

        monkeypatch.setenv('EMRSEG_SEED', '2')
        assert load_config(str(path)).seed == 2

        config = load_config(str(path), {'seed': 3, 'sif.alpha': None})
        assert config.seed == 3
        assert config.sif.alpha == pytest.approx(0.01)

    def test_seed_reaches_every_component(self):
        config = load_config(overrides={'seed': 9})
        assert config.skipgram.seed == 9
        assert config.train.seed == 9


class TestValues:

    @pytest.mark.parametrize('key, value, attribute, expected', [
        ('corpus_kind', 'no-headings', 'corpus_kind', CorpusKind.NO_HEADINGS),
        ('deterministic', 'off', 'deterministic', False),
        ('paths.model', 'none', 'paths.model', None),
        ('train.dtype', 'float64', 'train.dtype', 'float64'),
        ('skipgram.window', ' 4 ', 'skipgram.window', 4),
    ])
    def test_coercion(self, key, value, attribute, expected):
        config = PipelineConfig()
        set_value(config, key, value)
        target = config
        for part in attribute.split('.'):
            target = getattr(target, part)
        assert target == expected

    @pytest.mark.parametrize('key, value', [
        ('skipgram.size', '3'),
        ('tagger.hidden_size', '3'),
        ('skipgram', '3'),
        ('skipgram.window', 'wide'),
        ('deterministic', 'maybe'),
        ('corpus_kind', 'type5'),
    ])
    def test_rejected_values(self, key, value):
        with pytest.raises(ConfigurationError):
            set_value(PipelineConfig(), key, value)

    @pytest.mark.parametrize('overrides', [
        {'encoder_mode': 'max'},
        {'train_fraction': '1.0'},
        {'sif.alpha': '0'},
        {'train.dev_fraction': '1'},
        {'skipgram.window': '0'},
        {'threads': '0'},
    ])
    def test_invalid_configuration(self, overrides):
        with pytest.raises(ConfigurationError):
            load_config(overrides=overrides)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(str(tmp_path / 'missing.conf'))

    def test_line_without_equals(self):
        with pytest.raises(ConfigurationError, match='line 2'):
            parse_config_text("seed = 1\nseed 2\n")


class TestConfigHash:

    def test_paths_and_threads_are_excluded(self):
        base = load_config()
        other = load_config(overrides={'paths.model': 'elsewhere.emrseg', 'threads': 4})
        assert base.config_hash() == other.config_hash()

    def test_model_settings_change_the_hash(self):
        assert load_config().config_hash() != load_config(overrides={'train.hidden_size': 64}).config_hash()
