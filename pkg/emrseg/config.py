"""
Pipeline configuration.

Values come from dataclass defaults, then a flat ``key = value`` file, then
environment variables, then command-line flags. Nested sections use dotted
keys (``skipgram.window = 16``).
"""

import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, get_type_hints

from emrseg.errors import ConfigurationError
from emrseg.notes import CorpusKind

logger = logging.getLogger(__name__)


@dataclass
class SkipGramConfig:
    dim: int = 300
    window: int = 16
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    batch_size: int = 1024
    seed: int = 42

    def validate(self):
        if self.window < 1 or self.dim < 1 or self.negatives < 1:
            raise ConfigurationError(
                f"skipgram needs window, dim and negatives >= 1 "
                f"(got window={self.window}, dim={self.dim}, negatives={self.negatives})"
            )
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("skipgram.epochs and skipgram.batch_size must be >= 1")


@dataclass
class SifConfig:
    alpha: float = 0.001
    power_steps: int = 100
    power_tolerance: float = 1e-10

    def validate(self):
        if self.alpha <= 0:
            raise ConfigurationError(f"sif.alpha must be > 0 (got {self.alpha})")
        if self.power_steps < 1:
            raise ConfigurationError(f"sif.power_steps must be >= 1 (got {self.power_steps})")


@dataclass
class TrainConfig:
    hidden_size: int = 128
    learning_rate: float = 1e-3
    batch_size: int = 8
    max_epochs: int = 50
    patience: int = 5
    clip_norm: float = 5.0
    dev_fraction: float = 0.1
    dtype: str = 'float32'
    seed: int = 42

    def validate(self):
        if self.hidden_size < 1:
            raise ConfigurationError(f"train.hidden_size must be >= 1 (got {self.hidden_size})")
        if self.clip_norm <= 0:
            raise ConfigurationError(f"train.clip_norm must be > 0 (got {self.clip_norm})")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigurationError("train.batch_size and train.max_epochs must be >= 1")
        if not 0 <= self.dev_fraction < 1:
            raise ConfigurationError(f"train.dev_fraction must be in [0, 1) (got {self.dev_fraction})")
        if self.dtype not in ('float32', 'float64'):
            raise ConfigurationError(f"train.dtype must be float32 or float64 (got {self.dtype})")


@dataclass
class SynthConfig:
    n_train: int = 2000
    n_test: int = 500


@dataclass
class PathsConfig:
    corpus: Optional[str] = None
    embeddings: Optional[str] = None
    model: Optional[str] = None
    reports: str = 'reports'
    grammar: Optional[str] = None
    units: Optional[str] = None
    mask_cues: Optional[str] = None


@dataclass
class PipelineConfig:
    seed: int = 42
    deterministic: bool = True
    threads: int = 1
    corpus_kind: CorpusKind = CorpusKind.MIXED
    encoder_mode: str = 'sif'
    train_fraction: float = 0.8
    max_sentence_tokens: int = 512
    paths: PathsConfig = field(default_factory=PathsConfig)
    skipgram: SkipGramConfig = field(default_factory=SkipGramConfig)
    sif: SifConfig = field(default_factory=SifConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def validate(self):
        if self.encoder_mode not in ('sif', 'ave'):
            raise ConfigurationError(f"encoder_mode must be sif or ave (got {self.encoder_mode})")
        if not 0 < self.train_fraction < 1:
            raise ConfigurationError(f"train_fraction must be in (0, 1) (got {self.train_fraction})")
        if self.max_sentence_tokens < 1:
            raise ConfigurationError("max_sentence_tokens must be >= 1")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        self.skipgram.validate()
        self.sif.validate()
        self.train.validate()

    def apply_seed(self, seed: int):
        """Propagate one seed to every component."""
        self.seed = seed
        self.skipgram.seed = seed
        self.train.seed = seed

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data['corpus_kind'] = self.corpus_kind.value
        return data

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form; paths are excluded."""
        data = self.to_dict()
        data.pop('paths', None)
        data.pop('threads', None)
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _coerce(value: str, target_type, key: str):
    """Convert a config string to the type a dataclass field expects."""
    origin = getattr(target_type, '__origin__', None)
    if origin is not None:
        # Optional[X]
        args = [a for a in target_type.__args__ if a is not type(None)]
        if value.strip().lower() in ('', 'none', 'null'):
            return None
        target_type = args[0]

    try:
        if target_type is bool:
            lowered = value.strip().lower()
            if lowered in ('1', 'true', 'yes', 'on'):
                return True
            if lowered in ('0', 'false', 'no', 'off'):
                return False
            raise ValueError(value)
        if target_type is CorpusKind:
            return CorpusKind.parse(value)
        return target_type(value.strip())
    except ValueError as e:
        raise ConfigurationError(f"Invalid value for '{key}': {value!r}") from e


def set_value(config: PipelineConfig, key: str, value: str):
    """
    Set one dotted key on the configuration tree.

    Args:
        config: Configuration to mutate
        key: Dotted key such as "sif.alpha"
        value: Raw string value

    Raises:
        ConfigurationError: for unknown keys or values that do not parse
    """
    parts = key.strip().split('.')
    target = config
    for part in parts[:-1]:
        if not dataclasses.is_dataclass(target) or not hasattr(target, part):
            raise ConfigurationError(f"Unknown configuration section: '{key}'")
        target = getattr(target, part)

    name = parts[-1]
    hints = get_type_hints(type(target))
    if name not in hints or dataclasses.is_dataclass(getattr(target, name, None)):
        raise ConfigurationError(f"Unknown configuration key: '{key}'")
    setattr(target, name, _coerce(value, hints[name], key))


def parse_config_text(text: str) -> Dict[str, str]:
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigurationError(f"Config line {line_no} is not 'key = value': {raw!r}")
        key, value = line.split('=', 1)
        values[key.strip()] = value.strip()
    return values


def load_config(path: str = None, overrides: Dict[str, Any] = None) -> PipelineConfig:
    """
    Build the pipeline configuration.

    Args:
        path: Optional flat key = value config file
        overrides: Dotted keys from the command line (None values are ignored)

    Returns:
        Validated PipelineConfig
    """
    config = PipelineConfig()

    if path:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                file_values = parse_config_text(f.read())
        except OSError as e:
            raise ConfigurationError(f"Cannot read config file {path}: {e}") from e
        for key, value in file_values.items():
            set_value(config, key, value)
        logger.info(f"Loaded {len(file_values)} config value(s) from {path}")

    env_seed = os.getenv('EMRSEG_SEED')
    if env_seed:
        set_value(config, 'seed', env_seed)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        set_value(config, key, str(value))

    config.apply_seed(config.seed)
    config.validate()
    return config
