"""
Training configuration and its ``key = value`` text format.

Every configuration value has a flat key; keys of the generator and renderer
sections are routed to :class:`GeneratorConfig` and :class:`RendererConfig`.
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .errors import ConfigError
from .model.generator import GeneratorConfig
from .model.renderer import RendererConfig

# generator settings the training run uses where the bare model defaults differ
TRAINING_GENERATOR: Dict[str, Any] = {"refine_iterations": 2, "supervise_branches": True}


def training_generator(**overrides: Any) -> GeneratorConfig:
    """The generator section of a training run: :data:`TRAINING_GENERATOR` over the model defaults."""
    return GeneratorConfig(**{**TRAINING_GENERATOR, **overrides})


@dataclass(frozen=True)
class TrainConfig:
    """
    Optimization schedule plus the model sections.

    :param lr: Initial learning rate.
    :param lr_decay: Factor applied every ``lr_decay_every`` epochs.
    :param lr_decay_every: Epochs between decays.
    :param weight_decay: Decoupled weight decay.
    :param batch_size: Examples per optimizer step; gradients are averaged.
    :param epochs: Number of training epochs.
    :param seed: Seed for initialization, example order and renderer sampling.
    :param train_size: Samples in the generated train split.
    :param val_size: Samples in the generated validation split.
    :param test_size: Samples in the generated test split.
    :param eval_workers: Threads used by evaluation.
    """

    lr: float = 3e-4
    lr_decay: float = 0.1
    lr_decay_every: int = 10
    weight_decay: float = 1e-5
    batch_size: int = 8
    epochs: int = 30
    seed: int = 0
    train_size: int = 500
    val_size: int = 100
    test_size: int = 200
    eval_workers: int = 1
    generator: GeneratorConfig = field(default_factory=training_generator)
    renderer: RendererConfig = field(default_factory=RendererConfig)

    def __post_init__(self):
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be non-negative, got {self.epochs}")
        if self.lr_decay_every < 1:
            raise ConfigError(f"lr_decay_every must be at least 1, got {self.lr_decay_every}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be non-negative, got {self.weight_decay}")
        if self.eval_workers < 1:
            raise ConfigError(f"eval_workers must be at least 1, got {self.eval_workers}")
        for name in ("train_size", "val_size", "test_size"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")


# key -> (section, field); section None is TrainConfig itself
KEYS: Dict[str, Tuple[Optional[str], str]] = {
    "lr": (None, "lr"),
    "lr_decay": (None, "lr_decay"),
    "lr_decay_every": (None, "lr_decay_every"),
    "weight_decay": (None, "weight_decay"),
    "batch_size": (None, "batch_size"),
    "epochs": (None, "epochs"),
    "seed": (None, "seed"),
    "train_size": (None, "train_size"),
    "val_size": (None, "val_size"),
    "test_size": (None, "test_size"),
    "eval_workers": (None, "eval_workers"),
    "image_size": ("generator", "image_size"),
    "in_channels": ("generator", "in_channels"),
    "grid_size": ("generator", "grid_size"),
    "backbone_channels": ("generator", "backbone_channels"),
    "fused_channels": ("generator", "fused_channels"),
    "branch_channels": ("generator", "branch_channels"),
    "k_vertices": ("generator", "num_vertices"),
    "gcn_layers": ("generator", "gcn_layers"),
    "gcn_hidden": ("generator", "gcn_hidden"),
    "refine_iterations": ("generator", "refine_iterations"),
    "supervise_branches": ("generator", "supervise_branches"),
    "train_samples": ("renderer", "train_samples_per_vertex"),
    "offset_range": ("renderer", "train_offset_range"),
    "grid_n": ("renderer", "test_grid_side"),
    "square_s": ("renderer", "test_square_size"),
    "threshold": ("renderer", "fg_threshold"),
    "renderer_loss_weight": ("renderer", "loss_weight"),
    "target_source": ("renderer", "target_source"),
}

_SECTION_TYPES = {None: TrainConfig, "generator": GeneratorConfig, "renderer": RendererConfig}
_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


def normalize_key(key: str) -> str:
    return key.strip().lower().replace("-", "_")


def _field_type(section: Optional[str], name: str) -> type:
    return {f.name: f.type for f in dataclasses.fields(_SECTION_TYPES[section])}[name]


def _coerce(key: str, raw: Any, kind: type) -> Any:
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if kind is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        if kind is str:
            return text.strip("\"'")
        return kind(text)
    except ValueError:
        raise ConfigError(f"invalid value {text!r} for '{key}': expected {kind.__name__}") from None


def build_config(values: Mapping[str, Any]) -> TrainConfig:
    """
    Builds a :class:`TrainConfig` from flat ``key -> value`` pairs; missing keys take defaults.

    :raises ConfigError: For unknown keys or unparseable values, naming the key.
    """
    sections: Dict[Optional[str], Dict[str, Any]] = {None: {}, "generator": {}, "renderer": {}}
    for key, raw in values.items():
        key = normalize_key(key)
        if key not in KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        section, name = KEYS[key]
        sections[section][name] = _coerce(key, raw, _field_type(section, name))
    return TrainConfig(
        **sections[None],
        generator=training_generator(**sections["generator"]),
        renderer=RendererConfig(**sections["renderer"]),
    )


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Reads ``key = value`` lines; ``#`` starts a comment, blank lines are skipped.

    :raises ConfigError: For a line without ``=``.
    """
    values = {}
    for line_number, line in enumerate(Path(path).read_text().splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, value = content.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{line_number}: expected 'key = value', got {line.strip()!r}")
        values[normalize_key(key)] = value.strip()
    return values


def parse_config(
    path: Optional[Union[str, Path]] = None, overrides: Optional[Mapping[str, Any]] = None
) -> TrainConfig:
    """
    Reads the optional config file, then applies ``overrides`` (command-line flags win).

    >>> parse_config().lr
    0.0003
    """
    values: Dict[str, Any] = read_config_file(path) if path is not None else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            values[normalize_key(key)] = value
    return build_config(values)


def config_to_dict(config: TrainConfig) -> Dict[str, Any]:
    """Flat ``key -> value`` snapshot, the inverse of :func:`build_config`."""
    result = {}
    for key, (section, name) in KEYS.items():
        owner = config if section is None else getattr(config, section)
        result[key] = getattr(owner, name)
    return result


def format_config(config: TrainConfig) -> str:
    """Renders ``config`` in the ``key = value`` file format."""
    return "".join(f"{key} = {value}\n" for key, value in config_to_dict(config).items())


def config_from_dict(values: Mapping[str, Any]) -> TrainConfig:
    """Rebuilds a config from :func:`config_to_dict` output."""
    return build_config(values)
