"""Experiment configuration: strict JSON parsing and content hashing.

A config file fully determines an experiment. Parsing is strict (unknown
keys are rejected with their path) and the resolved config, with every
default filled in, is hashed; the hash is embedded in every artifact the
run produces so provenance can be verified later.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError, InvariantViolation, SisganError
from .evaluation import ProtocolConfig, Regime, parse_regime
from .losses import GanLossWeights
from .nn import OptimizerConfig
from .oracle import SimulationConfig, online_analog_config
from .training import ClassifierConfig, GanTrainConfig


@dataclass(frozen=True)
class NetworkSection:
    """Architecture knobs shared by every training run in the experiment."""

    latent_dim: int = 128
    generator_widths: tuple[int, ...] = (256, 128, 64, 32)
    discriminator_widths: tuple[int, ...] = (16, 32, 64, 128)
    classifier_widths: tuple[int, ...] = (16, 32, 64, 128)
    kernel_size: int = 11
    dropout_p: float = 0.5
    compute_dtype: str = "float32"


@dataclass(frozen=True)
class GanSection:
    epochs: int = 200
    batch_size: int = 32
    lambda_a: float = 1.0
    lambda_s: float = 0.3
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0


@dataclass(frozen=True)
class ClassifierSection:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0


@dataclass(frozen=True)
class TrainingSection:
    gan: GanSection = GanSection()
    classifier: ClassifierSection = ClassifierSection()
    subject_classifier: ClassifierSection = ClassifierSection()


@dataclass(frozen=True)
class EvaluationSection:
    protocols: tuple[str, ...] = ("single_subject", "leave_one_out", "cross_task")
    regimes: tuple[str, ...] = (
        "real_only",
        "augmented:acgan",
        "augmented:sisgan",
        "synthetic_only:acgan",
        "synthetic_only:sisgan",
    )
    n_seeds: int = 10
    base_seed: int = 0
    test_fraction: float = 0.2
    mix_ratio_real: float = 0.5
    biometric_folds: int = 10


@dataclass(frozen=True)
class SimulationSection:
    offline: SimulationConfig = SimulationConfig()
    online: SimulationConfig = online_analog_config(SimulationConfig())


@dataclass(frozen=True)
class IoSection:
    artifact_dir: str = "artifacts"


@dataclass(frozen=True)
class ExperimentConfig:
    simulation: SimulationSection = SimulationSection()
    network: NetworkSection = NetworkSection()
    training: TrainingSection = TrainingSection()
    evaluation: EvaluationSection = EvaluationSection()
    io: IoSection = IoSection()

    # --- derived views used by the commands ---

    def gan_train_config(self, variant: str) -> GanTrainConfig:
        g, n = self.training.gan, self.network
        return GanTrainConfig(
            variant=variant,
            epochs=g.epochs,
            batch_size=g.batch_size,
            weights=GanLossWeights(lambda_a=g.lambda_a, lambda_s=g.lambda_s),
            optimizer=OptimizerConfig(g.learning_rate, g.beta1, g.beta2, g.epsilon),
            seed=g.seed,
            latent_dim=n.latent_dim,
            generator_widths=n.generator_widths,
            discriminator_widths=n.discriminator_widths,
            kernel_size=n.kernel_size,
            dropout_p=n.dropout_p,
            compute_dtype=n.compute_dtype,
        )

    def classifier_config(self, section: ClassifierSection) -> ClassifierConfig:
        n = self.network
        return ClassifierConfig(
            epochs=section.epochs,
            batch_size=section.batch_size,
            optimizer=OptimizerConfig(section.learning_rate, section.beta1,
                                      section.beta2, section.epsilon),
            seed=section.seed,
            widths=n.classifier_widths,
            kernel_size=n.kernel_size,
            dropout_p=n.dropout_p,
            compute_dtype=n.compute_dtype,
        )

    def protocol_config(self, jobs: int = 1) -> ProtocolConfig:
        e = self.evaluation
        return ProtocolConfig(
            n_seeds=e.n_seeds,
            base_seed=e.base_seed,
            test_fraction=e.test_fraction,
            mix_ratio_real=e.mix_ratio_real,
            gan=self.gan_train_config("acgan"),
            classifier=self.classifier_config(self.training.classifier),
            subject_classifier=self.classifier_config(self.training.subject_classifier),
            jobs=jobs,
        )

    def regimes(self) -> list[Regime]:
        return [parse_regime(r) for r in self.evaluation.regimes]


_NESTED = {
    (SimulationSection, "offline"): SimulationConfig,
    (SimulationSection, "online"): SimulationConfig,
    (TrainingSection, "gan"): GanSection,
    (TrainingSection, "classifier"): ClassifierSection,
    (TrainingSection, "subject_classifier"): ClassifierSection,
}


def _parse_section(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub_path = f"{path}.{name}"
        nested = _NESTED.get((cls, name))
        if nested is not None:
            kwargs[name] = _parse_section(nested, value, sub_path)
        elif isinstance(value, list):
            # tuple-typed fields arrive as JSON lists
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, SisganError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_SECTIONS = {
    "simulation": SimulationSection,
    "network": NetworkSection,
    "training": TrainingSection,
    "evaluation": EvaluationSection,
    "io": IoSection,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build a config from a parsed JSON object; strict about keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"config: unknown section(s) {sorted(unknown)}")
    kwargs = {name: _parse_section(cls, data[name], name)
              for name, cls in _SECTIONS.items() if name in data}
    try:
        cfg = ExperimentConfig(**kwargs)
    except SisganError as exc:
        raise ConfigError(str(exc)) from exc
    # validate regime strings eagerly so bad configs fail before any training
    try:
        cfg.regimes()
    except InvariantViolation as exc:
        raise ConfigError(f"evaluation.regimes: {exc}") from exc
    for protocol in cfg.evaluation.protocols:
        if protocol not in ("single_subject", "leave_one_out", "cross_task",
                            "subject_biometric"):
            raise ConfigError(f"evaluation.protocols: unknown protocol {protocol!r}")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def _to_plain(value: Any) -> Any:
    if hasattr(value, "__dataclass_fields__"):
        return {f.name: _to_plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, (tuple, list)):
        return [_to_plain(v) for v in value]
    return value


def resolved_dict(config: ExperimentConfig) -> dict:
    """The config with every default filled in, as plain JSON data."""
    return _to_plain(config)


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical resolved config."""
    canonical = json.dumps(resolved_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_default_config(path) -> None:
    text = json.dumps(resolved_dict(ExperimentConfig()), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")
