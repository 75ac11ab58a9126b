"""Checkpoint metadata helpers: persist network specs alongside weights.

Checkpoints carry enough JSON metadata to rebuild the network they belong
to (spec fields, class table, sample rate, label map), so downstream
commands can load a file and reconstruct the exact architecture.
"""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

from .data import SsvepClassTable
from .errors import InvariantViolation
from .nn import (
    Backbone,
    BackboneSpec,
    Generator,
    GeneratorSpec,
    Head,
    ParameterStore,
    build_backbone,
    build_generator,
    freeze,
    restore_parameters,
)
from .storage import load_checkpoint, save_checkpoint


def generator_checkpoint_meta(
    spec: GeneratorSpec, class_table: SsvepClassTable, sample_rate_hz: float, **extra
) -> dict:
    meta = {
        "kind": "generator",
        "spec": asdict(spec),
        "class_frequencies_hz": list(class_table.frequencies_hz),
        "sample_rate_hz": float(sample_rate_hz),
    }
    meta.update(extra)
    return meta


def backbone_checkpoint_meta(spec: BackboneSpec, **extra) -> dict:
    raw = asdict(spec)
    raw["head"] = spec.head.value
    meta = {"kind": "backbone", "spec": raw}
    meta.update(extra)
    return meta


def save_generator(generator: Generator, store: ParameterStore, path,
                   class_table: SsvepClassTable, sample_rate_hz: float, **extra) -> None:
    save_checkpoint(store, path, generator_checkpoint_meta(
        generator.spec, class_table, sample_rate_hz, **extra))


def save_backbone(network: Backbone, store: ParameterStore, path, **extra) -> None:
    save_checkpoint(store, path, backbone_checkpoint_meta(network.spec, **extra))


def load_generator(path) -> tuple[Generator, ParameterStore, dict]:
    """Rebuild a generator from a checkpoint written by save_generator."""
    loaded, meta = load_checkpoint(path)
    if meta.get("kind") != "generator":
        raise InvariantViolation(f"{path} is not a generator checkpoint")
    spec_dict = dict(meta["spec"])
    spec_dict["widths"] = tuple(spec_dict["widths"])
    spec = GeneratorSpec(**spec_dict)
    generator, store = build_generator(spec, seed=0)
    restore_parameters(store, loaded)
    return generator, store, meta


def load_backbone(path, frozen: bool | None = None) -> tuple[Backbone, ParameterStore, dict]:
    """Rebuild a backbone from a checkpoint written by save_backbone.

    ``frozen=None`` restores the frozen flag recorded in the file; True or
    False forces that state.
    """
    loaded, meta = load_checkpoint(path)
    if meta.get("kind") != "backbone":
        raise InvariantViolation(f"{path} is not a backbone checkpoint")
    spec_dict = dict(meta["spec"])
    spec_dict["head"] = Head(spec_dict["head"])
    for key in ("widths", "strides"):
        spec_dict[key] = tuple(spec_dict[key])
    spec = BackboneSpec(**spec_dict)
    network, store = build_backbone(spec, seed=0)
    restore_parameters(store, loaded)
    if frozen is True or (frozen is None and loaded.frozen):
        freeze(store)
    return network, store, meta


def class_table_from_meta(meta: dict) -> SsvepClassTable:
    return SsvepClassTable(tuple(float(f) for f in meta["class_frequencies_hz"]))


def checkpoint_config_hash(path) -> str | None:
    _, meta = load_checkpoint(Path(path))
    return meta.get("config_hash")
