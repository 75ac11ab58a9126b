"""From-scratch neural-network stack: layers, networks, parameters, Adam."""

from .networks import (
    Backbone,
    BackboneSpec,
    Generator,
    GeneratorSpec,
    Head,
    build_backbone,
    build_generator,
    forward_backbone,
    sample_latent,
)
from .optim import AdamState, OptimizerConfig, adam_step
from .params import ParameterStore, freeze, restore_parameters

__all__ = [
    "AdamState",
    "Backbone",
    "BackboneSpec",
    "Generator",
    "GeneratorSpec",
    "Head",
    "OptimizerConfig",
    "ParameterStore",
    "adam_step",
    "build_backbone",
    "build_generator",
    "forward_backbone",
    "freeze",
    "restore_parameters",
    "sample_latent",
]
