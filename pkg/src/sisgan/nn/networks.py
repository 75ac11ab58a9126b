"""Backbone (discriminator/classifier) and generator network construction.

Backbones stack conv blocks of {Conv1d, BatchNorm, PReLU, Dropout} and end
in a linear head; generators stack fractionally-strided convolutions with
BatchNorm + PReLU, finishing with a linear-output transposed convolution.
Initialization is a pure function of (spec, seed).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidSpec, LabelOutOfRange, ShapeMismatch
from ..rand import stream
from .layers import (
    BatchNorm1d,
    Conv1d,
    ConvTranspose1d,
    Dropout,
    Flatten,
    Grads,
    Linear,
    PReLU,
    merge_grads,
)
from .params import ParameterStore


class Head(str, enum.Enum):
    DISCRIMINATOR = "discriminator"
    AUX_DISCRIMINATOR = "aux_discriminator"
    SSVEP_CLASSIFIER = "ssvep_classifier"
    SUBJECT_CLASSIFIER = "subject_classifier"


_CLASSIFIER_HEADS = (Head.AUX_DISCRIMINATOR, Head.SSVEP_CLASSIFIER, Head.SUBJECT_CLASSIFIER)


@dataclass(frozen=True)
class BackboneSpec:
    """Architecture of a discriminator or classifier network."""

    in_channels: int
    time_steps: int
    head: Head
    n_classes: int = 0
    widths: tuple[int, ...] = (16, 32, 64, 128)
    kernel_size: int = 11
    strides: tuple[int, ...] = (2, 2, 2, 2)
    dropout_p: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "head", Head(self.head))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "strides", tuple(int(s) for s in self.strides))
        if self.in_channels < 1 or self.time_steps < 2:
            raise InvalidSpec("need in_channels >= 1 and time_steps >= 2")
        if not self.widths or any(w < 1 for w in self.widths):
            raise InvalidSpec(f"widths must be positive, got {self.widths}")
        if len(self.strides) != len(self.widths) or any(s < 1 for s in self.strides):
            raise InvalidSpec("strides must be positive and match widths in length")
        if self.kernel_size < 1:
            raise InvalidSpec(f"kernel_size must be >= 1, got {self.kernel_size}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidSpec(f"dropout_p must be in [0,1), got {self.dropout_p}")
        if self.head in _CLASSIFIER_HEADS and self.n_classes < 2:
            raise InvalidSpec(f"head {self.head.value} needs n_classes >= 2")
        if self.out_time_steps < 1:
            raise InvalidSpec(
                f"temporal length collapses below 1 ({self.time_steps} steps, "
                f"strides {self.strides})"
            )

    @property
    def out_time_steps(self) -> int:
        pad = (self.kernel_size - 1) // 2
        t = self.time_steps
        for s in self.strides:
            t = (t + 2 * pad - self.kernel_size) // s + 1
            if t < 1:
                return t
        return t

    @property
    def feature_dim(self) -> int:
        return self.widths[-1] * self.out_time_steps


class Backbone:
    """Conv-block feature extractor with a task head; see BackboneSpec."""

    def __init__(self, spec: BackboneSpec, store: ParameterStore, rng: np.random.Generator) -> None:
        self.spec = spec
        self.store = store
        self.blocks: list[tuple[Conv1d, BatchNorm1d, PReLU, Dropout]] = []
        in_ch = spec.in_channels
        for i, (width, stride) in enumerate(zip(spec.widths, spec.strides)):
            conv = Conv1d(store, f"block{i}.conv", in_ch, width, spec.kernel_size, stride, rng)
            bn = BatchNorm1d(store, f"block{i}.bn", width)
            act = PReLU(store, f"block{i}.prelu")
            drop = Dropout(spec.dropout_p)
            self.blocks.append((conv, bn, act, drop))
            in_ch = width
        self.flatten = Flatten()
        feat = spec.feature_dim
        if spec.head is Head.DISCRIMINATOR:
            self.adv_head = Linear(store, "head.adv", feat, 1, rng)
            self.cls_head = None
        elif spec.head is Head.AUX_DISCRIMINATOR:
            self.adv_head = Linear(store, "head.adv", feat, 1, rng)
            self.cls_head = Linear(store, "head.cls", feat, spec.n_classes, rng)
        else:
            self.adv_head = None
            self.cls_head = Linear(store, "head.cls", feat, spec.n_classes, rng)

    def _check_input(self, x: np.ndarray) -> None:
        expected = (self.spec.in_channels, self.spec.time_steps)
        if x.ndim != 3 or x.shape[1:] != expected:
            raise ShapeMismatch(f"expected batch of shape [*, {expected[0]}, {expected[1]}], got {x.shape}")

    def forward(self, x: np.ndarray, train: bool = False, rng: np.random.Generator | None = None):
        """Run the network; returns logits shaped by the head.

        discriminator -> [batch]; classifiers -> [batch, K];
        aux_discriminator -> ([batch], [batch, K]).
        """
        self._check_input(x)
        h = x
        for conv, bn, act, drop in self.blocks:
            h = conv.forward(h, train, rng)
            h = bn.forward(h, train, rng)
            h = act.forward(h, train, rng)
            h = drop.forward(h, train, rng)
        h = self.flatten.forward(h, train, rng)
        if self.spec.head is Head.DISCRIMINATOR:
            return self.adv_head.forward(h, train, rng)[:, 0]
        if self.spec.head is Head.AUX_DISCRIMINATOR:
            adv = self.adv_head.forward(h, train, rng)[:, 0]
            cls = self.cls_head.forward(h, train, rng)
            return adv, cls
        return self.cls_head.forward(h, train, rng)

    def backward(self, grad) -> tuple[Grads, np.ndarray]:
        """Backprop through the most recent forward.

        For aux_discriminator heads pass (grad_adv, grad_cls); either entry
        may be None to skip that head's contribution.
        """
        if self.spec.head is Head.AUX_DISCRIMINATOR:
            grad_adv, grad_cls = grad
            parts: list[Grads] = []
            d_feat = None
            if grad_adv is not None:
                g, d = self.adv_head.backward(grad_adv[:, None])
                parts.append(g)
                d_feat = d
            if grad_cls is not None:
                g, d = self.cls_head.backward(grad_cls)
                parts.append(g)
                d_feat = d if d_feat is None else d_feat + d
            if d_feat is None:
                raise ShapeMismatch("aux_discriminator backward needs at least one head gradient")
            grads = merge_grads(*parts)
        elif self.spec.head is Head.DISCRIMINATOR:
            grads, d_feat = self.adv_head.backward(grad[:, None])
        else:
            grads, d_feat = self.cls_head.backward(grad)
        _, d_h = self.flatten.backward(d_feat)
        for conv, bn, act, drop in reversed(self.blocks):
            g, d_h = drop.backward(d_h)
            grads = merge_grads(grads, g)
            g, d_h = act.backward(d_h)
            grads = merge_grads(grads, g)
            g, d_h = bn.backward(d_h)
            grads = merge_grads(grads, g)
            g, d_h = conv.backward(d_h)
            grads = merge_grads(grads, g)
        return grads, d_h


def _stride_schedule(time_steps: int, n_layers: int) -> tuple[int, ...]:
    """Factor time_steps into n_layers power-of-two strides (largest first)."""
    if time_steps < 1 or time_steps & (time_steps - 1):
        raise InvalidSpec(f"generator time_steps must be a power of two, got {time_steps}")
    exponent = time_steps.bit_length() - 1
    base, extra = divmod(exponent, n_layers)
    return tuple(2 ** (base + (1 if i < extra else 0)) for i in range(n_layers))


@dataclass(frozen=True)
class GeneratorSpec:
    """Architecture of the signal generator.

    The latent vector is reshaped into a coarse temporal seed of
    ``seed_time_steps`` steps (the class one-hot, when conditional, is
    broadcast along it as extra channels) and upsampled by
    len(widths) + 1 fractionally-strided convolutions whose strides
    multiply to time_steps / seed_time_steps exactly; the final layer has
    a linear output. A seed longer than 1 lets slow oscillations exist at
    the coarse scale instead of having to emerge from kernel patterns.
    """

    latent_dim: int = 128
    n_classes: int = 3
    conditional: bool = True
    out_channels: int = 8
    time_steps: int = 1024
    widths: tuple[int, ...] = (256, 128, 64, 32)
    seed_time_steps: int = 16
    kernel_scale: int = 2  # transpose kernel = kernel_scale * stride

    def __post_init__(self) -> None:
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.latent_dim < 1:
            raise InvalidSpec(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.conditional and self.n_classes < 2:
            raise InvalidSpec("conditional generator needs n_classes >= 2")
        if self.out_channels < 1:
            raise InvalidSpec(f"out_channels must be >= 1, got {self.out_channels}")
        if not self.widths or any(w < 1 for w in self.widths):
            raise InvalidSpec(f"widths must be positive, got {self.widths}")
        if self.seed_time_steps < 1 or self.latent_dim % self.seed_time_steps:
            raise InvalidSpec(
                f"seed_time_steps must divide latent_dim, got "
                f"{self.seed_time_steps} / {self.latent_dim}"
            )
        if self.kernel_scale < 2 or self.kernel_scale % 2:
            raise InvalidSpec(f"kernel_scale must be a positive even number, got {self.kernel_scale}")
        if self.time_steps % self.seed_time_steps:
            raise InvalidSpec("seed_time_steps must divide time_steps")
        _stride_schedule(self.time_steps // self.seed_time_steps, len(self.widths) + 1)

    @property
    def seed_channels(self) -> int:
        return self.latent_dim // self.seed_time_steps

    @property
    def input_width(self) -> int:
        return self.seed_channels + (self.n_classes if self.conditional else 0)

    @property
    def strides(self) -> tuple[int, ...]:
        return _stride_schedule(self.time_steps // self.seed_time_steps, len(self.widths) + 1)

    def kernel_for(self, stride: int) -> int:
        # stride 1 keeps length with a 3-wide kernel
        return 3 if stride == 1 else self.kernel_scale * stride


class Generator:
    """Latent-to-signal network; see GeneratorSpec."""

    def __init__(self, spec: GeneratorSpec, store: ParameterStore, rng: np.random.Generator) -> None:
        self.spec = spec
        self.store = store
        widths = spec.widths + (spec.out_channels,)
        strides = spec.strides
        self.layers: list[tuple[ConvTranspose1d, BatchNorm1d | None, PReLU | None]] = []
        in_ch = spec.input_width
        for i, (width, stride) in enumerate(zip(widths, strides)):
            convt = ConvTranspose1d(
                store, f"layer{i}.convt", in_ch, width, spec.kernel_for(stride), stride, rng)
            last = i == len(widths) - 1
            bn = None if last else BatchNorm1d(store, f"layer{i}.bn", width)
            act = None if last else PReLU(store, f"layer{i}.prelu")
            self.layers.append((convt, bn, act))
            in_ch = width

    def _input_batch(self, z: np.ndarray, labels: np.ndarray | None) -> np.ndarray:
        if z.ndim != 2 or z.shape[1] != self.spec.latent_dim:
            raise ShapeMismatch(f"expected latent batch [*, {self.spec.latent_dim}], got {z.shape}")
        seed = z.reshape(z.shape[0], self.spec.seed_channels, self.spec.seed_time_steps)
        if not self.spec.conditional:
            if labels is not None:
                raise ShapeMismatch("unconditional generator takes no labels")
            return seed
        if labels is None:
            raise ShapeMismatch("conditional generator requires labels")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (z.shape[0],):
            raise ShapeMismatch(f"labels shape {labels.shape} != ({z.shape[0]},)")
        if labels.min() < 0 or labels.max() >= self.spec.n_classes:
            raise LabelOutOfRange(f"labels must lie in [0, {self.spec.n_classes})")
        onehot = np.zeros((z.shape[0], self.spec.n_classes, self.spec.seed_time_steps),
                          dtype=z.dtype)
        onehot[np.arange(z.shape[0]), labels, :] = 1.0
        return np.concatenate([seed, onehot], axis=1)

    def forward(
        self,
        z: np.ndarray,
        labels: np.ndarray | None = None,
        train: bool = False,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        h = self._input_batch(z, labels)
        for convt, bn, act in self.layers:
            h = convt.forward(h, train, rng)
            if bn is not None:
                h = bn.forward(h, train, rng)
                h = act.forward(h, train, rng)
        return h

    def backward(self, grad_out: np.ndarray) -> tuple[Grads, np.ndarray]:
        grads: Grads = {}
        d_h = grad_out
        for convt, bn, act in reversed(self.layers):
            if bn is not None:
                g, d_h = act.backward(d_h)
                grads = merge_grads(grads, g)
                g, d_h = bn.backward(d_h)
                grads = merge_grads(grads, g)
            g, d_h = convt.backward(d_h)
            grads = merge_grads(grads, g)
        d_z = d_h[:, : self.spec.seed_channels, :].reshape(d_h.shape[0], self.spec.latent_dim)
        return grads, d_z


def build_backbone(spec: BackboneSpec, seed: int) -> tuple[Backbone, ParameterStore]:
    """Deterministically initialize a backbone network from (spec, seed)."""
    store = ParameterStore()
    net = Backbone(spec, store, stream(seed, 11))
    return net, store


def build_generator(spec: GeneratorSpec, seed: int) -> tuple[Generator, ParameterStore]:
    """Deterministically initialize a generator network from (spec, seed)."""
    store = ParameterStore()
    net = Generator(spec, store, stream(seed, 12))
    return net, store


def forward_backbone(network: Backbone, batch: np.ndarray,
                     train: bool = False, rng: np.random.Generator | None = None):
    """Evaluate a backbone on a batch of trials (eval mode by default)."""
    return network.forward(batch, train=train, rng=rng)


def sample_latent(n: int, latent_dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. standard-normal latent vectors from the given stream."""
    if n < 1:
        raise InvalidSpec(f"need n >= 1 latent draws, got {n}")
    return rng.standard_normal((n, latent_dim))
