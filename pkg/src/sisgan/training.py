"""Training procedures: the three GAN variants plus plain classifiers.

All routines are deterministic functions of (dataset, config): network
initialization, batch order, latent draws and dropout masks all come from
Philox substreams of the config seed. The subject-invariant variant is the
auxiliary-classifier loop plus one extra generator penalty, implemented as
a single core loop so the lambda_s = 0 ablation reproduces the plain
auxiliary variant step for step.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .data import (
    SYNTHETIC_SUBJECT,
    Dataset,
    EegTrial,
    Provenance,
    SsvepClassTable,
)
from .errors import (
    InvariantViolation,
    IoFailure,
    MissingClassCheckpoint,
    MissingLabels,
    RosterMismatch,
)
from .losses import (
    GanLossWeights,
    cross_entropy_with_grad,
    generator_adversarial_loss_with_grad,
    generator_total_loss,
    subject_invariance_with_grad,
    _sigmoid,
    _softplus,
)
from .nn import (
    AdamState,
    Backbone,
    BackboneSpec,
    Generator,
    GeneratorSpec,
    Head,
    OptimizerConfig,
    ParameterStore,
    adam_step,
    build_backbone,
    build_generator,
    sample_latent,
)
from .rand import stream

VARIANTS = ("dcgan", "acgan", "sisgan")

# substream tags within one training run
_TRAIN_STREAM = 13
_PROBE_STREAM = 14
_GENERATE_STREAM = 15

_PROBE_BATCH = 66  # divisible by 2 and 3 so probe batches stay class-balanced


@dataclass(frozen=True)
class GanTrainConfig:
    """Variant selector, loss weights and optimization hyperparameters."""

    variant: str
    epochs: int = 200
    batch_size: int = 32
    weights: GanLossWeights = GanLossWeights()
    optimizer: OptimizerConfig = OptimizerConfig()
    seed: int = 0
    latent_dim: int = 128
    generator_widths: tuple[int, ...] = (256, 128, 64, 32)
    discriminator_widths: tuple[int, ...] = (16, 32, 64, 128)
    kernel_size: int = 11
    dropout_p: float = 0.5
    compute_dtype: str = "float32"  # activation dtype; parameters stay float64

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise InvariantViolation(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.latent_dim < 1:
            raise InvariantViolation("epochs, batch_size and latent_dim must be >= 1")
        if self.compute_dtype not in ("float32", "float64"):
            raise InvariantViolation(f"compute_dtype must be float32/float64, got {self.compute_dtype!r}")


@dataclass(frozen=True)
class ClassifierConfig:
    epochs: int = 30
    batch_size: int = 32
    optimizer: OptimizerConfig = OptimizerConfig()
    seed: int = 0
    widths: tuple[int, ...] = (16, 32, 64, 128)
    kernel_size: int = 11
    dropout_p: float = 0.5
    compute_dtype: str = "float32"

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise InvariantViolation("epochs and batch_size must be >= 1")
        if self.compute_dtype not in ("float32", "float64"):
            raise InvariantViolation(f"compute_dtype must be float32/float64, got {self.compute_dtype!r}")


@dataclass
class TrainLog:
    """Per-step loss components, exportable as CSV."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    def append(self, *values) -> None:
        if len(values) != len(self.columns):
            raise InvariantViolation(f"log row has {len(values)} values, expected {len(self.columns)}")
        self.rows.append(tuple(values))

    def to_csv(self, path) -> None:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(self.columns)
                writer.writerows(self.rows)
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


@dataclass
class GanTrainResult:
    generator: Generator
    generator_store: ParameterStore
    discriminator: Backbone
    discriminator_store: ParameterStore
    log: TrainLog
    config: GanTrainConfig
    class_table: SsvepClassTable
    sample_rate_hz: float
    probe_trace: list[float] = field(default_factory=list)


@dataclass
class ClassifierTrainResult:
    network: Backbone
    store: ParameterStore
    log: TrainLog
    config: ClassifierConfig
    role: Head
    label_map: tuple[int, ...]  # roster order for subject heads, class ids otherwise
    validation_accuracy: list[float] = field(default_factory=list)


def zscore_batch(x: np.ndarray) -> np.ndarray:
    """Per-trial per-channel z-score with a variance floor.

    Tolerant counterpart of normalize_trial for network input paths, where
    a degenerate (near-constant) generated channel must not abort a run.
    """
    mean = x.mean(axis=-1, keepdims=True)
    std = x.std(axis=-1, keepdims=True)
    return (x - mean) / np.maximum(std, x.dtype.type(1e-6))


def training_matrix(dataset: Dataset, dtype: str = "float64") -> np.ndarray:
    """Stacked, z-scored trials ready for network consumption."""
    return zscore_batch(dataset.stacked_samples().astype(dtype))


def predict_classes(network: Backbone, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Eval-mode argmax predictions for a classifier backbone."""
    out = []
    for start in range(0, x.shape[0], batch_size):
        logits = network.forward(x[start : start + batch_size], train=False)
        out.append(np.argmax(logits, axis=1))
    return np.concatenate(out)


def _gan_batch_plan(n: int, batch_size: int) -> tuple[int, int]:
    bs = min(batch_size, n)
    return bs, max(1, n // bs)


def _discriminator_spec(dataset: Dataset, config: GanTrainConfig, conditional: bool) -> BackboneSpec:
    return BackboneSpec(
        in_channels=dataset.n_channels,
        time_steps=dataset.time_steps,
        head=Head.AUX_DISCRIMINATOR if conditional else Head.DISCRIMINATOR,
        n_classes=len(dataset.class_table) if conditional else 0,
        widths=config.discriminator_widths,
        kernel_size=config.kernel_size,
        strides=(2,) * len(config.discriminator_widths),
        dropout_p=config.dropout_p,
    )


def _generator_spec(dataset: Dataset, config: GanTrainConfig, conditional: bool) -> GeneratorSpec:
    return GeneratorSpec(
        latent_dim=config.latent_dim,
        n_classes=len(dataset.class_table),
        conditional=conditional,
        out_channels=dataset.n_channels,
        time_steps=dataset.time_steps,
        widths=config.generator_widths,
    )


def _probe_mean_max_softmax(
    generator: Generator, subject_net: Backbone, n_classes: int,
    latent_dim: int, rng: np.random.Generator, dtype: str,
) -> float:
    from .losses import softmax  # local import to keep module top minimal

    z = sample_latent(_PROBE_BATCH, latent_dim, rng).astype(dtype)
    labels = np.arange(_PROBE_BATCH) % n_classes if generator.spec.conditional else None
    fake = generator.forward(z, labels, train=False)
    logits = subject_net.forward(zscore_batch(fake), train=False)
    return float(softmax(logits).max(axis=1).mean())


def _run_gan_loop(
    dataset: Dataset,
    config: GanTrainConfig,
    conditional: bool,
    subject_net: Backbone | None,
) -> GanTrainResult:
    dtype = config.compute_dtype
    x_all = training_matrix(dataset, dtype)
    labels_all = dataset.labels() if conditional else None
    n = x_all.shape[0]
    n_classes = len(dataset.class_table)
    lam = config.weights
    use_subject = subject_net is not None and lam.lambda_s > 0.0

    def cast(g: np.ndarray) -> np.ndarray:
        return g.astype(dtype, copy=False)

    generator, gen_store = build_generator(_generator_spec(dataset, config, conditional), config.seed)
    discriminator, disc_store = build_backbone(
        _discriminator_spec(dataset, config, conditional), config.seed)
    gen_state, disc_state = AdamState(), AdamState()
    rng = stream(config.seed, _TRAIN_STREAM)

    log = TrainLog(columns=(
        "epoch", "step", "d_loss_adv", "d_loss_aux",
        "g_loss_adv", "g_loss_aux", "g_loss_subject", "g_loss_total",
    ))
    probe_trace: list[float] = []
    batch_size, steps = _gan_batch_plan(n, config.batch_size)

    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        for step in range(steps):
            idx = perm[step * batch_size : (step + 1) * batch_size]
            x_real = x_all[idx]

            # --- discriminator update (generator output treated as constant) ---
            z = sample_latent(batch_size, config.latent_dim, rng).astype(dtype)
            fake_labels = rng.integers(0, n_classes, batch_size) if conditional else None
            x_fake = generator.forward(z, fake_labels, train=True)

            d_aux_loss = 0.0
            if conditional:
                adv_f, cls_f = discriminator.forward(x_fake, train=True, rng=rng)
                adv_f = adv_f.astype(np.float64)
                l_aux_f, g_aux_f = cross_entropy_with_grad(cls_f, fake_labels)
                grads_fake, _ = discriminator.backward(
                    (cast(_sigmoid(adv_f) / batch_size), cast(lam.lambda_a * g_aux_f)))
                adv_r, cls_r = discriminator.forward(x_real, train=True, rng=rng)
                adv_r = adv_r.astype(np.float64)
                l_aux_r, g_aux_r = cross_entropy_with_grad(cls_r, labels_all[idx])
                grads_real, _ = discriminator.backward(
                    (cast((_sigmoid(adv_r) - 1.0) / batch_size), cast(lam.lambda_a * g_aux_r)))
                d_aux_loss = l_aux_r + l_aux_f
            else:
                adv_f = discriminator.forward(x_fake, train=True, rng=rng).astype(np.float64)
                grads_fake, _ = discriminator.backward(cast(_sigmoid(adv_f) / batch_size))
                adv_r = discriminator.forward(x_real, train=True, rng=rng).astype(np.float64)
                grads_real, _ = discriminator.backward(cast((_sigmoid(adv_r) - 1.0) / batch_size))
            d_adv_loss = float(_softplus(-adv_r).mean() + _softplus(adv_f).mean())
            d_grads = {name: grads_fake[name] + grads_real[name] for name in grads_fake}
            adam_step(disc_store, d_grads, disc_state, config.optimizer)

            # --- generator update ---
            z2 = sample_latent(batch_size, config.latent_dim, rng).astype(dtype)
            gen_labels = rng.integers(0, n_classes, batch_size) if conditional else None
            x_gen = generator.forward(z2, gen_labels, train=True)
            l_aux = 0.0
            if conditional:
                adv_g, cls_g = discriminator.forward(x_gen, train=True, rng=rng)
                l_adv, g_adv = generator_adversarial_loss_with_grad(adv_g)
                l_aux, g_aux = cross_entropy_with_grad(cls_g, gen_labels)
                _, dx = discriminator.backward((cast(g_adv), cast(lam.lambda_a * g_aux)))
            else:
                adv_g = discriminator.forward(x_gen, train=True, rng=rng)
                l_adv, g_adv = generator_adversarial_loss_with_grad(adv_g)
                _, dx = discriminator.backward(cast(g_adv))
            l_subject = 0.0
            if use_subject:
                s_logits = subject_net.forward(x_gen, train=False)
                l_subject, g_subject = subject_invariance_with_grad(s_logits)
                _, dx_subject = subject_net.backward(cast(lam.lambda_s * g_subject))
                dx = dx + dx_subject
            g_grads, _ = generator.backward(dx)
            adam_step(gen_store, g_grads, gen_state, config.optimizer)

            total = generator_total_loss(l_adv, l_aux if conditional else 0.0, l_subject, lam)
            log.append(epoch, step, d_adv_loss, d_aux_loss,
                       l_adv, l_aux, l_subject, total)

        if subject_net is not None:
            probe_trace.append(_probe_mean_max_softmax(
                generator, subject_net, n_classes, config.latent_dim,
                stream(config.seed, _PROBE_STREAM, epoch), dtype))

    return GanTrainResult(
        generator=generator,
        generator_store=gen_store,
        discriminator=discriminator,
        discriminator_store=disc_store,
        log=log,
        config=config,
        class_table=dataset.class_table,
        sample_rate_hz=dataset.sample_rate_hz,
        probe_trace=probe_trace,
    )


def train_dcgan(dataset: Dataset, config: GanTrainConfig) -> GanTrainResult:
    """Train an unconditional GAN on a single-class dataset.

    Covering all classes requires one run per class.
    """
    labels = dataset.labels()
    if len(set(labels.tolist())) != 1:
        raise InvariantViolation("dcgan training expects a dataset restricted to one class")
    return _run_gan_loop(dataset, config, conditional=False, subject_net=None)


def train_acgan(dataset: Dataset, config: GanTrainConfig) -> GanTrainResult:
    """Train the class-conditional GAN with the auxiliary classification head."""
    dataset.labels()  # raises MissingLabels on unlabeled data
    return _run_gan_loop(dataset, config, conditional=True, subject_net=None)


def train_sisgan(dataset: Dataset, frozen_subject: Backbone, config: GanTrainConfig) -> GanTrainResult:
    """Auxiliary-classifier training plus the subject-invariance penalty.

    The frozen subject classifier only routes gradients to the generator;
    its parameters are read-only for the whole run. With lambda_s = 0 the
    procedure reduces exactly to train_acgan under the same seed.
    """
    dataset.labels()
    if frozen_subject.spec.head is not Head.SUBJECT_CLASSIFIER:
        raise InvariantViolation("frozen network must have a subject_classifier head")
    if not frozen_subject.store.frozen:
        raise InvariantViolation("subject network must be frozen before sisgan training")
    if frozen_subject.spec.n_classes != len(dataset.subject_roster):
        raise RosterMismatch(
            f"subject network predicts {frozen_subject.spec.n_classes} subjects, "
            f"dataset roster has {len(dataset.subject_roster)}"
        )
    return _run_gan_loop(dataset, config, conditional=True, subject_net=frozen_subject)


def train_classifier(
    dataset: Dataset,
    role: Head,
    config: ClassifierConfig,
    validation: Dataset | None = None,
) -> ClassifierTrainResult:
    """Cross-entropy training of an SSVEP or subject classifier."""
    if role not in (Head.SSVEP_CLASSIFIER, Head.SUBJECT_CLASSIFIER):
        raise InvariantViolation(f"role must be a classifier head, got {role}")
    x_all = training_matrix(dataset, config.compute_dtype)
    if role is Head.SSVEP_CLASSIFIER:
        labels = dataset.labels()
        label_map = tuple(range(len(dataset.class_table)))
    else:
        label_map = tuple(sorted(dataset.subject_roster))
        index = {s: i for i, s in enumerate(label_map)}
        labels = np.array([index[t.subject] for t in dataset.trials], dtype=np.int64)
        if len(label_map) < 2:
            raise MissingLabels("subject classification needs at least two subjects")
    n_classes = len(label_map)

    spec = BackboneSpec(
        in_channels=dataset.n_channels,
        time_steps=dataset.time_steps,
        head=role,
        n_classes=n_classes,
        widths=config.widths,
        kernel_size=config.kernel_size,
        strides=(2,) * len(config.widths),
        dropout_p=config.dropout_p,
    )
    network, store = build_backbone(spec, config.seed)
    state = AdamState()
    rng = stream(config.seed, _TRAIN_STREAM)
    n = x_all.shape[0]
    batch_size, steps = _gan_batch_plan(n, config.batch_size)

    log = TrainLog(columns=("epoch", "step", "loss"))
    val_curve: list[float] = []
    val_x = val_labels = None
    if validation is not None:
        val_x = training_matrix(validation, config.compute_dtype)
        if role is Head.SSVEP_CLASSIFIER:
            val_labels = validation.labels()
        else:
            index = {s: i for i, s in enumerate(label_map)}
            val_labels = np.array([index[t.subject] for t in validation.trials], dtype=np.int64)

    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        for step in range(steps):
            idx = perm[step * batch_size : (step + 1) * batch_size]
            logits = network.forward(x_all[idx], train=True, rng=rng)
            loss, grad = cross_entropy_with_grad(logits, labels[idx])
            grads, _ = network.backward(grad.astype(config.compute_dtype, copy=False))
            adam_step(store, grads, state, config.optimizer)
            log.append(epoch, step, loss)
        if val_x is not None:
            pred = predict_classes(network, val_x)
            val_curve.append(float((pred == val_labels).mean()))

    return ClassifierTrainResult(
        network=network,
        store=store,
        log=log,
        config=config,
        role=role,
        label_map=label_map,
        validation_accuracy=val_curve,
    )


def generate_synthetic(
    generator: Generator | Mapping[int, Generator],
    n_per_class: int,
    seed: int,
    class_table: SsvepClassTable,
    sample_rate_hz: float,
    batch_size: int = 64,
    compute_dtype: str = "float32",
) -> Dataset:
    """Sample a balanced labeled dataset from trained generator(s).

    Pass a single conditional generator, or (for single-class generators)
    a mapping from class index to generator. Output trials carry Generated
    provenance and the reserved SYNTHETIC subject id.
    """
    n_classes = len(class_table)
    trials: list[EegTrial] = []
    for c in range(n_classes):
        if isinstance(generator, Mapping):
            if c not in generator:
                raise MissingClassCheckpoint(f"no generator for class {c}")
            gen = generator[c]
            labelled = gen.spec.conditional
        else:
            gen = generator
            if not gen.spec.conditional:
                raise MissingClassCheckpoint(
                    "single unconditional generator cannot cover all classes; "
                    "pass one generator per class"
                )
            labelled = True
        rng = stream(seed, _GENERATE_STREAM, c)
        remaining = n_per_class
        while remaining > 0:
            take = min(batch_size, remaining)
            z = sample_latent(take, gen.spec.latent_dim, rng).astype(compute_dtype)
            batch_labels = np.full(take, c, dtype=np.int64) if labelled else None
            samples = gen.forward(z, batch_labels, train=False)
            for row in samples:
                trials.append(EegTrial(
                    samples=row,
                    sample_rate_hz=sample_rate_hz,
                    subject=SYNTHETIC_SUBJECT,
                    class_label=c,
                    provenance=Provenance.GENERATED,
                ))
            remaining -= take
    meta = {"source": "generator", "seed": int(seed), "n_per_class": int(n_per_class)}
    return Dataset(trials=tuple(trials), class_table=class_table,
                   subject_roster=(SYNTHETIC_SUBJECT,), meta=meta)
