"""Zero-calibration evaluation protocols and validation reports.

Implements the three classification protocols (single-subject,
leave-one-subject-out, cross-task), subject-biometric cross-validation,
softmax probing of generated data under a frozen subject network, and
spectral validation of generated signals. Every protocol cell derives its
own seeds, audits subject leakage programmatically, and keeps the
training-set size identical across regimes.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .data import (
    SYNTHETIC_SUBJECT,
    Dataset,
    EegTrial,
    LeaveOneSubjectOut,
    PerSubjectStratified,
    mix_datasets,
    split_dataset,
)
from .errors import InvariantViolation, RosterOverlap, TooFewTrialsPerFold
from .losses import softmax
from .nn import Backbone, Head, freeze
from .rand import derive_seed, stream
from .spectral import (
    Window,
    compute_spectrum,
    dominant_frequency,
    peak_to_median_ratio,
    trial_spectrum,
)
from .training import (
    ClassifierConfig,
    GanTrainConfig,
    generate_synthetic,
    predict_classes,
    train_acgan,
    train_classifier,
    train_dcgan,
    train_sisgan,
    training_matrix,
    zscore_batch,
)

REGIME_KINDS = ("real_only", "augmented", "synthetic_only")


@dataclass(frozen=True)
class Regime:
    """Training-data regime: real, 50:50 augmented, or synthetic-only."""

    kind: str
    variant: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in REGIME_KINDS:
            raise InvariantViolation(f"regime kind must be one of {REGIME_KINDS}")
        if self.kind == "real_only" and self.variant is not None:
            raise InvariantViolation("real_only regime takes no generator variant")
        if self.kind != "real_only" and self.variant not in ("dcgan", "acgan", "sisgan"):
            raise InvariantViolation(f"regime {self.kind} needs a generator variant")

    @property
    def label(self) -> str:
        return self.kind if self.variant is None else f"{self.kind}_{self.variant}"


REAL_ONLY = Regime("real_only")


def augmented(variant: str) -> Regime:
    return Regime("augmented", variant)


def synthetic_only(variant: str) -> Regime:
    return Regime("synthetic_only", variant)


def parse_regime(text: str) -> Regime:
    """Parse config strings like ``real_only`` or ``synthetic_only:sisgan``."""
    if ":" in text:
        kind, variant = text.split(":", 1)
        return Regime(kind.strip(), variant.strip())
    return Regime(text.strip())


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything a protocol run needs besides the datasets."""

    n_seeds: int = 10
    base_seed: int = 0
    test_fraction: float = 0.2
    mix_ratio_real: float = 0.5
    gan: GanTrainConfig = GanTrainConfig(variant="acgan")
    classifier: ClassifierConfig = ClassifierConfig()
    subject_classifier: ClassifierConfig = ClassifierConfig()
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.n_seeds < 1 or self.jobs < 1:
            raise InvariantViolation("n_seeds and jobs must be >= 1")


@dataclass
class ProtocolCell:
    unit: str
    regime: str
    accuracies: list[float] = field(default_factory=list)
    confusion: np.ndarray | None = None  # [K, K] counts summed over seeds

    def add(self, accuracy: float, confusion: np.ndarray) -> None:
        self.accuracies.append(float(accuracy))
        self.confusion = confusion if self.confusion is None else self.confusion + confusion

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.accuracies))


@dataclass
class ProtocolReport:
    """Per-unit per-regime accuracies across seeds plus audit records."""

    protocol: str
    units: list[str]
    regimes: list[str]
    seeds: list[int]
    base_seed: int
    cells: dict[tuple[str, str], ProtocolCell]
    audits: dict[str, str] = field(default_factory=dict)
    config_hash: str = ""

    def cell(self, unit: str, regime: str) -> ProtocolCell:
        return self.cells[(unit, regime)]

    def regime_mean(self, regime: str, units: Sequence[str] | None = None) -> float:
        """Mean over units of the per-unit seed-mean accuracy."""
        picked = self.units if units is None else list(units)
        return float(np.mean([self.cells[(u, regime)].mean for u in picked]))

    def _validate(self) -> None:
        for (unit, regime), cell in self.cells.items():
            if len(cell.accuracies) != len(self.seeds):
                raise InvariantViolation(
                    f"cell ({unit}, {regime}) has {len(cell.accuracies)} runs, "
                    f"expected {len(self.seeds)}"
                )
            if any(not 0.0 <= a <= 1.0 for a in cell.accuracies):
                raise InvariantViolation(f"cell ({unit}, {regime}) accuracy outside [0,1]")

    def to_json_dict(self) -> dict:
        self._validate()
        return {
            "protocol": self.protocol,
            "units": self.units,
            "regimes": self.regimes,
            "seeds": self.seeds,
            "base_seed": self.base_seed,
            "config_hash": self.config_hash,
            "audits": dict(sorted(self.audits.items())),
            "cells": [
                {
                    "unit": unit,
                    "regime": regime,
                    "accuracies": cell.accuracies,
                    "mean": cell.mean,
                    "std": cell.std,
                    "confusion": None if cell.confusion is None
                    else cell.confusion.astype(int).tolist(),
                }
                for (unit, regime), cell in sorted(self.cells.items())
            ],
        }

    def write_json(self, path) -> None:
        _write_text(path, json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    def to_csv_rows(self) -> list[list[str]]:
        """Flat table: one row per unit, one column per regime, final mean row."""
        self._validate()
        subject_units = [u for u in self.units if u != "overall"]
        header = ["unit"] + [f"{r}_mean" for r in self.regimes] + [f"{r}_std" for r in self.regimes]
        rows = [header]
        for unit in self.units:
            cells = [self.cells[(unit, r)] for r in self.regimes]
            rows.append([unit] + [f"{c.mean:.6f}" for c in cells] + [f"{c.std:.6f}" for c in cells])
        mean_cells = [
            [self.cells[(u, r)].mean for u in subject_units] for r in self.regimes
        ]
        rows.append(
            ["mean"]
            + [f"{np.mean(vals):.6f}" for vals in mean_cells]
            + [f"{np.std(vals):.6f}" for vals in mean_cells]
        )
        return rows

    def write_csv(self, path) -> None:
        _write_text(path, "\n".join(",".join(row) for row in self.to_csv_rows()) + "\n")


def _write_text(path, text: str) -> None:
    from .storage import _atomic_write

    _atomic_write(Path(path), text.encode("utf-8"))


def _accuracy_and_confusion(
    network: Backbone, test: Dataset, n_classes: int
) -> tuple[float, np.ndarray]:
    x = training_matrix(test, "float32")
    truth = test.labels()
    pred = predict_classes(network, x)
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    return float((pred == truth).mean()), confusion


def check_no_subject_leakage(test_subjects: set[int], *training_sets: Dataset) -> None:
    """Raise if any held-out subject contributes to any training pool."""
    for ds in training_sets:
        seen = {int(s) for s in ds.subjects()} - {SYNTHETIC_SUBJECT}
        overlap = seen & test_subjects
        if overlap:
            raise InvariantViolation(f"subject leakage: {sorted(overlap)} found in training data")


def _needed_variants(regimes: Sequence[Regime]) -> list[str]:
    seen: list[str] = []
    for r in regimes:
        if r.variant is not None and r.variant not in seen:
            seen.append(r.variant)
    return seen


def _train_variant_generator(
    variant: str,
    train_pool: Dataset,
    cfg: ProtocolConfig,
    seed: int,
    frozen_subject: Backbone | None,
):
    """Train one generator variant; returns something generate_synthetic accepts."""
    gan_cfg = replace(cfg.gan, variant=variant, seed=seed)
    if variant == "acgan":
        return train_acgan(train_pool, gan_cfg).generator
    if variant == "sisgan":
        if frozen_subject is None:
            raise InvariantViolation("sisgan regime requires a frozen subject classifier")
        return train_sisgan(train_pool, frozen_subject, gan_cfg).generator
    # dcgan: one single-class run per class
    labels = train_pool.labels()
    per_class = {}
    for c in range(len(train_pool.class_table)):
        idx = np.flatnonzero(labels == c)
        class_ds = Dataset(
            trials=tuple(train_pool.trials[i] for i in idx),
            class_table=train_pool.class_table,
            subject_roster=train_pool.subject_roster,
            meta=dict(train_pool.meta),
        )
        per_class[c] = train_dcgan(class_ds, replace(gan_cfg, seed=derive_seed(seed, c))).generator
    return per_class


def _max_class_count(dataset: Dataset) -> int:
    labels = dataset.labels()
    return int(max(np.bincount(labels, minlength=len(dataset.class_table))))


def _regime_training_set(
    regime: Regime,
    train_pool: Dataset,
    synthetic_pools: dict[str, Dataset],
    cfg: ProtocolConfig,
    seed: int,
) -> Dataset:
    if regime.kind == "real_only":
        return train_pool
    ratio = cfg.mix_ratio_real if regime.kind == "augmented" else 0.0
    return mix_datasets(train_pool, synthetic_pools[regime.variant], ratio, seed)


def _run_regime_cell(
    regimes: Sequence[Regime],
    train_pool: Dataset,
    test_set: Dataset,
    cfg: ProtocolConfig,
    cell_seed: int,
    needs_subject_net: bool,
) -> dict[str, tuple[float, np.ndarray]]:
    """Train every requested regime on one (unit, seed) cell and score it."""
    frozen_subject = None
    training_sets_for_audit: list[Dataset] = [train_pool]
    if needs_subject_net:
        sub_res = train_classifier(
            train_pool, Head.SUBJECT_CLASSIFIER,
            replace(cfg.subject_classifier, seed=derive_seed(cell_seed, 1)))
        frozen_subject = sub_res.network
        freeze(sub_res.store)

    synthetic_pools: dict[str, Dataset] = {}
    n_per_class = _max_class_count(train_pool)
    for vi, variant in enumerate(_needed_variants(regimes)):
        generator = _train_variant_generator(
            variant, train_pool, cfg, derive_seed(cell_seed, 2, vi), frozen_subject)
        synthetic_pools[variant] = generate_synthetic(
            generator, n_per_class, derive_seed(cell_seed, 3, vi),
            train_pool.class_table, train_pool.sample_rate_hz)

    test_subjects = {int(s) for s in test_set.subjects()}
    results: dict[str, tuple[float, np.ndarray]] = {}
    sizes = set()
    for ri, regime in enumerate(regimes):
        train_ds = _regime_training_set(
            regime, train_pool, synthetic_pools, cfg, derive_seed(cell_seed, 4, ri))
        sizes.add(len(train_ds))
        training_sets_for_audit.append(train_ds)
        clf = train_classifier(
            train_ds, Head.SSVEP_CLASSIFIER,
            replace(cfg.classifier, seed=derive_seed(cell_seed, 5, ri)))
        results[regime.label] = _accuracy_and_confusion(
            clf.network, test_set, len(train_pool.class_table))
    if len(sizes) != 1:
        raise InvariantViolation(f"regime training sizes differ: {sorted(sizes)}")
    if not test_subjects <= {SYNTHETIC_SUBJECT} and not _shares_subjects(train_pool, test_set):
        check_no_subject_leakage(test_subjects, *training_sets_for_audit)
    return results


def _shares_subjects(train_pool: Dataset, test_set: Dataset) -> bool:
    # single-subject protocol legitimately trains and tests on one subject
    return bool({int(s) for s in train_pool.subjects()}
                & {int(s) for s in test_set.subjects()})


def _map_cells(tasks: list, runner: Callable, jobs: int) -> list:
    if jobs <= 1:
        return [runner(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(runner, tasks))


def _assemble_report(
    protocol: str,
    units: list[str],
    regimes: Sequence[Regime],
    cfg: ProtocolConfig,
    per_cell: dict[tuple[str, int], dict[str, tuple[float, np.ndarray]]],
    audits: dict[str, str],
    config_hash: str,
) -> ProtocolReport:
    labels = [r.label for r in regimes]
    cells = {(u, lab): ProtocolCell(unit=u, regime=lab) for u in units for lab in labels}
    for (unit, _seed_idx) in sorted(per_cell):
        for lab in labels:
            acc, conf = per_cell[(unit, _seed_idx)][lab]
            cells[(unit, lab)].add(acc, conf)
    return ProtocolReport(
        protocol=protocol,
        units=units,
        regimes=labels,
        seeds=list(range(cfg.n_seeds)),
        base_seed=cfg.base_seed,
        cells=cells,
        audits=audits,
        config_hash=config_hash,
    )


def run_single_subject_protocol(
    offline: Dataset,
    regimes: Sequence[Regime],
    cfg: ProtocolConfig,
    config_hash: str = "",
) -> ProtocolReport:
    """Train and test within each subject (80/20 stratified split).

    Generators are trained per subject on that subject's training split, so
    augmented regimes only ever see the subject under test.
    """
    regimes = list(regimes)
    units = [str(s) for s in offline.subject_roster]
    tasks = [(ui, si) for ui in range(len(units)) for si in range(cfg.n_seeds)]

    def runner(task):
        ui, si = task
        subject = offline.subject_roster[ui]
        own = [t for t in offline.trials if t.subject == subject]
        subject_ds = Dataset(trials=tuple(own), class_table=offline.class_table,
                             subject_roster=(subject,), meta=dict(offline.meta))
        cell_seed = derive_seed(cfg.base_seed, 10, ui, si)
        train_pool, test_set = split_dataset(
            subject_ds, PerSubjectStratified(cfg.test_fraction), cell_seed)
        return _run_regime_cell(regimes, train_pool, test_set, cfg, cell_seed,
                                needs_subject_net=False)

    outcomes = _map_cells(tasks, runner, cfg.jobs)
    per_cell = {(units[ui], si): out for (ui, si), out in zip(tasks, outcomes)}
    audits = {
        "sample_count_parity": "pass",
        "split": f"per-subject stratified, test fraction {cfg.test_fraction}",
    }
    return _assemble_report("single_subject", units, regimes, cfg, per_cell, audits, config_hash)


def run_leave_one_out_protocol(
    offline: Dataset,
    regimes: Sequence[Regime],
    cfg: ProtocolConfig,
    config_hash: str = "",
) -> ProtocolReport:
    """Hold out each subject in turn from every training stage.

    The subject classifier (for subject-invariant regimes), the generators
    and the final SSVEP classifiers are all trained without the held-out
    subject; scoring uses only that subject's trials.
    """
    if len(offline.subject_roster) < 2:
        raise InvariantViolation("leave-one-out needs at least two subjects")
    regimes = list(regimes)
    needs_subject_net = any(r.variant == "sisgan" for r in regimes)
    units = [str(s) for s in offline.subject_roster]
    tasks = [(ui, si) for ui in range(len(units)) for si in range(cfg.n_seeds)]

    def runner(task):
        ui, si = task
        held_out = offline.subject_roster[ui]
        cell_seed = derive_seed(cfg.base_seed, 20, ui, si)
        train_pool, test_set = split_dataset(offline, LeaveOneSubjectOut(held_out), cell_seed)
        return _run_regime_cell(regimes, train_pool, test_set, cfg, cell_seed, needs_subject_net)

    outcomes = _map_cells(tasks, runner, cfg.jobs)
    per_cell = {(units[ui], si): out for (ui, si), out in zip(tasks, outcomes)}
    audits = {
        "subject_leakage": "pass: held-out subject absent from every training pool",
        "sample_count_parity": "pass",
    }
    return _assemble_report("leave_one_out", units, regimes, cfg, per_cell, audits, config_hash)


def run_cross_task_protocol(
    offline: Dataset,
    online: Dataset,
    regimes: Sequence[Regime],
    cfg: ProtocolConfig,
    config_hash: str = "",
) -> ProtocolReport:
    """Train everything on the offline dataset, test on online subjects.

    Rosters must be disjoint; per-seed artifacts (subject net, generators,
    classifiers) are shared across the online subjects being scored.
    """
    overlap = set(offline.subject_roster) & set(online.subject_roster)
    if overlap:
        raise RosterOverlap(f"offline and online rosters share subjects {sorted(overlap)}")
    if offline.class_table != online.class_table:
        raise InvariantViolation("offline and online datasets need one class table")
    regimes = list(regimes)
    needs_subject_net = any(r.variant == "sisgan" for r in regimes)
    subject_units = [str(s) for s in online.subject_roster]
    units = subject_units + ["overall"]

    # Artifacts are shared across online subjects, so the cell is one seed:
    # train once per seed, then score per subject and pooled.
    per_cell: dict[tuple[str, int], dict[str, tuple[float, np.ndarray]]] = {}
    tasks = list(range(cfg.n_seeds))

    def full_runner(si: int):
        cell_seed = derive_seed(cfg.base_seed, 30, si)
        frozen_subject = None
        if needs_subject_net:
            sub_res = train_classifier(
                offline, Head.SUBJECT_CLASSIFIER,
                replace(cfg.subject_classifier, seed=derive_seed(cell_seed, 1)))
            frozen_subject = sub_res.network
            freeze(sub_res.store)
        synthetic_pools: dict[str, Dataset] = {}
        n_per_class = _max_class_count(offline)
        for vi, variant in enumerate(_needed_variants(regimes)):
            generator = _train_variant_generator(
                variant, offline, cfg, derive_seed(cell_seed, 2, vi), frozen_subject)
            synthetic_pools[variant] = generate_synthetic(
                generator, n_per_class, derive_seed(cell_seed, 3, vi),
                offline.class_table, offline.sample_rate_hz)
        test_subjects = {int(s) for s in online.subjects()}
        out: dict[str, dict[str, tuple[float, np.ndarray]]] = {u: {} for u in units}
        sizes = set()
        for ri, regime in enumerate(regimes):
            train_ds = _regime_training_set(
                regime, offline, synthetic_pools, cfg, derive_seed(cell_seed, 4, ri))
            sizes.add(len(train_ds))
            check_no_subject_leakage(test_subjects, train_ds)
            clf = train_classifier(
                train_ds, Head.SSVEP_CLASSIFIER,
                replace(cfg.classifier, seed=derive_seed(cell_seed, 5, ri)))
            for subject in online.subject_roster:
                subject_trials = tuple(t for t in online.trials if t.subject == subject)
                subject_ds = Dataset(trials=subject_trials, class_table=online.class_table,
                                     subject_roster=(subject,), meta={})
                out[str(subject)][regime.label] = _accuracy_and_confusion(
                    clf.network, subject_ds, len(online.class_table))
            out["overall"][regime.label] = _accuracy_and_confusion(
                clf.network, online, len(online.class_table))
        if len(sizes) != 1:
            raise InvariantViolation(f"regime training sizes differ: {sorted(sizes)}")
        return out

    outcomes = _map_cells(tasks, full_runner, cfg.jobs)
    for si, out in zip(tasks, outcomes):
        for unit in units:
            per_cell[(unit, si)] = out[unit]
    audits = {
        "roster_disjointness": "pass: offline and online rosters share no subject",
        "subject_leakage": "pass: online subjects absent from every training pool",
        "sample_count_parity": "pass",
    }
    return _assemble_report("cross_task", units, regimes, cfg, per_cell, audits, config_hash)


# --- subject-biometric evaluation ---

@dataclass
class BiometricReport:
    fold_accuracies: list[float]
    mean: float
    std: float
    confusion: np.ndarray  # row-normalized [N_sub, N_sub]
    label_map: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "fold_accuracies": self.fold_accuracies,
            "mean": self.mean,
            "std": self.std,
            "confusion_row_normalized": [[float(v) for v in row] for row in self.confusion],
            "subjects": list(self.label_map),
        }


def subject_biometric_eval(
    dataset: Dataset,
    n_folds: int = 10,
    config: ClassifierConfig | None = None,
    seed: int = 0,
) -> BiometricReport:
    """K-fold cross-validated subject classification (folds stratified by
    subject and class)."""
    if len(dataset.subject_roster) < 2:
        raise InvariantViolation("subject-biometric evaluation needs >= 2 subjects")
    cfg = config if config is not None else ClassifierConfig()
    labels = dataset.labels()
    label_map = tuple(sorted(dataset.subject_roster))
    subject_index = {s: i for i, s in enumerate(label_map)}
    n_sub = len(label_map)

    cells: dict[tuple[int, int], list[int]] = {}
    for i, t in enumerate(dataset.trials):
        cells.setdefault((t.subject, labels[i]), []).append(i)
    fold_of = np.empty(len(dataset.trials), dtype=np.int64)
    for key in sorted(cells):
        members = cells[key]
        if len(members) < n_folds:
            raise TooFewTrialsPerFold(
                f"cell subject={key[0]} class={key[1]} has {len(members)} trials "
                f"for {n_folds} folds"
            )
        order = stream(seed, 40, key[0], key[1]).permutation(len(members))
        for pos, j in enumerate(order):
            fold_of[members[j]] = pos % n_folds

    accuracies: list[float] = []
    confusion = np.zeros((n_sub, n_sub), dtype=np.int64)
    truth_all = np.array([subject_index[t.subject] for t in dataset.trials])
    for fold in range(n_folds):
        train_idx = np.flatnonzero(fold_of != fold)
        test_idx = np.flatnonzero(fold_of == fold)
        train_ds = Dataset(trials=tuple(dataset.trials[i] for i in train_idx),
                           class_table=dataset.class_table,
                           subject_roster=dataset.subject_roster, meta={})
        result = train_classifier(train_ds, Head.SUBJECT_CLASSIFIER,
                                  replace(cfg, seed=derive_seed(seed, 41, fold)))
        x_test = zscore_batch(dataset.stacked_samples()[test_idx].astype("float32"))
        pred = predict_classes(result.network, x_test)
        truth = truth_all[test_idx]
        accuracies.append(float((pred == truth).mean()))
        np.add.at(confusion, (truth, pred), 1)

    row_sums = confusion.sum(axis=1, keepdims=True)
    normalized = confusion / np.maximum(row_sums, 1)
    return BiometricReport(
        fold_accuracies=accuracies,
        mean=float(np.mean(accuracies)),
        std=float(np.std(accuracies)),
        confusion=normalized,
        label_map=label_map,
    )


# --- softmax probing ---

@dataclass
class ProbeReport:
    per_subject_mean_softmax: tuple[float, ...]
    mean_max_softmax: float
    n_trials: int

    def to_json_dict(self) -> dict:
        return {
            "per_subject_mean_softmax": list(self.per_subject_mean_softmax),
            "mean_max_softmax": self.mean_max_softmax,
            "n_trials": self.n_trials,
        }


def probe_subject_softmax(generated: Dataset, subject_net: Backbone) -> ProbeReport:
    """Mean softmax per subject index, plus the mean max-softmax scalar,
    of generated trials under a (frozen) subject classifier."""
    if subject_net.spec.head is not Head.SUBJECT_CLASSIFIER:
        raise InvariantViolation("probe needs a subject_classifier network")
    if subject_net.spec.n_classes < 2:
        raise InvariantViolation("probe needs a roster of >= 2 subjects")
    x = training_matrix(generated, "float32")
    probs = []
    for start in range(0, x.shape[0], 256):
        logits = subject_net.forward(x[start : start + 256], train=False)
        probs.append(softmax(logits))
    p = np.concatenate(probs)
    return ProbeReport(
        per_subject_mean_softmax=tuple(float(v) for v in p.mean(axis=0)),
        mean_max_softmax=float(p.max(axis=1).mean()),
        n_trials=int(p.shape[0]),
    )


def write_probe_csv(report: ProbeReport, path) -> None:
    lines = ["subject_index,mean_softmax"]
    for i, v in enumerate(report.per_subject_mean_softmax):
        lines.append(f"{i},{v!r}")
    lines.append(f"mean_max_softmax,{report.mean_max_softmax!r}")
    _write_text(path, "\n".join(lines) + "\n")


# --- spectral validation ---

@dataclass
class FftClassRow:
    class_label: int
    stimulus_hz: float
    real_peak_hz: float
    generated_peak_hz: float
    real_peak_to_median: float
    generated_peak_to_median: float
    generated_hit_fraction: float  # per-trial peaks within +-0.5 Hz of the stimulus


@dataclass
class FftValidationReport:
    band_hz: tuple[float, float]
    rows: list[FftClassRow]
    spectra: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]  # class -> (f, real, gen)

    def row(self, class_label: int) -> FftClassRow:
        return next(r for r in self.rows if r.class_label == class_label)

    def write_csv(self, path) -> None:
        """Long-format averaged spectra, ready for plotting."""
        lines = ["class,freq_hz,real_magnitude,generated_magnitude"]
        for c in sorted(self.spectra):
            freqs, real_mag, gen_mag = self.spectra[c]
            for f, rm, gm in zip(freqs, real_mag, gen_mag):
                lines.append(f"{c},{f!r},{rm!r},{gm!r}")
        _write_text(path, "\n".join(lines) + "\n")

    def write_peaks_csv(self, path) -> None:
        lines = ["class,stimulus_hz,real_peak_hz,generated_peak_hz,"
                 "real_peak_to_median,generated_peak_to_median,generated_hit_fraction"]
        for r in self.rows:
            lines.append(
                f"{r.class_label},{r.stimulus_hz!r},{r.real_peak_hz!r},"
                f"{r.generated_peak_hz!r},{r.real_peak_to_median!r},"
                f"{r.generated_peak_to_median!r},{r.generated_hit_fraction!r}"
            )
        _write_text(path, "\n".join(lines) + "\n")


def _zscored_class_trials(dataset: Dataset, class_label: int) -> list[EegTrial]:
    idx = [i for i, t in enumerate(dataset.trials) if t.class_label == class_label]
    if not idx:
        raise InvariantViolation(f"dataset has no trials of class {class_label}")
    stacked = zscore_batch(np.stack([dataset.trials[i].samples for i in idx]))
    return [
        EegTrial(samples=stacked[j], sample_rate_hz=dataset.sample_rate_hz,
                 subject=dataset.trials[i].subject, class_label=class_label,
                 provenance=dataset.trials[i].provenance)
        for j, i in enumerate(idx)
    ]


def hit_fraction(dataset: Dataset, class_label: int, band_hz: tuple[float, float],
                 tolerance_hz: float = 0.5) -> float:
    """Fraction of trials of one class whose spectral peak lies within
    ``tolerance_hz`` of the class stimulus frequency."""
    target = dataset.class_table.frequency_of(class_label)
    trials = [t for t in dataset.trials if t.class_label == class_label]
    if not trials:
        raise InvariantViolation(f"dataset has no trials of class {class_label}")
    hits = sum(
        abs(dominant_frequency(trial_spectrum(t), band_hz) - target) <= tolerance_hz
        for t in trials
    )
    return hits / len(trials)


def fft_validation_report(
    real: Dataset,
    generated: Dataset,
    band_hz: tuple[float, float] | None = None,
    window: Window = Window.HANN,
) -> FftValidationReport:
    """Compare averaged real and generated spectra class by class.

    Reports the detected peak frequency and the peak-to-median magnitude
    ratio within the analysis band (default 5 Hz to 0.8 x Nyquist), plus
    the per-trial peak hit rate of the generated data.
    """
    if real.class_table != generated.class_table:
        raise InvariantViolation("datasets must share one class table")
    if (real.n_channels, real.time_steps) != (generated.n_channels, generated.time_steps):
        raise InvariantViolation("datasets must share trial geometry")
    if band_hz is None:
        band_hz = (5.0, 0.8 * real.sample_rate_hz / 2.0)
    rows = []
    spectra = {}
    for c in range(len(real.class_table)):
        real_spec = compute_spectrum(_zscored_class_trials(real, c), window)
        gen_spec = compute_spectrum(_zscored_class_trials(generated, c), window)
        rows.append(FftClassRow(
            class_label=c,
            stimulus_hz=real.class_table.frequency_of(c),
            real_peak_hz=dominant_frequency(real_spec, band_hz),
            generated_peak_hz=dominant_frequency(gen_spec, band_hz),
            real_peak_to_median=peak_to_median_ratio(real_spec, band_hz),
            generated_peak_to_median=peak_to_median_ratio(gen_spec, band_hz),
            generated_hit_fraction=hit_fraction(generated, c, band_hz),
        ))
        spectra[c] = (real_spec.freqs_hz, real_spec.magnitude, gen_spec.magnitude)
    return FftValidationReport(band_hz=band_hz, rows=rows, spectra=spectra)
