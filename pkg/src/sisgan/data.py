"""Core domain types for SSVEP trials plus splitting/mixing primitives.

A trial is a `[channels x time]` float64 matrix tagged with subject,
stimulus class and provenance. Datasets are immutable homogeneous
collections of trials; all operations here are pure functions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyCell,
    InsufficientSynthetic,
    InvariantViolation,
    MissingLabels,
    ShapeMismatch,
    UnknownSubject,
    ZeroVarianceChannel,
)
from .rand import stream

SubjectId = int

#: Subject id reserved for generator output (no physical subject).
SYNTHETIC_SUBJECT: SubjectId = 0xFFFF_FFFE

#: Class sentinel used on disk for unlabeled trials.
UNLABELED: int = 0xFFFF_FFFF


class Provenance(enum.Enum):
    ORACLE_REAL = 0
    GENERATED = 1


DEFAULT_STIMULUS_FREQUENCIES = (10.0, 12.0, 15.0)


@dataclass(frozen=True)
class SsvepClassTable:
    """Ordered stimulus frequencies; class index = position in the tuple."""

    frequencies_hz: tuple[float, ...] = DEFAULT_STIMULUS_FREQUENCIES

    def __post_init__(self) -> None:
        freqs = tuple(float(f) for f in self.frequencies_hz)
        object.__setattr__(self, "frequencies_hz", freqs)
        if not freqs:
            raise InvariantViolation("class table needs at least one frequency")
        if any(f <= 0.0 or not math.isfinite(f) for f in freqs):
            raise InvariantViolation("stimulus frequencies must be positive and finite")
        if len(set(freqs)) != len(freqs):
            raise InvariantViolation("stimulus frequencies must be pairwise distinct")

    def __len__(self) -> int:
        return len(self.frequencies_hz)

    def frequency_of(self, class_label: int) -> float:
        return self.frequencies_hz[class_label]

    def nearest_class(self, frequency_hz: float) -> int:
        """Class whose stimulus frequency is closest to ``frequency_hz``."""
        diffs = [abs(f - frequency_hz) for f in self.frequencies_hz]
        return int(np.argmin(diffs))


def _as_trial_matrix(samples: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(samples, dtype=np.float64)
    if arr.ndim != 2:
        raise InvariantViolation(f"samples must be 2D [channels x time], got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 2:
        raise InvariantViolation(f"need >=1 channel and >=2 time steps, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvariantViolation("samples contain non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EegTrial:
    """One multichannel signal window with subject and class labels."""

    samples: np.ndarray  # [channels x time], float64, read-only
    sample_rate_hz: float
    subject: SubjectId
    class_label: int | None = None
    provenance: Provenance = Provenance.ORACLE_REAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", _as_trial_matrix(self.samples))
        if not (self.sample_rate_hz > 0.0 and math.isfinite(self.sample_rate_hz)):
            raise InvariantViolation(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.subject < 0:
            raise InvariantViolation(f"subject id must be non-negative, got {self.subject}")
        if self.class_label is not None and self.class_label < 0:
            raise InvariantViolation(f"class label must be non-negative, got {self.class_label}")

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def time_steps(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.time_steps / self.sample_rate_hz


@dataclass(frozen=True)
class Dataset:
    """Homogeneous trial collection with roster and provenance metadata."""

    trials: tuple[EegTrial, ...]
    class_table: SsvepClassTable
    subject_roster: tuple[SubjectId, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "trials", tuple(self.trials))
        object.__setattr__(self, "subject_roster", tuple(int(s) for s in self.subject_roster))
        if len(set(self.subject_roster)) != len(self.subject_roster):
            raise InvariantViolation("subject roster contains duplicates")
        roster = set(self.subject_roster)
        n_classes = len(self.class_table)
        first = self.trials[0] if self.trials else None
        for i, t in enumerate(self.trials):
            if first is not None and (
                t.n_channels != first.n_channels
                or t.time_steps != first.time_steps
                or t.sample_rate_hz != first.sample_rate_hz
            ):
                raise InvariantViolation(f"trial {i} shape/rate differs from trial 0")
            if t.subject not in roster:
                raise InvariantViolation(f"trial {i} subject {t.subject} not in roster")
            if t.class_label is not None and t.class_label >= n_classes:
                raise InvariantViolation(
                    f"trial {i} class {t.class_label} >= n_classes {n_classes}"
                )
        if first is not None:
            nyquist = first.sample_rate_hz / 2.0
            for f in self.class_table.frequencies_hz:
                if f >= nyquist:
                    raise InvariantViolation(f"stimulus {f} Hz at or above Nyquist {nyquist} Hz")

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def n_channels(self) -> int:
        self._require_nonempty()
        return self.trials[0].n_channels

    @property
    def time_steps(self) -> int:
        self._require_nonempty()
        return self.trials[0].time_steps

    @property
    def sample_rate_hz(self) -> float:
        self._require_nonempty()
        return self.trials[0].sample_rate_hz

    def _require_nonempty(self) -> None:
        if not self.trials:
            raise InvariantViolation("dataset is empty")

    def stacked_samples(self) -> np.ndarray:
        """All trials stacked into a fresh `[n_trials, channels, time]` array."""
        self._require_nonempty()
        return np.stack([t.samples for t in self.trials])

    def labels(self) -> np.ndarray:
        """Class labels as an int array; raises if any trial is unlabeled."""
        if any(t.class_label is None for t in self.trials):
            raise MissingLabels("dataset contains unlabeled trials")
        return np.array([t.class_label for t in self.trials], dtype=np.int64)

    def subjects(self) -> np.ndarray:
        return np.array([t.subject for t in self.trials], dtype=np.int64)

    def with_trials(self, trials: Iterable[EegTrial], **meta_updates) -> Dataset:
        meta = dict(self.meta)
        meta.update(meta_updates)
        return replace(self, trials=tuple(trials), meta=meta)


# --- split policies ---

@dataclass(frozen=True)
class PerSubjectStratified:
    """Hold out ``test_fraction`` of every (subject, class) cell."""

    test_fraction: float

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise InvariantViolation(f"test_fraction must be in (0,1), got {self.test_fraction}")


@dataclass(frozen=True)
class LeaveOneSubjectOut:
    """Hold out every trial of one subject."""

    held_out: SubjectId


SplitPolicy = PerSubjectStratified | LeaveOneSubjectOut


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def normalize_trial(trial: EegTrial) -> EegTrial:
    """Z-score each channel independently (population std), keeping labels.

    Raises ZeroVarianceChannel if any channel is constant.
    """
    x = trial.samples
    mean = x.mean(axis=1, keepdims=True)
    std = x.std(axis=1, keepdims=True)
    if np.any(std == 0.0):
        bad = int(np.flatnonzero(std[:, 0] == 0.0)[0])
        raise ZeroVarianceChannel(f"channel {bad} is constant")
    return replace(trial, samples=(x - mean) / std)


def normalize_dataset(dataset: Dataset) -> Dataset:
    return dataset.with_trials(normalize_trial(t) for t in dataset.trials)


def split_dataset(dataset: Dataset, policy: SplitPolicy, seed: int) -> tuple[Dataset, Dataset]:
    """Partition a dataset into (train, test) under the given policy.

    PerSubjectStratified sends round(test_fraction * cell) trials of every
    (subject, class) cell to test, with round-half-up and a seeded draw.
    LeaveOneSubjectOut sends exactly the held-out subject's trials to test.
    The two halves always partition the input exactly.
    """
    if isinstance(policy, LeaveOneSubjectOut):
        if policy.held_out not in dataset.subject_roster:
            raise UnknownSubject(f"subject {policy.held_out} not in roster")
        test_idx = [i for i, t in enumerate(dataset.trials) if t.subject == policy.held_out]
        train_idx = [i for i, t in enumerate(dataset.trials) if t.subject != policy.held_out]
        train_roster = tuple(s for s in dataset.subject_roster if s != policy.held_out)
        test_roster = (policy.held_out,)
    elif isinstance(policy, PerSubjectStratified):
        if any(t.class_label is None for t in dataset.trials):
            raise MissingLabels("stratified split requires labeled trials")
        cells: dict[tuple[int, int], list[int]] = {}
        for i, t in enumerate(dataset.trials):
            cells.setdefault((t.subject, t.class_label), []).append(i)
        for subject in dataset.subject_roster:
            for c in range(len(dataset.class_table)):
                if (subject, c) not in cells:
                    raise EmptyCell(f"no trials for subject {subject}, class {c}")
        test_idx = []
        rng = stream(seed, 0)
        for key in sorted(cells):
            members = cells[key]
            n_test = round_half_up(policy.test_fraction * len(members))
            order = rng.permutation(len(members))
            test_idx.extend(members[j] for j in order[:n_test])
        chosen = set(test_idx)
        test_idx = sorted(chosen)
        train_idx = [i for i in range(len(dataset.trials)) if i not in chosen]
        train_roster = dataset.subject_roster
        test_roster = dataset.subject_roster
    else:
        raise InvariantViolation(f"unknown split policy {policy!r}")

    def subset(indices: Sequence[int], roster: tuple[SubjectId, ...], tag: str) -> Dataset:
        meta = dict(dataset.meta)
        meta.update({"split": tag, "split_policy": repr(policy), "split_seed": int(seed)})
        return Dataset(
            trials=tuple(dataset.trials[i] for i in indices),
            class_table=dataset.class_table,
            subject_roster=roster,
            meta=meta,
        )

    return subset(train_idx, train_roster, "train"), subset(test_idx, test_roster, "test")


def mix_datasets(real: Dataset, synthetic: Dataset, ratio_real: float, seed: int) -> Dataset:
    """Blend real and synthetic trials into a set the same size as ``real``.

    Per class c with N_c real trials, draws round(ratio_real * N_c) real and
    N_c minus that many synthetic trials, so the class histogram of the
    output equals the real histogram exactly and the total count stays N.
    Trial provenance is preserved.
    """
    if not 0.0 <= ratio_real <= 1.0:
        raise InvariantViolation(f"ratio_real must be in [0,1], got {ratio_real}")
    if not real.trials or not synthetic.trials:
        raise InvariantViolation("mix_datasets needs two non-empty datasets")
    if real.class_table != synthetic.class_table:
        raise ShapeMismatch("class tables differ between real and synthetic datasets")
    if (
        real.n_channels != synthetic.n_channels
        or real.time_steps != synthetic.time_steps
        or real.sample_rate_hz != synthetic.sample_rate_hz
    ):
        raise ShapeMismatch("trial geometry differs between real and synthetic datasets")

    real_labels = real.labels()
    syn_labels = synthetic.labels()
    rng = stream(seed, 1)
    picked: list[EegTrial] = []
    for c in range(len(real.class_table)):
        real_c = np.flatnonzero(real_labels == c)
        syn_c = np.flatnonzero(syn_labels == c)
        n_real = round_half_up(ratio_real * len(real_c))
        n_syn = len(real_c) - n_real
        if n_syn > len(syn_c):
            raise InsufficientSynthetic(
                f"class {c}: need {n_syn} synthetic trials, pool has {len(syn_c)}"
            )
        take_real = rng.permutation(len(real_c))[:n_real]
        take_syn = rng.permutation(len(syn_c))[:n_syn]
        picked.extend(real.trials[i] for i in np.sort(real_c[take_real]))
        picked.extend(synthetic.trials[i] for i in np.sort(syn_c[take_syn]))

    roster = tuple(sorted(set(real.subject_roster) | set(synthetic.subject_roster)))
    meta = {
        "mixed_from": (real.meta.get("split", "real"), synthetic.meta.get("split", "synthetic")),
        "ratio_real": float(ratio_real),
        "mix_seed": int(seed),
    }
    return Dataset(trials=tuple(picked), class_table=real.class_table,
                   subject_roster=roster, meta=meta)


def concat_datasets(a: Dataset, b: Dataset) -> Dataset:
    """Concatenate two compatible datasets (shared class table and geometry)."""
    if a.class_table != b.class_table:
        raise ShapeMismatch("class tables differ")
    roster = tuple(sorted(set(a.subject_roster) | set(b.subject_roster)))
    return Dataset(trials=a.trials + b.trials, class_table=a.class_table,
                   subject_roster=roster, meta=dict(a.meta))
