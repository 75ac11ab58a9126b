"""Bit-exact persistence for datasets and checkpoints, plus CSV ingestion.

Dataset files (magic ``SISGDSET``) and checkpoint files (magic
``SISGCKPT``) are little-endian throughout with f32 payloads. Layout:

dataset  : magic, version u32, sample_rate f64, channels u32,
           time_steps u32, n_trials u32, n_classes u32,
           class frequencies f64[n_classes], n_subjects u32,
           roster u32[n_subjects], meta_len u32, meta JSON utf-8,
           then per trial: subject u32, class u32 (0xFFFFFFFF when
           unlabeled), provenance u8, samples f32[channels*time] row-major.

checkpoint: magic, version u32, frozen u8, meta_len u32, meta JSON utf-8,
           n_tensors u32, then per tensor: name_len u16, name utf-8,
           ndim u32, dims u32[ndim], values f32.

Writes go to a temp file in the destination directory and are renamed
into place; identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

from .data import UNLABELED, Dataset, EegTrial, Provenance, SsvepClassTable
from .errors import (
    BadMagic,
    InvariantViolation,
    IoFailure,
    ParseFailure,
    SchemaMismatch,
    TruncatedPayload,
    UnsupportedVersion,
)
from .nn.params import ParameterStore

DATASET_MAGIC = b"SISGDSET"
CHECKPOINT_MAGIC = b"SISGCKPT"
FORMAT_VERSION = 1


def _atomic_write(path: Path, payload: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(payload)
            os.replace(tmp, path)
        except BaseException:
            os.unlink(tmp)
            raise
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _meta_bytes(meta: Mapping) -> bytes:
    try:
        text = json.dumps(dict(meta), sort_keys=True, separators=(",", ":"), default=str)
    except (TypeError, ValueError) as exc:
        raise InvariantViolation(f"meta is not JSON-serializable: {exc}") from exc
    return text.encode("utf-8")


class _Reader:
    """Cursor over a byte buffer that raises TruncatedPayload on overrun."""

    def __init__(self, data: bytes, what: str) -> None:
        self.data = data
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedPayload(
                f"{self.what}: wanted {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def u32(self) -> int:
        return self.unpack("<I")[0]

    def f64(self) -> float:
        return self.unpack("<d")[0]

    def array(self, dtype: str, count: int) -> np.ndarray:
        raw = self.take(int(np.dtype(dtype).itemsize) * count)
        return np.frombuffer(raw, dtype=dtype, count=count)

    def expect_end(self) -> None:
        if self.pos != len(self.data):
            raise InvariantViolation(
                f"{self.what}: {len(self.data) - self.pos} trailing bytes after payload"
            )


def _read_file(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def save_dataset(dataset: Dataset, path) -> None:
    """Serialize a dataset; byte-identical output for identical inputs."""
    parts = [DATASET_MAGIC, struct.pack("<I", FORMAT_VERSION)]
    n_trials = len(dataset.trials)
    if n_trials:
        rate, channels, steps = dataset.sample_rate_hz, dataset.n_channels, dataset.time_steps
    else:
        rate, channels, steps = 0.0, 0, 0
    freqs = dataset.class_table.frequencies_hz
    parts.append(struct.pack("<dIIII", rate, channels, steps, n_trials, len(freqs)))
    parts.append(np.asarray(freqs, dtype="<f8").tobytes())
    parts.append(struct.pack("<I", len(dataset.subject_roster)))
    parts.append(np.asarray(dataset.subject_roster, dtype="<u4").tobytes())
    meta = _meta_bytes(dataset.meta)
    parts.append(struct.pack("<I", len(meta)))
    parts.append(meta)
    for t in dataset.trials:
        label = UNLABELED if t.class_label is None else t.class_label
        parts.append(struct.pack("<IIB", t.subject, label, t.provenance.value))
        parts.append(np.ascontiguousarray(t.samples, dtype="<f4").tobytes())
    _atomic_write(Path(path), b"".join(parts))


def load_dataset(path) -> Dataset:
    """Inverse of save_dataset (samples come back f32-rounded)."""
    r = _Reader(_read_file(path), f"dataset {path}")
    if r.take(len(DATASET_MAGIC)) != DATASET_MAGIC:
        raise BadMagic(f"{path} is not a dataset file")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"{path}: version {version}, expected {FORMAT_VERSION}")
    rate, channels, steps, n_trials, n_classes = r.unpack("<dIIII")
    freqs = r.array("<f8", n_classes)
    n_subjects = r.u32()
    roster = tuple(int(s) for s in r.array("<u4", n_subjects))
    meta_len = r.u32()
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvariantViolation(f"{path}: corrupt meta block: {exc}") from exc
    table = SsvepClassTable(tuple(float(f) for f in freqs))
    trials = []
    for i in range(n_trials):
        subject, label, prov = r.unpack("<IIB")
        samples = r.array("<f4", channels * steps).astype(np.float64).reshape(channels, steps)
        try:
            provenance = Provenance(prov)
        except ValueError as exc:
            raise InvariantViolation(f"{path}: trial {i} has provenance byte {prov}") from exc
        if label != UNLABELED and label >= n_classes:
            raise InvariantViolation(f"{path}: trial {i} class {label} >= n_classes {n_classes}")
        trials.append(EegTrial(
            samples=samples,
            sample_rate_hz=rate,
            subject=subject,
            class_label=None if label == UNLABELED else int(label),
            provenance=provenance,
        ))
    r.expect_end()
    try:
        return Dataset(trials=tuple(trials), class_table=table, subject_roster=roster, meta=meta)
    except InvariantViolation as exc:
        raise InvariantViolation(f"{path}: {exc}") from exc


def save_checkpoint(store: ParameterStore, path, meta: Mapping | None = None) -> None:
    """Serialize a parameter store with optional JSON metadata."""
    parts = [CHECKPOINT_MAGIC, struct.pack("<IB", FORMAT_VERSION, int(store.frozen))]
    meta_bytes = _meta_bytes(meta or {})
    parts.append(struct.pack("<I", len(meta_bytes)))
    parts.append(meta_bytes)
    parts.append(struct.pack("<I", len(store)))
    for name, tensor in store.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", tensor.ndim))
        parts.append(np.asarray(tensor.shape, dtype="<u4").tobytes())
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    _atomic_write(Path(path), b"".join(parts))


def load_checkpoint(path) -> tuple[ParameterStore, dict]:
    """Inverse of save_checkpoint; returns (store, meta)."""
    r = _Reader(_read_file(path), f"checkpoint {path}")
    if r.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise BadMagic(f"{path} is not a checkpoint file")
    version, frozen = r.unpack("<IB")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"{path}: version {version}, expected {FORMAT_VERSION}")
    meta_len = r.u32()
    try:
        meta = json.loads(r.take(meta_len).decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InvariantViolation(f"{path}: corrupt meta block: {exc}") from exc
    n_tensors = r.u32()
    store = ParameterStore()
    for _ in range(n_tensors):
        name_len = r.unpack("<H")[0]
        name = r.take(name_len).decode("utf-8")
        ndim = r.u32()
        shape = tuple(int(d) for d in r.array("<u4", ndim))
        count = int(np.prod(shape)) if shape else 1
        values = r.array("<f4", count).astype(np.float64).reshape(shape)
        store.add(name, values)
    r.expect_end()
    if frozen:
        store._mark_frozen()
    return store, meta


def checkpoint_bytes(store: ParameterStore, meta: Mapping | None = None) -> bytes:
    """The exact bytes save_checkpoint would write (for byte comparisons)."""
    with tempfile.TemporaryDirectory() as tmp:
        p = Path(tmp) / "ckpt.bin"
        save_checkpoint(store, p, meta)
        return p.read_bytes()


# --- CSV ingestion / export ---

def export_csv(dataset: Dataset, path) -> None:
    """Write one trial per row: subject, class, then channel-major samples."""
    path = Path(path)
    if not dataset.trials:
        raise InvariantViolation("cannot export an empty dataset to CSV")
    channels, steps = dataset.n_channels, dataset.time_steps
    header = ["subject", "class"] + [
        f"c{c}_t{t}" for c in range(channels) for t in range(steps)
    ]
    lines = [",".join(header)]
    for t in dataset.trials:
        label = "" if t.class_label is None else str(t.class_label)
        values = np.ascontiguousarray(t.samples, dtype=np.float32).ravel()
        row = [str(t.subject), label] + [repr(float(v)) for v in values]
        lines.append(",".join(row))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))


def import_csv(
    path,
    sample_rate_hz: float,
    channels: int,
    class_table: SsvepClassTable | None = None,
) -> Dataset:
    """Load externally recorded trials from CSV (one trial per row).

    Expects a header row ``subject,class,...`` followed by channels x
    time_steps sample columns; time_steps is inferred from the column
    count. Imported trials carry OracleReal provenance.
    """
    table = class_table if class_table is not None else SsvepClassTable()
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaMismatch(f"{path}: empty CSV")
    header = rows[0]
    if len(header) < 3 or header[0].strip() != "subject" or header[1].strip() != "class":
        raise SchemaMismatch(f"{path}: header must start with 'subject,class', got {header[:3]}")
    n_sample_cols = len(header) - 2
    if channels < 1 or n_sample_cols % channels != 0:
        raise SchemaMismatch(
            f"{path}: {n_sample_cols} sample columns do not divide into {channels} channels"
        )
    steps = n_sample_cols // channels
    trials = []
    for row_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaMismatch(
                f"{path}: row {row_no} has {len(row)} cells, header has {len(header)}"
            )
        try:
            subject = int(row[0])
        except ValueError as exc:
            raise ParseFailure(f"{path}: row {row_no}, column 'subject': {row[0]!r}") from exc
        raw_label = row[1].strip()
        if raw_label == "":
            label = None
        else:
            try:
                label = int(raw_label)
            except ValueError as exc:
                raise ParseFailure(f"{path}: row {row_no}, column 'class': {row[1]!r}") from exc
        samples = np.empty(n_sample_cols)
        for col, cell in enumerate(row[2:]):
            try:
                samples[col] = float(cell)
            except ValueError as exc:
                raise ParseFailure(
                    f"{path}: row {row_no}, column {header[col + 2]!r}: {cell!r}"
                ) from exc
        trials.append(EegTrial(
            samples=samples.reshape(channels, steps),
            sample_rate_hz=sample_rate_hz,
            subject=subject,
            class_label=label,
            provenance=Provenance.ORACLE_REAL,
        ))
    roster = tuple(sorted({t.subject for t in trials}))
    return Dataset(trials=tuple(trials), class_table=table, subject_roster=roster,
                   meta={"source": str(path)})
