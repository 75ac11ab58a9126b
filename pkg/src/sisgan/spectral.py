"""One-sided DFT magnitude spectra and peak detection for SSVEP validation."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset, EegTrial
from .errors import EmptyBand, EmptyInput, HeterogeneousShape, InvariantViolation


class Window(enum.Enum):
    RECT = "rect"
    HANN = "hann"


@dataclass(frozen=True)
class SpectrumReport:
    """Channel- and trial-averaged one-sided magnitude spectrum."""

    freqs_hz: np.ndarray
    magnitude: np.ndarray
    n_trials_averaged: int
    class_label: int | None

    def __post_init__(self) -> None:
        freqs = np.ascontiguousarray(self.freqs_hz, dtype=np.float64)
        mag = np.ascontiguousarray(self.magnitude, dtype=np.float64)
        if freqs.ndim != 1 or mag.shape != freqs.shape:
            raise InvariantViolation("freqs and magnitude must be 1D arrays of equal length")
        if np.any(np.diff(freqs) <= 0.0):
            raise InvariantViolation("frequencies must be strictly increasing")
        if np.any(mag < 0.0):
            raise InvariantViolation("magnitudes must be non-negative")
        freqs.setflags(write=False)
        mag.setflags(write=False)
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "magnitude", mag)


def _window(kind: Window, n: int) -> np.ndarray:
    if kind is Window.RECT:
        return np.ones(n)
    # periodic Hann, the usual choice for spectral averaging
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def compute_spectrum(trials: Sequence[EegTrial], window: Window = Window.HANN) -> SpectrumReport:
    """Average the one-sided DFT magnitude over channels and trials.

    All trials must share geometry, sample rate and class label; frequency
    resolution is sample_rate / time_steps.
    """
    trials = list(trials)
    if not trials:
        raise EmptyInput("compute_spectrum needs at least one trial")
    first = trials[0]
    for i, t in enumerate(trials):
        if (
            t.n_channels != first.n_channels
            or t.time_steps != first.time_steps
            or t.sample_rate_hz != first.sample_rate_hz
        ):
            raise HeterogeneousShape(f"trial {i} geometry differs from trial 0")
        if t.class_label != first.class_label:
            raise HeterogeneousShape(f"trial {i} class label differs from trial 0")

    n = first.time_steps
    w = _window(window, n)
    batch = np.stack([t.samples for t in trials])  # [N, C, T]
    mags = np.abs(np.fft.rfft(batch * w, axis=2))
    magnitude = mags.mean(axis=(0, 1))
    freqs = np.fft.rfftfreq(n, d=1.0 / first.sample_rate_hz)
    return SpectrumReport(
        freqs_hz=freqs,
        magnitude=magnitude,
        n_trials_averaged=len(trials),
        class_label=first.class_label,
    )


def trial_spectrum(trial: EegTrial, window: Window = Window.HANN) -> SpectrumReport:
    return compute_spectrum([trial], window)


def dominant_frequency(spectrum: SpectrumReport, band_hz: tuple[float, float]) -> float:
    """Frequency of the largest-magnitude bin inside ``band_hz``.

    Ties break toward the lowest frequency. Raises EmptyBand when no bin
    falls inside the (inclusive) band.
    """
    low, high = band_hz
    if not low < high:
        raise InvariantViolation(f"band must satisfy low < high, got {band_hz}")
    mask = (spectrum.freqs_hz >= low) & (spectrum.freqs_hz <= high)
    if not np.any(mask):
        raise EmptyBand(f"no spectrum bin inside [{low}, {high}] Hz")
    idx = np.flatnonzero(mask)
    best = idx[np.argmax(spectrum.magnitude[idx])]  # argmax keeps the first (lowest) bin on ties
    return float(spectrum.freqs_hz[best])


def fft_oracle_labels(dataset: Dataset, band_hz: tuple[float, float] | None = None,
                      window: Window = Window.HANN) -> np.ndarray:
    """Label every trial by the stimulus frequency nearest its spectral peak.

    This is the model-free reference classifier: no trainable parameters,
    independent of the network code paths it is used to check.
    """
    if band_hz is None:
        band_hz = (5.0, 0.8 * dataset.sample_rate_hz / 2.0)
    labels = np.empty(len(dataset.trials), dtype=np.int64)
    for i, trial in enumerate(dataset.trials):
        peak = dominant_frequency(trial_spectrum(trial, window), band_hz)
        labels[i] = dataset.class_table.nearest_class(peak)
    return labels


def peak_to_median_ratio(spectrum: SpectrumReport, band_hz: tuple[float, float]) -> float:
    """Peak magnitude over the median magnitude within the band."""
    low, high = band_hz
    mask = (spectrum.freqs_hz >= low) & (spectrum.freqs_hz <= high)
    if not np.any(mask):
        raise EmptyBand(f"no spectrum bin inside [{low}, {high}] Hz")
    band = spectrum.magnitude[mask]
    med = float(np.median(band))
    if med == 0.0:
        return float("inf") if band.max() > 0.0 else 1.0
    return float(band.max() / med)
