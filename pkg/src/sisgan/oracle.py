"""Parametric simulator of SSVEP-like signals with subject signatures.

Each subject gets a persistent signature: per-channel gains, a background
tone at a subject-specific off-stimulus frequency, an idiosyncratic
harmonic decay and phase pattern. Signals are stimulus harmonics plus the
signature tone plus pink noise. The signature makes subject identity
learnable by a network while staying spectrally separable from the SSVEP
content, so class fidelity and subject invariance can be measured
independently. Generation is fully deterministic: every trial draws from
a counter-based substream keyed by (seed, subject, class, trial).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, EegTrial, Provenance, SsvepClassTable, SubjectId
from .errors import InfeasibleSignatureBand, InvariantViolation
from .rand import stream

# substream tags (first spawn-key component)
_PROFILE_STREAM = 1
_TRIAL_STREAM = 2

_SIGNATURE_HARMONICS = 3  # keep-away applies to stimulus harmonics 1..3
_MIN_SLOT_HZ = 0.01


@dataclass(frozen=True)
class SimulationConfig:
    """Shape and signal-level knobs of one simulated recording session."""

    n_subjects: int = 9
    trials_per_class_per_subject: int = 60
    channels: int = 8
    time_steps: int = 1024
    sample_rate_hz: float = 500.0
    snr_scale: float = 1.0
    n_harmonics: int = 3
    seed: int = 0
    # kept below snr_scale times the worst-case Hann scalloping factor so the
    # stimulus fundamental outweighs the signature tone in every clean trial
    signature_amp: float = 0.6
    noise_level: float = 1.0
    harmonic_decay: float = 0.5
    signature_band_hz: tuple[float, float] = (7.5, 9.5)
    signature_exclusion_hz: float = 0.8
    first_subject_id: int = 0

    def __post_init__(self) -> None:
        if min(self.n_subjects, self.trials_per_class_per_subject, self.channels,
               self.n_harmonics) < 1:
            raise InvariantViolation("all counts must be >= 1")
        if self.time_steps < 2:
            raise InvariantViolation(f"time_steps must be >= 2, got {self.time_steps}")
        if self.sample_rate_hz <= 0.0:
            raise InvariantViolation("sample_rate_hz must be positive")
        for name in ("snr_scale", "signature_amp", "noise_level"):
            if getattr(self, name) < 0.0:
                raise InvariantViolation(f"{name} must be >= 0")
        if not 0.0 < self.harmonic_decay <= 1.0:
            raise InvariantViolation("harmonic_decay must lie in (0, 1]")
        low, high = self.signature_band_hz
        if not 0.0 < low < high:
            raise InvariantViolation(f"bad signature band {self.signature_band_hz}")
        if self.first_subject_id < 0:
            raise InvariantViolation("first_subject_id must be >= 0")

    def subject_ids(self) -> tuple[SubjectId, ...]:
        return tuple(range(self.first_subject_id, self.first_subject_id + self.n_subjects))


@dataclass(frozen=True)
class SubjectProfile:
    """Per-subject signal signature; see the module docstring."""

    subject: SubjectId
    channel_gains: np.ndarray          # [channels], all > 0
    signature_freq_hz: float
    signature_amp: float
    harmonic_decay: float
    phase_offsets: np.ndarray          # [channels, n_harmonics], radians
    signature_phases: np.ndarray       # [channels], radians
    noise_level: float

    def __post_init__(self) -> None:
        gains = np.ascontiguousarray(self.channel_gains, dtype=np.float64)
        if np.any(gains <= 0.0):
            raise InvariantViolation("channel gains must all be positive")
        gains.setflags(write=False)
        object.__setattr__(self, "channel_gains", gains)
        for field in ("phase_offsets", "signature_phases"):
            arr = np.ascontiguousarray(getattr(self, field), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, field, arr)
        if not 0.0 < self.harmonic_decay <= 1.0:
            raise InvariantViolation("harmonic_decay must lie in (0, 1]")
        if self.signature_amp < 0.0 or self.noise_level < 0.0:
            raise InvariantViolation("amplitudes must be >= 0")


def _allowed_signature_intervals(
    config: SimulationConfig, class_table: SsvepClassTable
) -> list[tuple[float, float]]:
    """Signature band minus keep-away zones around stimulus harmonics."""
    low, high = config.signature_band_hz
    nyquist = config.sample_rate_hz / 2.0
    high = min(high, nyquist - 1e-9)
    intervals = [(low, high)]
    margin = config.signature_exclusion_hz
    for f in class_table.frequencies_hz:
        for h in range(1, _SIGNATURE_HARMONICS + 1):
            zone = (h * f - margin, h * f + margin)
            nxt: list[tuple[float, float]] = []
            for a, b in intervals:
                if zone[1] <= a or zone[0] >= b:
                    nxt.append((a, b))
                    continue
                if a < zone[0]:
                    nxt.append((a, zone[0]))
                if zone[1] < b:
                    nxt.append((zone[1], b))
            intervals = nxt
    return [(a, b) for a, b in intervals if b - a > 1e-12]


def _frequency_at(intervals: list[tuple[float, float]], arc: float) -> float:
    """Map arc-length position to a frequency within the interval union."""
    for a, b in intervals:
        if arc <= (b - a):
            return a + arc
        arc -= b - a
    return intervals[-1][1]


def make_profiles(
    config: SimulationConfig, class_table: SsvepClassTable | None = None
) -> list[SubjectProfile]:
    """Deterministic, pairwise-distinct subject profiles for a config.

    Signature frequencies occupy jittered per-subject slots spread over the
    admissible band, so distinctness holds by construction and every
    frequency stays at least the exclusion margin away from stimulus
    harmonics.
    """
    table = class_table if class_table is not None else SsvepClassTable()
    intervals = _allowed_signature_intervals(config, table)
    total = sum(b - a for a, b in intervals)
    slot = total / config.n_subjects
    if not intervals or slot < _MIN_SLOT_HZ:
        raise InfeasibleSignatureBand(
            f"band {config.signature_band_hz} leaves {total:.3f} Hz for "
            f"{config.n_subjects} subjects"
        )
    profiles = []
    for i, subject in enumerate(config.subject_ids()):
        rng = stream(config.seed, _PROFILE_STREAM, subject)
        jitter = 0.8 * (rng.random() - 0.5)  # within +-0.4 slot
        freq = _frequency_at(intervals, (i + 0.5 + jitter) * slot)
        profiles.append(SubjectProfile(
            subject=subject,
            channel_gains=rng.uniform(0.7, 1.3, config.channels),
            signature_freq_hz=freq,
            signature_amp=config.signature_amp * rng.uniform(0.85, 1.15),
            harmonic_decay=float(np.clip(
                config.harmonic_decay + rng.uniform(-0.15, 0.15), 0.05, 1.0)),
            phase_offsets=rng.uniform(0.0, 2.0 * math.pi, (config.channels, config.n_harmonics)),
            signature_phases=rng.uniform(0.0, 2.0 * math.pi, config.channels),
            noise_level=config.noise_level * rng.uniform(0.9, 1.1),
        ))
    return profiles


def _pink_noise(rng: np.random.Generator, channels: int, time_steps: int,
                sample_rate_hz: float) -> np.ndarray:
    """Unit-std 1/f-shaped noise, independent per channel."""
    white = rng.standard_normal((channels, time_steps))
    freqs = np.fft.rfftfreq(time_steps, d=1.0 / sample_rate_hz)
    envelope = 1.0 / np.sqrt(np.maximum(freqs, 1.0))
    envelope[0] = 0.0  # zero-mean output
    shaped = np.fft.irfft(np.fft.rfft(white, axis=1) * envelope[None, :], n=time_steps, axis=1)
    std = shaped.std(axis=1, keepdims=True)
    return shaped / np.maximum(std, 1e-12)


def synthesize_trial(
    profile: SubjectProfile,
    class_label: int,
    class_table: SsvepClassTable,
    config: SimulationConfig,
    rng: np.random.Generator,
) -> EegTrial:
    """One trial: stimulus harmonics + signature tone + pink noise.

    A per-trial random onset shift rotates the stimulus and signature
    phases, emulating asynchronous windowing; consumes exactly two uniform
    draws plus the noise block from ``rng``.
    """
    if class_label >= len(class_table):
        raise InvariantViolation(f"class {class_label} outside table of {len(class_table)}")
    t = np.arange(config.time_steps) / config.sample_rate_hz
    f = class_table.frequency_of(class_label)
    onset = rng.random() / f
    sig_onset = rng.random() / profile.signature_freq_hz
    gains = profile.channel_gains[:, None]
    x = np.zeros((config.channels, config.time_steps))
    for h in range(1, config.n_harmonics + 1):
        amp = config.snr_scale * profile.harmonic_decay ** (h - 1)
        phase = profile.phase_offsets[:, h - 1][:, None] + 2.0 * math.pi * h * f * onset
        x += amp * gains * np.sin(2.0 * math.pi * h * f * t[None, :] + phase)
    sig_phase = profile.signature_phases[:, None] + (
        2.0 * math.pi * profile.signature_freq_hz * sig_onset)
    x += profile.signature_amp * gains * np.sin(
        2.0 * math.pi * profile.signature_freq_hz * t[None, :] + sig_phase)
    if profile.noise_level > 0.0:
        x = x + profile.noise_level * _pink_noise(
            rng, config.channels, config.time_steps, config.sample_rate_hz)
    return EegTrial(
        samples=x,
        sample_rate_hz=config.sample_rate_hz,
        subject=profile.subject,
        class_label=class_label,
        provenance=Provenance.ORACLE_REAL,
    )


def synthesize_dataset(
    config: SimulationConfig, class_table: SsvepClassTable | None = None
) -> Dataset:
    """Full session: n_subjects x n_classes x trials_per_class trials.

    Every trial is generated from its own substream keyed by
    (seed, subject, class, trial index), so results do not depend on
    generation order.
    """
    table = class_table if class_table is not None else SsvepClassTable()
    if max(f * config.n_harmonics for f in table.frequencies_hz) >= config.sample_rate_hz / 2.0:
        raise InvariantViolation("highest stimulus harmonic reaches Nyquist")
    profiles = make_profiles(config, table)
    trials = []
    for profile in profiles:
        for c in range(len(table)):
            for k in range(config.trials_per_class_per_subject):
                rng = stream(config.seed, _TRIAL_STREAM, profile.subject, c, k)
                trials.append(synthesize_trial(profile, c, table, config, rng))
    meta = {
        "source": "oracle_simulator",
        "seed": config.seed,
        "n_subjects": config.n_subjects,
        "trials_per_class_per_subject": config.trials_per_class_per_subject,
        "snr_scale": config.snr_scale,
        "signature_amp": config.signature_amp,
        "noise_level": config.noise_level,
    }
    return Dataset(trials=tuple(trials), class_table=table,
                   subject_roster=config.subject_ids(), meta=meta)


def online_analog_config(offline: SimulationConfig, *, n_subjects: int = 3,
                         trials_per_class: int = 10, shift: float = 0.8) -> SimulationConfig:
    """Task-shifted companion config with disjoint subjects and seed.

    Models the offline-to-online session change as an amplitude shift
    (default x0.8 on SSVEP and signature levels) plus fresh subjects.
    """
    return replace(
        offline,
        n_subjects=n_subjects,
        trials_per_class_per_subject=trials_per_class,
        snr_scale=offline.snr_scale * shift,
        signature_amp=offline.signature_amp * shift,
        seed=offline.seed + 1000,
        first_subject_id=offline.first_subject_id + 100,
    )
