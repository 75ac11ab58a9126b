"""Exception hierarchy shared across the package."""


class SisganError(Exception):
    """Base class for every error raised by this library."""


# --- signal / dataset errors ---

class ZeroVarianceChannel(SisganError):
    """A channel is constant and cannot be z-scored."""


class EmptyInput(SisganError):
    """An operation received an empty trial collection."""


class HeterogeneousShape(SisganError):
    """Trials in one collection disagree on shape or sample rate."""


class EmptyBand(SisganError):
    """No spectrum bin falls inside the requested frequency band."""


class UnknownSubject(SisganError):
    """A subject id is absent from the dataset roster."""


class EmptyCell(SisganError):
    """A (subject, class) stratum holds no trials."""


class MissingLabels(SisganError):
    """Trials lack the labels required by the operation."""


class InsufficientSynthetic(SisganError):
    """The synthetic pool is smaller than the requested draw."""


class InvariantViolation(SisganError):
    """A domain-type invariant does not hold."""


# --- persistence errors ---

class IoFailure(SisganError):
    """Reading or writing an artifact file failed."""


class BadMagic(SisganError):
    """File does not start with the expected magic tag."""


class UnsupportedVersion(SisganError):
    """File declares a format version this build cannot read."""


class TruncatedPayload(SisganError):
    """File ends before the declared payload."""


class SchemaMismatch(SisganError):
    """CSV columns do not match the declared trial geometry."""


class ParseFailure(SisganError):
    """A CSV cell could not be parsed; message names row and column."""


# --- simulation errors ---

class InfeasibleSignatureBand(SisganError):
    """Signature-tone exclusion constraints leave no room in the band."""


# --- network / training errors ---

class InvalidSpec(SisganError):
    """A network specification is internally inconsistent."""


class ShapeMismatch(SisganError):
    """Tensor shapes do not line up."""


class FrozenStore(SisganError):
    """An optimizer step was attempted on a frozen parameter store."""


class LabelOutOfRange(SisganError):
    """A class label falls outside [0, K)."""


class RosterMismatch(SisganError):
    """Subject-classifier roster size disagrees with the dataset roster."""


class RosterOverlap(SisganError):
    """Two datasets that must have disjoint subjects share an id."""


class MissingClassCheckpoint(SisganError):
    """Per-class generation lacks a generator for some class."""


class TooFewTrialsPerFold(SisganError):
    """A cross-validation stratum is smaller than the fold count."""


# --- configuration errors ---

class ConfigError(SisganError):
    """An experiment config file is malformed or inconsistent."""
