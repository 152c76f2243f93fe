"""Exception hierarchy shared across the pipeline.

Three families matter to the CLI exit-code mapping: data/config validation
(exit 1), runtime failures inside an operation (exit 2), and I/O (exit 3,
raised as plain OSError by callers).
"""


class EvalignError(Exception):
    """Base class for all package errors."""


class ValidationError(EvalignError):
    """Malformed input data or configuration."""


class RuntimeFailure(EvalignError):
    """An operation could not complete on otherwise valid input."""


# --- event stream parsing ---

class BadMagic(ValidationError):
    pass


class TruncatedFile(ValidationError):
    pass


class OutOfBoundsPixel(ValidationError):
    pass


class NonMonotoneTimestamp(ValidationError):
    pass


class BadPolarity(ValidationError):
    pass


# --- tensors and model ---

class ShapeMismatch(RuntimeFailure):
    pass


class DegenerateInput(ValidationError):
    pass


class NonFiniteFeature(RuntimeFailure):
    pass


# --- losses and training ---

class EmptyMask(RuntimeFailure):
    pass


class EmptyBatch(RuntimeFailure):
    pass


class NoValidPixels(RuntimeFailure):
    pass


# --- inference adapters ---

class InputSmallerThanTile(ValidationError):
    pass


class InputLargerThanTarget(ValidationError):
    pass


# --- matching / pose ---

class TooFewCorrespondences(RuntimeFailure):
    pass


class DegenerateConfiguration(RuntimeFailure):
    pass


class NonRotation(ValidationError):
    pass


# --- metrics ---

class EmptyMatrix(ValidationError):
    pass


class EmptyErrors(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


# --- configuration ---

class ConfigError(ValidationError):
    pass
