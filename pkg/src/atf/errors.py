"""Exception types shared across the package."""

from __future__ import annotations


class AtfError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(AtfError):
    """Input (file or backend response) could not be parsed."""


class SchemaError(AtfError):
    """Table violates structural invariants (duplicate/empty headers, bad rows)."""


class UnknownColumn(AtfError):
    def __init__(self, name: str):
        super().__init__(f"unknown column: {name!r}")
        self.name = name


class RowOutOfRange(AtfError):
    def __init__(self, index: int, n_rows: int):
        super().__init__(f"row index {index} out of range for table with {n_rows} rows")
        self.index = index


class UnknownTokenizer(AtfError):
    def __init__(self, name: str):
        super().__init__(f"unknown tokenizer: {name!r}")
        self.name = name


class MismatchedProvenance(AtfError):
    """Filtered table was not derived from the given raw table."""


class BackendError(AtfError):
    """Transport-level failure talking to a model backend."""


class FixtureMissError(AtfError):
    """Replay fixture has no recording for a requested key.

    Deliberately not a BackendError: fixture misses signal prompt drift and
    must propagate instead of triggering the gateway's graceful fallbacks.
    """


class EmptyIterations(AtfError):
    """No scoring iterations available to aggregate."""


class KeyMismatch(AtfError):
    """Two per-column maps do not cover the same column set."""


class LengthMismatch(AtfError):
    """Parallel score vectors have different lengths."""


class RangeError(AtfError):
    """Requested cluster-count range is invalid for the input size."""


class MixedTask(AtfError):
    """Metric applied to predictions of the wrong task type."""


class PipelineError(AtfError):
    """A pipeline stage failed; carries the partial trace for debugging."""

    def __init__(self, stage: str, cause: BaseException, trace: dict | None = None):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.trace = trace or {}
