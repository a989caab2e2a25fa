"""Exception hierarchy shared by every stage of the toolkit.

The CLI maps the three base classes onto exit codes (config 2, data 3,
numeric 4), so new errors should subclass one of them.
"""

from __future__ import annotations


class MednerError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MednerError):
    pass


class DataError(MednerError):
    pass


class NumericError(MednerError):
    pass


# corpus
class MalformedAnnotation(DataError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class SpanOutOfBounds(DataError):
    pass


class InsufficientDocuments(DataError):
    pass


class EmptyLexicon(ConfigError):
    pass


# numkit
class ShapeMismatch(NumericError):
    pass


class NonFiniteValue(NumericError):
    pass


# embeddings
class EmptyWindowStream(DataError):
    pass


class MalformedHeader(DataError):
    pass


class DimensionMismatch(DataError):
    pass


# embedding evaluation
class TooFewWords(DataError):
    pass


class ZeroVector(DataError):
    pass


class TooFewPoints(DataError):
    pass


class InsufficientClassWords(DataError):
    pass


# models
class ConfigInvalid(ConfigError):
    pass


class NoPositiveInstances(DataError):
    pass


class EmptyTerm(DataError):
    pass


# metrics
class DocumentMismatch(DataError):
    pass


class EntryMismatch(DataError):
    pass


class StageFailure(MednerError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")
