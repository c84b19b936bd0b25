"""Exception hierarchy shared across the package.

Three families map onto CLI exit codes: ConfigError -> 1, DataError -> 2,
NumericError -> 3.
"""


class MiarecError(Exception):
    pass


class ConfigError(MiarecError):
    """Bad or inconsistent configuration (unknown key, invalid value)."""


class DataError(MiarecError):
    """Problems with input data, indices or file formats."""


class CorpusParseError(DataError):
    """Malformed corpus line; carries the 1-based line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DuplicateIdError(DataError):
    pass


class UnknownIdError(DataError, KeyError):
    """Lookup of a scholar, paper or node id that does not exist."""

    def __str__(self):
        return MiarecError.__str__(self)


class MissingEdgeError(DataError):
    pass


class InsufficientCandidatesError(DataError):
    """Corpus too small to supply the requested negative samples."""


class EmptySplitError(DataError):
    pass


class VectorCoverageError(DataError):
    """A vector file does not cover every paper in the corpus."""


class VectorFormatError(DataError):
    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class InconsistencyError(DataError):
    """Structures that must agree (e.g. node universes) do not."""


class NumericError(MiarecError):
    pass


class DimensionError(NumericError):
    pass


class NumericDomainError(NumericError):
    pass


class EvaluationFailure(NumericError):
    """A numeric function produced a non-finite value."""


class DivergenceError(NumericError):
    """Training loss became non-finite; carries the offending epoch."""

    def __init__(self, epoch, value):
        super().__init__(f"non-finite loss ({value}) at epoch {epoch}")
        self.epoch = epoch


class UndefinedMetricError(NumericError):
    """Metric requested for a scholar with no relevant items."""
