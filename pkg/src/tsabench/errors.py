"""Exception hierarchy for the benchmark harness.

Every stage raises a subclass of :class:`TsabenchError` so the runner can
attach stage/provenance information and exit with a machine-readable record
instead of a bare traceback.
"""


class TsabenchError(Exception):
    """Base class for all harness errors."""


class ConfigError(TsabenchError):
    """Invalid configuration value or combination."""


class DatasetFormatError(TsabenchError):
    """Structurally broken dataset file (ragged rows, empty file, ...)."""


class DatasetParseError(TsabenchError):
    """A token in a dataset file could not be parsed as a number."""


class DivergenceError(TsabenchError):
    """Training produced a non-finite loss; the run must not continue."""


class CapabilityError(TsabenchError):
    """A model was asked for an operation it does not declare."""


class AlignmentError(TsabenchError):
    """Externally supplied data does not line up with the test set."""


class ValidationError(TsabenchError):
    """A computed or received value violates its contract (NaN, wrong arity, ...)."""


class ProtocolError(TsabenchError):
    """The adapter wire protocol was violated (bad frame, id mismatch, version)."""


class TransportError(TsabenchError):
    """The adapter transport failed (timeout, dead process)."""


class IncompleteRunError(TsabenchError):
    """A result directory is missing records required for the requested report."""
