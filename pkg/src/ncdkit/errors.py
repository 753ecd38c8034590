"""Exception hierarchy shared by all ncdkit modules.

Grouping matters for the CLI: ``DataError`` maps to exit code 3 and
``InfeasibleError`` to exit code 4.
"""

from __future__ import annotations


class NcdKitError(Exception):
    """Base class for all errors raised by this package."""


class DataError(NcdKitError):
    """Malformed or inconsistent input data."""


class BadMagicError(DataError):
    """File does not start with the EMB1 magic bytes."""


class TruncatedFileError(DataError):
    """File ends before the declared payload is complete."""


class CsvParseError(DataError):
    """Unparseable CSV row; message carries the 1-based row number."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class NonFiniteFeatureError(DataError):
    """A feature vector contains NaN or Inf."""


class SplitOverlapError(DataError):
    """A class id appears in both the base splits and the novel pool."""


class DimMismatchError(DataError):
    """Vector or record dimensionality disagrees with the declared dim."""


class EmptyClassError(DataError):
    """A class was selected for prototype computation but has no records."""


class ZeroVectorError(DataError):
    """Cosine distance requested on a zero vector (undefined direction)."""


class EmptyBankError(DataError):
    """Classification requested against an empty prototype bank (or pair)."""


class NovelBankEmptyError(DataError):
    """The detection rule routed a query to an empty novel bank.

    The caller must treat the sample as out-of-distribution but unlabeled;
    there is no novel class to assign.
    """


class EmptySplitError(DataError):
    """An operation requires a nonempty split slice."""


class InfeasibleError(NcdKitError):
    """A requested configuration cannot be satisfied by the data."""


class InfeasibleBudgetError(InfeasibleError):
    """No candidate threshold satisfies the forgetting budget."""


class InfeasibleSpecError(InfeasibleError):
    """Episode spec demands more classes or samples than the pool has."""


class EmptyQuerySetError(InfeasibleError):
    """An episode left a sampled class with zero query samples."""


class RejectionFailureError(InfeasibleError):
    """Could not place a novel class mean at the requested angular margin."""


class NoConvergenceError(InfeasibleError):
    """Iterative search (sigma tuning) exhausted its iteration budget."""


class IoError(NcdKitError):
    """Filesystem failure while reading or writing an artifact."""
