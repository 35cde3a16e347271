"""Exception types shared across the library.

Every error raised on purpose derives from MapSimError so callers can catch
one base class at the CLI boundary and map it to an exit code.
"""

from __future__ import annotations


class MapSimError(Exception):
    """Base class for all library errors."""


class DataError(MapSimError):
    """Malformed input data (bad file, bad record, inconsistent ids)."""


class FormatError(DataError):
    """A file does not conform to the expected on-disk format."""


class DuplicateId(DataError):
    """Two records in one dataset share a sample id."""


class EmptyGeometry(DataError):
    """An element has no vertices."""


class DegenerateElement(DataError):
    """An element's vertices are all coincident, so it has no extent."""


class KindMismatch(DataError):
    """Two elements of different kinds were compared directly."""


class InvalidCost(DataError):
    """A cost matrix contains NaN or negative entries."""


class EmptyTrainingSet(DataError):
    """An operation that scans a training set received an empty one."""


class EmptySet(DataError):
    """An operation that needs a non-empty dataset received an empty one."""


class EmptyDistribution(DataError):
    """A distribution-level statistic was asked of an empty sample list."""


class NoGroundTruth(DataError):
    """Average precision is undefined: no ground-truth elements of the class."""


class ZeroBaseline(DataError):
    """A relative measure is undefined because its baseline value is zero."""


class DegenerateRange(DataError):
    """A value range collapsed to a point where an interval was required."""


class ConfigError(DataError):
    """Invalid configuration (fractions, thresholds, bin counts)."""


class InfeasibleError(MapSimError):
    """A derivation has no solution under the configured constraints."""


class UnmatchableDistributions(InfeasibleError):
    """No pairing threshold brings the two distributions close enough."""


class NoFeasibleSplit(InfeasibleError):
    """No pair of tree cuts satisfies the split size constraints."""
