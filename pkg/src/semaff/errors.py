"""Exception hierarchy shared by all modules."""


class SemAffError(Exception):
    """Base class for every error raised by the toolkit."""


class FormatError(SemAffError, ValueError):
    """An input file does not follow its documented format."""


class AlignmentError(SemAffError):
    """A linear map could not be fitted or applied."""


class DegenerateClusterError(SemAffError, ArithmeticError):
    """The centroid of a set of unit vectors is (numerically) zero."""


class CoverageError(SemAffError):
    """Too few languages, concepts or sources cover the requested item."""


class StatsError(SemAffError, ArithmeticError):
    """A statistical quantity is undefined for the given data."""


class StaleCacheError(SemAffError):
    """A cached artifact failed its integrity check."""


class ConfigError(SemAffError):
    """A run configuration is invalid or references missing inputs."""
