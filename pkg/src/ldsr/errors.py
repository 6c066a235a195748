"""Exception types shared across the package."""


class LdsrError(Exception):
    """Base class for all package errors."""


class DataError(LdsrError):
    """Base class for dataset loading/validation failures (CLI exit 3)."""


class BadMagic(DataError):
    """IDX file starts with an unexpected magic number."""


class CountMismatch(DataError):
    """Image and label files disagree on the sample count."""


class TruncatedFile(DataError):
    """File ends before the declared payload is complete."""


class RaggedRows(DataError):
    """CSV rows have inconsistent field counts."""


class NonNumericFeature(DataError):
    """A feature cell is not a finite number."""


class SingleClass(DataError):
    """Fewer than two classes present in a loaded dataset."""


class InsufficientSamples(DataError):
    """A class has fewer samples than the requested per-class draw."""


class ZeroColumn(DataError):
    """A sample column has zero Euclidean norm and cannot be normalized."""


class DimensionMismatch(LdsrError):
    """Operands have incompatible shapes."""


class SingularSystem(LdsrError):
    """The linear system has no stationary solution at working precision."""


class AllScoresInfinite(LdsrError):
    """Every class score is infinite; no class can represent the query."""


class InvalidAtomCount(LdsrError):
    """Requested dictionary size is outside [1, samples-per-class]."""


class ConfigError(LdsrError):
    """Invalid run configuration (CLI exit 2)."""
