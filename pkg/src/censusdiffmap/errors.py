"""Exception and warning types raised across the package."""


class DiffmapError(Exception):
    """Base class for every error raised by censusdiffmap."""


class NonFiniteInput(DiffmapError, ValueError):
    pass


class AllColumnsConstant(DiffmapError, ValueError):
    pass


class CoincidentRows(DiffmapError, ValueError):
    """Two or more areas have identical standardized rows (infinite similarity)."""

    def __init__(self, pairs):
        self.pairs = list(pairs)
        shown = ", ".join(f"{a}~{b}" for a, b in self.pairs[:10])
        more = "" if len(self.pairs) <= 10 else f" (+{len(self.pairs) - 10} more)"
        super().__init__(f"coincident rows: {shown}{more}")


class IsolatedNode(DiffmapError, ValueError):
    pass


class ConvergenceFailure(DiffmapError, RuntimeError):
    pass


class SpectrumExhausted(DiffmapError, ValueError):
    pass


class IndexOutOfRange(DiffmapError, IndexError):
    pass


class UnmappedArea(DiffmapError, KeyError):
    def __init__(self, codes):
        self.codes = sorted(codes)
        super().__init__(f"{len(self.codes)} area(s) missing from hierarchy: {self.codes[:10]}")

    def __str__(self):
        return self.args[0]


class EmptyLSOA(DiffmapError, ValueError):
    pass


class ConstantSeries(DiffmapError, ValueError):
    pass


class LengthMismatch(DiffmapError, ValueError):
    pass


class MissingDomain(DiffmapError, KeyError):
    def __str__(self):
        return self.args[0]


class CodeOutsideUniverse(DiffmapError, ValueError):
    pass


class RanksMissing(DiffmapError, ValueError):
    pass


class MissingIdColumn(DiffmapError, ValueError):
    pass


class NonNumericCell(DiffmapError, ValueError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"non-numeric cell {value!r} at row {row}, column {column!r}")


class DuplicateAreaId(DiffmapError, ValueError):
    pass


class ConflictingMapping(DiffmapError, ValueError):
    pass


class MalformedRow(DiffmapError, ValueError):
    pass


class MissingDomainColumn(DiffmapError, ValueError):
    def __init__(self, domain):
        self.domain = domain
        super().__init__(domain)


class InvalidGeoJSON(DiffmapError, ValueError):
    pass


class UnknownKind(DiffmapError, ValueError):
    pass


class PipelineError(DiffmapError):
    """Wraps an upstream failure with the pipeline stage it happened in."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


class DisconnectedGraphWarning(UserWarning):
    pass


class DroppedColumnsWarning(UserWarning):
    pass


class DataIntegrityWarning(UserWarning):
    pass
