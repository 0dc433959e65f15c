"""Exception hierarchy shared by every module of the toolkit."""

from __future__ import annotations


class AttnConfError(Exception):
    """Base class for all toolkit errors.

    ``record_id`` and ``line_no`` are filled in whenever the failing record
    or input line is known, so the CLI can point at the offending data.
    """

    def __init__(self, message: str, *, record_id: str | None = None, line_no: int | None = None):
        super().__init__(message)
        self.message = message
        self.record_id = record_id
        self.line_no = line_no

    def __str__(self) -> str:
        where = []
        if self.line_no is not None:
            where.append(f"line {self.line_no}")
        if self.record_id is not None:
            where.append(f"record {self.record_id!r}")
        if where:
            return f"{', '.join(where)}: {self.message}"
        return self.message


# metrics
class EmptyMatrix(AttnConfError):
    pass


class NonFinite(AttnConfError):
    pass


class InvalidBeta(AttnConfError):
    pass


# records-io
class ParseError(AttnConfError):
    pass


class DimensionMismatch(AttnConfError):
    pass


class InvalidWeight(AttnConfError):
    pass


class RowSumViolation(AttnConfError):
    pass


class DuplicateId(AttnConfError):
    pass


class ScoreOutOfRange(AttnConfError):
    pass


# pipelines
class ScoringError(AttnConfError):
    pass


class InvalidFraction(AttnConfError):
    pass


class IdMismatch(AttnConfError):
    pass


class UnmatchedId(AttnConfError):
    pass


class NoComparablePairs(AttnConfError):
    pass
