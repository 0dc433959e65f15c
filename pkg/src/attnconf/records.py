"""Line-delimited attention record format, judgment TSV and score tables.

One attention record per line::

    {"id": "s1", "src": ["labdien", "."], "tgt": ["hello", "."],
     "attn": [[0.9, 0.1], [0.05, 0.95]], "system": "nt", "meta": {"k": "v"}}

``attn`` is output-major: one row per target token, one column per source
token.  ``system`` and ``meta`` are optional; unknown fields are ignored when
reading and dropped when writing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, TextIO

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateId,
    InvalidWeight,
    NonFinite,
    ParseError,
    RowSumViolation,
    ScoreOutOfRange,
)
from .metrics import SCORE_FIELDS, ConfidenceScores

STRICT = "strict"
LENIENT = "lenient"
MODES = (STRICT, LENIENT)

ROW_SUM_TOLERANCE = 1e-4
MIN_JUDGMENT, MAX_JUDGMENT = 1.0, 5.0


@dataclass(frozen=True, eq=False)
class AttentionRecord:
    """One sentence pair with its output-by-input attention matrix.

    The matrix is stored read-only so records can be shared between threads
    and worker processes without defensive copies.
    """

    id: str
    src: tuple[str, ...]
    tgt: tuple[str, ...]
    attn: np.ndarray
    system: Optional[str] = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        attn = self.attn
        if not (isinstance(attn, np.ndarray) and attn.dtype == np.float64 and not attn.flags.writeable):
            attn = np.array(attn, dtype=np.float64)
            attn.flags.writeable = False
            object.__setattr__(self, "attn", attn)
        object.__setattr__(self, "src", tuple(self.src))
        object.__setattr__(self, "tgt", tuple(self.tgt))
        if not self.id:
            raise ParseError("record id must be a non-empty string")
        if not self.src or not self.tgt:
            raise DimensionMismatch("token sequences must be non-empty", record_id=self.id)
        expected = (len(self.tgt), len(self.src))
        if attn.shape != expected:
            raise DimensionMismatch(
                f"attention matrix has shape {attn.shape}, tokens require {expected} (target x source)",
                record_id=self.id,
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.attn.shape


# ---------------------------------------------------------------------------
# attention records


def _string_list(obj, key: str, line_no: int, record_id: str) -> list[str]:
    value = obj.get(key)
    if not isinstance(value, list) or not all(isinstance(t, str) for t in value):
        raise ParseError(f"field {key!r} must be an array of strings", line_no=line_no, record_id=record_id)
    if not value:
        raise DimensionMismatch(f"field {key!r} is empty", line_no=line_no, record_id=record_id)
    return value


def _parse_matrix(value, line_no: int, record_id: str) -> np.ndarray:
    if not isinstance(value, list) or not all(isinstance(row, list) for row in value):
        raise ParseError("field 'attn' must be an array of arrays", line_no=line_no, record_id=record_id)
    for row in value:
        for v in row:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"non-numeric attention weight {v!r}", line_no=line_no, record_id=record_id)
    widths = {len(row) for row in value}
    if len(widths) > 1:
        raise DimensionMismatch("attention rows have differing lengths", line_no=line_no, record_id=record_id)
    return np.array(value, dtype=np.float64).reshape(len(value), widths.pop() if widths else 0)


def check_weights(attn: np.ndarray, mode: str, record_id: str, line_no: int | None = None) -> np.ndarray | None:
    """Validate a parsed attention matrix against the row-stochastic invariant.

    Returns the renormalized matrix when lenient mode had to fix rows, else
    ``None``.
    """
    if not np.isfinite(attn).all():
        raise InvalidWeight("attention weights must be finite", record_id=record_id, line_no=line_no)
    if (attn < 0.0).any():
        raise InvalidWeight("attention weights must be non-negative", record_id=record_id, line_no=line_no)
    sums = attn.sum(axis=1)
    off = np.abs(sums - 1.0) > ROW_SUM_TOLERANCE
    if not off.any():
        return None
    if mode == STRICT:
        row = int(np.flatnonzero(off)[0])
        raise RowSumViolation(
            f"row {row} sums to {float(sums[row])!r}", record_id=record_id, line_no=line_no
        )
    if (sums <= 0.0).any():
        row = int(np.flatnonzero(sums <= 0.0)[0])
        raise RowSumViolation(
            f"row {row} has no attention mass to renormalize", record_id=record_id, line_no=line_no
        )
    fixed = attn.copy()
    fixed[off] /= sums[off][:, None]
    return fixed


def parse_record(line: str, mode: str = STRICT, line_no: int | None = None, raw: bool = False) -> AttentionRecord:
    """Parse one record line.

    With ``raw=True`` the matrix holds unnormalized attention energies: only
    finiteness is checked (see :func:`attnconf.metrics.softmax_normalize`).
    """
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise ParseError(f"malformed record: {exc}", line_no=line_no) from None
    if not isinstance(obj, dict):
        raise ParseError("record must be an object", line_no=line_no)
    record_id = obj.get("id")
    if not isinstance(record_id, str) or not record_id:
        raise ParseError("field 'id' must be a non-empty string", line_no=line_no)
    src = _string_list(obj, "src", line_no, record_id)
    tgt = _string_list(obj, "tgt", line_no, record_id)
    if "attn" not in obj:
        raise ParseError("missing field 'attn'", line_no=line_no, record_id=record_id)
    attn = _parse_matrix(obj["attn"], line_no, record_id)

    system = obj.get("system")
    if system is not None and not isinstance(system, str):
        raise ParseError("field 'system' must be a string", line_no=line_no, record_id=record_id)
    meta = obj.get("meta") or {}
    if not isinstance(meta, dict) or not all(isinstance(v, str) for v in meta.values()):
        raise ParseError("field 'meta' must be a flat string map", line_no=line_no, record_id=record_id)

    if attn.shape != (len(tgt), len(src)):
        raise DimensionMismatch(
            f"attention matrix has shape {attn.shape}, tokens require ({len(tgt)}, {len(src)})",
            line_no=line_no,
            record_id=record_id,
        )
    if raw:
        if not np.isfinite(attn).all():
            raise NonFinite("raw attention energies must be finite", line_no=line_no, record_id=record_id)
    else:
        fixed = check_weights(attn, mode, record_id, line_no)
        if fixed is not None:
            attn = fixed
            meta = {**meta, "renormalized": "true"}
    attn.flags.writeable = False
    return AttentionRecord(id=record_id, src=src, tgt=tgt, attn=attn, system=system, meta=meta)


def read_records(
    lines: Iterable[str],
    mode: str = STRICT,
    *,
    raw: bool = False,
    check_duplicates: bool = True,
) -> Iterator[AttentionRecord]:
    """Stream records from an iterable of lines, in input order.

    Blank lines are skipped.  Errors carry the 1-based line number.
    Duplicate detection keeps the set of ids seen so far; pass
    ``check_duplicates=False`` to keep memory independent of stream length.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    seen: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        record = parse_record(line, mode, line_no, raw=raw)
        if check_duplicates:
            if record.id in seen:
                raise DuplicateId("duplicate record id", record_id=record.id, line_no=line_no)
            seen.add(record.id)
        yield record


def _format_weight(v: float) -> str:
    return format(v, ".17g")


def format_record(record: AttentionRecord) -> str:
    """Serialize one record as a single line without the trailing newline."""
    dump = json.dumps
    rows = ",".join("[" + ",".join(map(_format_weight, row)) + "]" for row in record.attn.tolist())
    parts = [
        '"id": ' + dump(record.id, ensure_ascii=False),
        '"src": ' + dump(list(record.src), ensure_ascii=False),
        '"tgt": ' + dump(list(record.tgt), ensure_ascii=False),
        '"attn": [' + rows + "]",
    ]
    if record.system is not None:
        parts.append('"system": ' + dump(record.system, ensure_ascii=False))
    if record.meta:
        parts.append('"meta": ' + dump(dict(record.meta), ensure_ascii=False, sort_keys=True))
    return "{" + ", ".join(parts) + "}"


def write_records(records: Iterable[AttentionRecord]) -> Iterator[str]:
    """Yield one newline-terminated line per record, in order."""
    for record in records:
        yield format_record(record) + "\n"


# ---------------------------------------------------------------------------
# human judgments


@dataclass(frozen=True)
class HumanJudgment:
    """Category scores (worst=1 ... best=5) for translations A and B of one sentence."""

    id: str
    score_a: float
    score_b: float

    def __post_init__(self):
        for name in ("score_a", "score_b"):
            value = getattr(self, name)
            if not MIN_JUDGMENT <= value <= MAX_JUDGMENT:
                raise ScoreOutOfRange(f"{name}={value!r} outside [1, 5]", record_id=self.id)

    @property
    def preference(self) -> Optional[str]:
        """``"A"`` or ``"B"`` for a strict preference, ``None`` for a tie."""
        if self.score_a > self.score_b:
            return "A"
        if self.score_b > self.score_a:
            return "B"
        return None


def _tsv_fields(line: str, n: int, line_no: int) -> list[str]:
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != n:
        raise ParseError(f"expected {n} tab-separated fields, got {len(fields)}", line_no=line_no)
    if not fields[0]:
        raise ParseError("empty id", line_no=line_no)
    return fields


def _finite(text: str, line_no: int, record_id: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line_no=line_no, record_id=record_id) from None
    if not math.isfinite(value):
        raise ParseError(f"not a finite number: {text!r}", line_no=line_no, record_id=record_id)
    return value


def read_judgments(lines: Iterable[str]) -> Iterator[HumanJudgment]:
    """Read ``id<TAB>score_a<TAB>score_b`` lines.

    Lines starting with ``#`` and blank lines are skipped.  The same id may
    appear on several lines (one per annotator); see :func:`average_judgments`.
    """
    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        record_id, a, b = _tsv_fields(line, 3, line_no)
        score_a = _finite(a, line_no, record_id)
        score_b = _finite(b, line_no, record_id)
        try:
            yield HumanJudgment(record_id, score_a, score_b)
        except ScoreOutOfRange as exc:
            exc.line_no = line_no
            raise


def average_judgments(judgments: Iterable[HumanJudgment]) -> list[HumanJudgment]:
    """Average repeated judgments of the same sentence, keeping first-seen order."""
    sums: dict[str, list[float]] = {}
    for j in judgments:
        acc = sums.setdefault(j.id, [0.0, 0.0, 0])
        acc[0] += j.score_a
        acc[1] += j.score_b
        acc[2] += 1
    return [HumanJudgment(k, a / n, b / n) for k, (a, b, n) in sums.items()]


# ---------------------------------------------------------------------------
# external scores and score tables


def read_external_scores(lines: Iterable[str]) -> dict[str, float]:
    """Read ``id<TAB>score`` lines (higher is better) into an ordered dict."""
    scores: dict[str, float] = {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        record_id, value = _tsv_fields(line, 2, line_no)
        if record_id in scores:
            raise DuplicateId("duplicate id in score file", record_id=record_id, line_no=line_no)
        scores[record_id] = _finite(value, line_no, record_id)
    return scores


def score_table_header(with_cp: bool = False) -> str:
    columns = ("id",) + SCORE_FIELDS + (("cp",) if with_cp else ())
    return "#" + "\t".join(columns) + "\n"


def format_score_row(record_id: str, scores: ConfidenceScores, with_cp: bool = False) -> str:
    values = [scores.cdp, scores.ap_out, scores.ap_in, scores.total]
    if with_cp:
        values.append(scores.cp)
    return record_id + "\t" + "\t".join(map(repr, values)) + "\n"


def write_score_table(rows: Iterable[tuple[str, ConfidenceScores]], out: TextIO, with_cp: bool = False) -> int:
    """Write a TSV score table; returns the row count.

    A ``#``-prefixed header precedes the first row; nothing is written for
    an empty table.
    """
    n = 0
    for record_id, scores in rows:
        if not n:
            out.write(score_table_header(with_cp))
        out.write(format_score_row(record_id, scores, with_cp))
        n += 1
    return n


def read_score_table(lines: Iterable[str]) -> dict[str, ConfidenceScores]:
    """Read a score table written by :func:`write_score_table`."""
    table: dict[str, ConfidenceScores] = {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) not in (5, 6) or not fields[0]:
            raise ParseError("expected id, cdp, ap_out, ap_in, total and optional cp", line_no=line_no)
        record_id = fields[0]
        values = [_finite(v, line_no, record_id) for v in fields[1:]]
        if record_id in table:
            raise DuplicateId("duplicate id in score table", record_id=record_id, line_no=line_no)
        table[record_id] = ConfidenceScores(*values)
    return table
