"""Scoring and confidence filtering of (back-)translated corpora.

The full procedure is: score every translation, drop translations containing
the unknown-word token, then keep the best-scoring fraction of the remainder
ranked by the combined total.  Kept records are re-emitted in their original
order, so line alignment with any sibling file is preserved.
"""

from __future__ import annotations

import json
import time
from array import array
from dataclasses import asdict, dataclass
from decimal import Decimal
from functools import partial
from itertools import tee
from typing import Callable, Iterable, Iterator, Optional, Sequence, TextIO

import numpy as np

from .errors import AttnConfError, InvalidFraction, ScoringError
from .metrics import ConfidenceScores, confidence
from .parallel import ordered_map
from .records import AttentionRecord, format_score_row, score_table_header

DEFAULT_KEEP_FRACTION = 0.5
DEFAULT_UNK = "<unk>"


@dataclass(frozen=True, eq=False)
class ScoredTranslation:
    record: AttentionRecord
    scores: ConfidenceScores

    @property
    def id(self) -> str:
        return self.record.id

    @property
    def total(self) -> float:
        return self.scores.total


@dataclass
class FilterReport:
    total_in: int
    removed_unk: int
    kept: int
    dropped: int
    keep_fraction: float
    cutoff_score: Optional[float]
    duration: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _score_chunk(chunk: list[AttentionRecord], beta: float | None) -> list[ConfidenceScores]:
    out = []
    for record in chunk:
        try:
            out.append(confidence(record.attn, beta))
        except AttnConfError as exc:
            raise ScoringError(exc.message, record_id=record.id) from exc
    return out


def score_corpus(
    records: Iterable[AttentionRecord],
    workers: int = 1,
    beta: float | None = None,
    chunk_size: int = 512,
) -> Iterator[ScoredTranslation]:
    """Score records lazily, one result per input in input order.

    Scoring is spread over ``workers`` processes; the output is identical for
    any worker count.
    """
    mine, theirs = tee(records)
    scores = ordered_map(partial(_score_chunk, beta=beta), theirs, workers, chunk_size)
    for record, s in zip(mine, scores):
        yield ScoredTranslation(record, s)


def has_unk(record: AttentionRecord, unk_token: str = DEFAULT_UNK) -> bool:
    return unk_token in record.tgt


def remove_unk(
    scored: Iterable[ScoredTranslation], unk_token: str = DEFAULT_UNK
) -> tuple[list[ScoredTranslation], int]:
    """Drop translations whose target contains ``unk_token`` as a whole token."""
    if not unk_token:
        raise ValueError("unk_token must be non-empty")
    kept, removed = [], 0
    for item in scored:
        if has_unk(item.record, unk_token):
            removed += 1
        else:
            kept.append(item)
    return kept, removed


def keep_count(n: int, keep_fraction: float) -> int:
    """Number of records kept out of ``n``: ``floor(fraction * n)``, at least 1 when ``n > 0``.

    The fraction is taken at its decimal value, so 0.29 of 100 keeps 29
    rather than the 28 that binary floating point would give.
    """
    check_fraction(keep_fraction)
    k = int(Decimal(repr(float(keep_fraction))) * n)
    return 1 if k == 0 and n > 0 else k


def check_fraction(keep_fraction: float) -> None:
    if not (isinstance(keep_fraction, (int, float)) and 0.0 < keep_fraction <= 1.0):
        raise InvalidFraction(f"keep fraction must be in (0, 1], got {keep_fraction!r}")


def filter_top(
    scored: Sequence[ScoredTranslation],
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    removed_unk: int = 0,
) -> tuple[list[ScoredTranslation], FilterReport]:
    """Keep the best ``keep_fraction`` of ``scored`` by total score.

    Ties are resolved in favour of the earlier record.  The kept records come
    back in input order.  ``removed_unk`` only feeds the report.
    """
    start = time.perf_counter()
    n = len(scored)
    k = keep_count(n, keep_fraction)
    totals = np.fromiter((s.scores.total for s in scored), dtype=np.float64, count=n)
    order = np.argsort(-totals, kind="stable")
    chosen = np.sort(order[:k])
    kept = [scored[i] for i in chosen]
    report = FilterReport(
        total_in=n + removed_unk,
        removed_unk=removed_unk,
        kept=k,
        dropped=n - k,
        keep_fraction=keep_fraction,
        cutoff_score=float(totals[order[k - 1]]) if k else None,
        duration=time.perf_counter() - start,
    )
    return kept, report


def filter_corpus(
    records: Iterable[AttentionRecord],
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    unk_token: str = DEFAULT_UNK,
    workers: int = 1,
    beta: float | None = None,
) -> tuple[list[ScoredTranslation], FilterReport]:
    """In-memory version of the whole procedure: score, drop unk, keep the top fraction."""
    start = time.perf_counter()
    check_fraction(keep_fraction)
    remaining, removed = remove_unk(score_corpus(records, workers, beta), unk_token)
    kept, report = filter_top(remaining, keep_fraction, removed)
    report.duration = time.perf_counter() - start
    return kept, report


def filter_two_pass(
    open_records: Callable[[], Iterable[AttentionRecord]],
    emit: Callable[[ScoredTranslation], None],
    keep_fraction: float = DEFAULT_KEEP_FRACTION,
    unk_token: str = DEFAULT_UNK,
    workers: int = 1,
    beta: float | None = None,
) -> FilterReport:
    """Filter a corpus too large for memory by reading it twice.

    The first pass stores only one float per record to find the cutoff score;
    the second pass re-reads the input and calls ``emit`` for every kept
    record, in input order.  Records tied at the cutoff are kept in input
    order until the quota is filled, which gives exactly the same selection
    as :func:`filter_top`.

    Args:
        open_records: returns a fresh iterator over the same records each
            time it is called.
        emit: receives each kept record with its scores.
    """
    start = time.perf_counter()
    check_fraction(keep_fraction)
    if not unk_token:
        raise ValueError("unk_token must be non-empty")

    totals = array("d")
    removed = 0
    for item in score_corpus(open_records(), workers, beta):
        if has_unk(item.record, unk_token):
            removed += 1
        else:
            totals.append(item.scores.total)

    n = len(totals)
    k = keep_count(n, keep_fraction)
    values = np.frombuffer(totals, dtype=np.float64) if n else np.empty(0)
    cutoff = float(np.partition(values, n - k)[n - k]) if k else None
    tie_quota = k - int((values > cutoff).sum()) if k else 0

    def kept_records() -> Iterator[AttentionRecord]:
        nonlocal tie_quota
        idx = 0
        for record in open_records():
            if has_unk(record, unk_token):
                continue
            if idx >= n:
                raise AttnConfError("input changed between the two filtering passes", record_id=record.id)
            total = totals[idx]
            idx += 1
            if k and total > cutoff:
                yield record
            elif k and total == cutoff and tie_quota > 0:
                tie_quota -= 1
                yield record

    emitted = 0
    for item in score_corpus(kept_records(), workers, beta):
        emit(item)
        emitted += 1
    if emitted != k:
        raise AttnConfError("input changed between the two filtering passes")
    return FilterReport(
        total_in=n + removed,
        removed_unk=removed,
        kept=k,
        dropped=n - k,
        keep_fraction=keep_fraction,
        cutoff_score=cutoff,
        duration=time.perf_counter() - start,
    )


class ParallelWriter:
    """Writes kept translations as aligned source/target text plus a score table."""

    def __init__(self, src_out: TextIO | None, tgt_out: TextIO | None, score_out: TextIO | None, with_cp: bool = False):
        self.src_out = src_out
        self.tgt_out = tgt_out
        self.score_out = score_out
        self.with_cp = with_cp
        self.count = 0

    def __call__(self, item: ScoredTranslation) -> None:
        record = item.record
        if self.src_out is not None:
            self.src_out.write(" ".join(record.src) + "\n")
        if self.tgt_out is not None:
            self.tgt_out.write(" ".join(record.tgt) + "\n")
        if self.score_out is not None:
            if not self.count:
                self.score_out.write(score_table_header(self.with_cp))
            self.score_out.write(format_score_row(record.id, item.scores, self.with_cp))
        self.count += 1


def emit_parallel(
    kept: Iterable[ScoredTranslation],
    src_out: TextIO | None,
    tgt_out: TextIO | None,
    score_out: TextIO | None,
    with_cp: bool = False,
) -> int:
    """Write line-aligned source and target sentences (tokens joined by spaces)
    and a TSV table of id, cdp, ap_out, ap_in, total.

    The score table gets a ``#`` header line only when it has rows, so an
    empty input leaves all three outputs empty.  Returns the record count.
    """
    writer = ParallelWriter(src_out, tgt_out, score_out, with_cp)
    for item in kept:
        writer(item)
    return writer.count
