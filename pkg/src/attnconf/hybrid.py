"""Sentence-level hybrid combination of two systems' translations.

For every source sentence the translation with the higher confidence total
wins.  Exact ties go to a configurable default side and are tallied
separately.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable, TextIO

from .errors import DuplicateId, IdMismatch, UnmatchedId
from .filtering import ScoredTranslation
from .records import LENIENT, MODES, STRICT

A = "A"
B = "B"
SIDES = (A, B)


@dataclass(frozen=True, eq=False)
class HybridChoice:
    id: str
    winner: str
    margin: float
    chosen: ScoredTranslation
    total_a: float
    total_b: float

    @property
    def tie(self) -> bool:
        return self.total_a == self.total_b


@dataclass
class HybridReport:
    n: int = 0
    wins_a: int = 0
    wins_b: int = 0
    ties: int = 0
    mean_margin: float = 0.0
    unmatched: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _check_side(tie_break: str) -> None:
    if tie_break not in SIDES:
        raise ValueError(f"tie_break must be 'A' or 'B', got {tie_break!r}")


def select_pair(a: ScoredTranslation, b: ScoredTranslation, tie_break: str = A) -> HybridChoice:
    """Pick the translation with the strictly greater total, ``tie_break`` on equality."""
    _check_side(tie_break)
    if a.id != b.id:
        raise IdMismatch(f"cannot compare translations of different sentences ({a.id!r} vs {b.id!r})", record_id=a.id)
    ta, tb = a.total, b.total
    if ta > tb:
        winner = A
    elif tb > ta:
        winner = B
    else:
        winner = tie_break
    return HybridChoice(
        id=a.id,
        winner=winner,
        margin=abs(ta - tb),
        chosen=a if winner == A else b,
        total_a=ta,
        total_b=tb,
    )


def hybrid_corpus(
    stream_a: Iterable[ScoredTranslation],
    stream_b: Iterable[ScoredTranslation],
    tie_break: str = A,
    mode: str = STRICT,
) -> tuple[list[HybridChoice], HybridReport]:
    """Select per sentence between two scored streams joined on record id.

    Stream B is indexed in memory; stream A drives the output order.  In
    strict mode an id present in only one stream raises
    :class:`UnmatchedId`; in lenient mode it is skipped and counted.
    """
    _check_side(tie_break)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    by_id: dict[str, ScoredTranslation] = {}
    for item in stream_b:
        if item.id in by_id:
            raise DuplicateId("duplicate id in stream B", record_id=item.id)
        by_id[item.id] = item

    choices: list[HybridChoice] = []
    report = HybridReport()
    seen: set[str] = set()
    margin_sum = 0.0
    for a in stream_a:
        if a.id in seen:
            raise DuplicateId("duplicate id in stream A", record_id=a.id)
        seen.add(a.id)
        b = by_id.pop(a.id, None)
        if b is None:
            if mode == LENIENT:
                report.unmatched += 1
                continue
            raise UnmatchedId("id missing from stream B", record_id=a.id)
        choice = select_pair(a, b, tie_break)
        choices.append(choice)
        report.n += 1
        if choice.winner == A:
            report.wins_a += 1
        else:
            report.wins_b += 1
        if choice.tie:
            report.ties += 1
        margin_sum += choice.margin
    if by_id:
        if mode == STRICT:
            raise UnmatchedId("id missing from stream A", record_id=next(iter(by_id)))
        report.unmatched += len(by_id)
    report.mean_margin = margin_sum / report.n if report.n else 0.0
    return choices, report


def write_decision_log(choices: Iterable[HybridChoice], out: TextIO) -> int:
    """TSV of id, winner, total_a, total_b, margin with a ``#`` header before the first row."""
    n = 0
    for c in choices:
        if not n:
            out.write("#id\twinner\ttotal_a\ttotal_b\tmargin\n")
        out.write(f"{c.id}\t{c.winner}\t{c.total_a!r}\t{c.total_b!r}\t{c.margin!r}\n")
        n += 1
    return n
