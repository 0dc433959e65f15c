"""Agreement between confidence scores and pairwise human judgments.

Humans compared two translations (A and B) of the same sentence, so only
within-pair comparisons exist.  Kendall's tau then reduces to counting the
pairs where the metric and the humans prefer the same side (``pos``) or
opposite sides (``neg``): ``tau = (pos - neg) / (pos + neg)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union

from .errors import NoComparablePairs
from .hybrid import A, B, HybridChoice
from .metrics import ConfidenceScores
from .records import HumanJudgment, average_judgments

# fixed report column order
TAU_METRICS = ("cdp", "ap_in", "ap_out", "total")


@dataclass(frozen=True)
class PairedComparison:
    id: str
    human_delta: float
    metric_delta: float


@dataclass(frozen=True)
class TauResult:
    tau: float
    pos: int
    neg: int
    excluded_human_ties: int
    excluded_metric_ties: int


def _sign(x: float) -> int:
    return (x > 0) - (x < 0)


def kendall_tau(pairs: Iterable[PairedComparison]) -> TauResult:
    """Sign-agreement tau over pairs with a strict human preference.

    Pairs where the metric scores both sides identically are excluded as
    well and counted in ``excluded_metric_ties``.
    """
    pos = neg = human_ties = metric_ties = 0
    for p in pairs:
        h = _sign(p.human_delta)
        if h == 0:
            human_ties += 1
            continue
        m = _sign(p.metric_delta)
        if m == 0:
            metric_ties += 1
        elif m == h:
            pos += 1
        else:
            neg += 1
    if pos + neg == 0:
        raise NoComparablePairs(
            f"no pair has both a human and a metric preference "
            f"({human_ties} human ties, {metric_ties} metric ties)"
        )
    return TauResult((pos - neg) / (pos + neg), pos, neg, human_ties, metric_ties)


ScoreLike = Union[ConfidenceScores, float]


def _value(score: ScoreLike, metric: str) -> float:
    if isinstance(score, ConfidenceScores):
        return getattr(score, metric)
    return float(score)


def paired_comparisons(
    judgments: Iterable[HumanJudgment],
    scores_a: Mapping[str, ScoreLike],
    scores_b: Mapping[str, ScoreLike],
    metric: str = "total",
) -> list[PairedComparison]:
    """Join judgments with both systems' scores; ids missing anywhere are skipped.

    Repeated judgments of one sentence are averaged first.
    """
    out = []
    for j in average_judgments(judgments):
        if j.id in scores_a and j.id in scores_b:
            out.append(
                PairedComparison(
                    j.id,
                    j.score_a - j.score_b,
                    _value(scores_a[j.id], metric) - _value(scores_b[j.id], metric),
                )
            )
    return out


def per_metric_tau(
    judgments: Iterable[HumanJudgment],
    scores_a: Mapping[str, ConfidenceScores],
    scores_b: Mapping[str, ConfidenceScores],
) -> dict[str, TauResult]:
    """Tau for each component score and the combined total."""
    judgments = average_judgments(judgments)
    return {m: kendall_tau(paired_comparisons(judgments, scores_a, scores_b, m)) for m in TAU_METRICS}


# ---------------------------------------------------------------------------
# selection overlap


@dataclass(frozen=True)
class OverlapCounts:
    matches: int
    compared: int
    human_ties: int
    unselected: int

    @property
    def percent(self) -> float:
        return 100.0 * self.matches / self.compared


Selection = Union[Mapping[str, str], Iterable[HybridChoice]]


def _as_selection(choices: Selection) -> dict[str, str]:
    if isinstance(choices, Mapping):
        return dict(choices)
    return {c.id: c.winner for c in choices}


def selection_from_scores(
    scores_a: Mapping[str, ScoreLike],
    scores_b: Mapping[str, ScoreLike],
    tie_break: str = A,
    metric: str = "total",
) -> dict[str, str]:
    """Prefer the side with the higher score, for ids scored on both sides.

    Works with confidence tables as well as external scores such as
    negated language-model perplexities.
    """
    out = {}
    for key, sa in scores_a.items():
        if key in scores_b:
            va, vb = _value(sa, metric), _value(scores_b[key], metric)
            out[key] = A if va > vb else B if vb > va else tie_break
    return out


def selection_from_membership(kept_a: Iterable[str], kept_b: Iterable[str]) -> dict[str, str]:
    """Turn two filtering results into a preference.

    A sentence whose translation survived filtering on exactly one side counts
    as selecting that side; kept or dropped on both sides it is undecided.
    """
    kept_a, kept_b = set(kept_a), set(kept_b)
    selection = {i: A for i in kept_a - kept_b}
    selection.update({i: B for i in kept_b - kept_a})
    return selection


def overlap_counts(choices: Selection, judgments: Iterable[HumanJudgment]) -> OverlapCounts:
    selection = _as_selection(choices)
    matches = compared = ties = unselected = 0
    for j in average_judgments(judgments):
        preferred = j.preference
        if preferred is None:
            ties += 1
            continue
        picked = selection.get(j.id)
        if picked is None:
            unselected += 1
            continue
        compared += 1
        matches += picked == preferred
    if not compared:
        raise NoComparablePairs(f"no judged item with a strict human preference and a selection ({ties} human ties)")
    return OverlapCounts(matches, compared, ties, unselected)


def selection_overlap(choices: Selection, judgments: Iterable[HumanJudgment]) -> float:
    """Percentage of strictly preferred judged items where the selection picks the human's side."""
    return overlap_counts(choices, judgments).percent


def selection_agreement(first: Selection, second: Selection) -> float:
    """Percentage of commonly selected ids on which two methods pick the same side."""
    s1, s2 = _as_selection(first), _as_selection(second)
    common = [k for k in s1 if k in s2]
    if not common:
        raise NoComparablePairs("the two selections share no ids")
    return 100.0 * sum(s1[k] == s2[k] for k in common) / len(common)


def format_tau_table(results: Mapping[str, TauResult], label: Optional[str] = None) -> str:
    """Render tau results as TSV, one metric per row."""
    lines = ["#metric\ttau\tpos\tneg\thuman_ties\tmetric_ties"]
    for metric, r in results.items():
        lines.append(f"{metric}\t{r.tau:.3f}\t{r.pos}\t{r.neg}\t{r.excluded_human_ties}\t{r.excluded_metric_ties}")
    if label:
        lines.insert(0, f"# {label}")
    return "\n".join(lines) + "\n"
