"""Attention-based confidence scores.

All matrices are output-major: ``attn[i, j]`` is the attention that output
token ``i`` pays to input token ``j``, so each row is a probability
distribution over the input tokens.  Logarithms are natural.

The combined confidence of a translation is ``cdp + ap_out + ap_in``.  Every
component is non-positive and equals 0 for a perfect one-to-one alignment, so
higher (closer to 0) means a more focused, better covered translation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, EmptyMatrix, InvalidBeta, InvalidWeight, NonFinite

# columns at or below this mass are treated as unattended by ap_in
ZERO_COVERAGE = 1e-12
# lower clamp for coverage inside the CP logarithm
CP_EPSILON = 1e-12
DEFAULT_BETA = 1.0

SCORE_FIELDS = ("cdp", "ap_out", "ap_in", "total")


@dataclass(frozen=True)
class ConfidenceScores:
    """Scores of one attention matrix.

    ``total`` is always ``cdp + ap_out + ap_in`` evaluated left to right.
    ``cp`` is the classic coverage penalty, kept only as a baseline; it never
    contributes to ``total``.
    """

    cdp: float
    ap_out: float
    ap_in: float
    total: float
    cp: Optional[float] = None

    def as_dict(self) -> dict:
        d = asdict(self)
        if self.cp is None:
            del d["cp"]
        return d


_TINY = np.finfo(np.float64).tiny
_sum = np.add.reduce
_min = np.minimum.reduce
_max = np.maximum.reduce


def _as_matrix(values) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    if a.ndim != 2:
        if a.size == 0:
            raise EmptyMatrix("attention matrix is empty")
        raise DimensionMismatch(f"expected a 2-d matrix, got {a.ndim} dimension(s)")
    if a.shape[0] == 0 or a.shape[1] == 0:
        raise EmptyMatrix(f"attention matrix has shape {a.shape}")
    return a


def _as_attention(values, check_inf: bool = True) -> np.ndarray:
    a = _as_matrix(values)
    # NaN fails the first comparison; callers passing check_inf=False catch +inf themselves
    if not (_min(a, None) >= 0.0 and (not check_inf or _max(a, None) < math.inf)):
        if not np.isfinite(a).all():
            raise NonFinite("attention matrix contains NaN or infinite weights")
        raise InvalidWeight("attention matrix contains negative weights")
    return a


def softmax_normalize(raw) -> np.ndarray:
    """Turn raw attention energies into row-stochastic attention weights.

    Each row is shifted by its maximum before exponentiation, which keeps the
    result exact for very large energies and makes the output independent of
    any constant added to a row.
    """
    e = _as_matrix(raw)
    if not np.isfinite(e).all():
        raise NonFinite("raw attention energies contain NaN or infinite values")
    shifted = np.exp(e - e.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def coverage_per_input(attn) -> np.ndarray:
    """Total attention mass each input token receives (column sums)."""
    return _sum(_as_attention(attn), 0)


def coverage_penalty(attn, beta: float = DEFAULT_BETA) -> float:
    """Coverage penalty ``beta * sum_j log(min(coverage_j, 1))``.

    Only under-covered inputs are punished; a token attended twice scores the
    same as one attended once.  Not length normalized.
    """
    _check_beta(beta)
    return _cp_from_coverage(coverage_per_input(attn), beta)


def _check_beta(beta) -> None:
    if not beta > 0 or not math.isfinite(beta):
        raise InvalidBeta(f"beta must be a positive finite number, got {beta!r}")


def _cp_from_coverage(coverage: np.ndarray, beta: float) -> float:
    clamped = np.maximum(np.minimum(coverage, 1.0), CP_EPSILON)
    return 0.0 + beta * float(_sum(np.log(clamped)))


def cdp_from_coverage(coverage) -> float:
    """Coverage deviation penalty of a coverage vector.

    Exposed separately so the penalty can be probed with synthetic coverage
    values that no real matrix would produce.
    """
    c = np.asarray(coverage, dtype=np.float64)
    if c.ndim != 1 or c.size == 0:
        raise EmptyMatrix("coverage vector must be 1-d and non-empty")
    return _cdp(c)


def _cdp(coverage: np.ndarray) -> float:
    deviation = 1.0 - coverage
    return 0.0 - float(_sum(np.log1p(deviation * deviation))) / coverage.size


def coverage_deviation_penalty(attn) -> float:
    """Length-normalized log penalty for input coverage away from 1 in either direction."""
    return cdp_from_coverage(coverage_per_input(attn))


def _neg_plogp(a: np.ndarray) -> np.ndarray:
    # zeros are lifted to the smallest normal double, so 0 * log 0 comes out as 0
    return a * -np.log(np.maximum(a, _TINY))


def _clamp(value: float, lo: float) -> float:
    # the exact value lies in [lo, 0]; rounding may step a few ulps outside
    return 0.0 - min(max(value, 0.0), -lo)


def _ap_out(neg_plogp: np.ndarray) -> float:
    n_out, n_in = neg_plogp.shape
    return _clamp(float(_sum(neg_plogp, None)) / n_out, -math.log(n_in))


def _ap_in(neg_plogp: np.ndarray, coverage: np.ndarray) -> float:
    n_out, n_in = neg_plogp.shape
    col = _sum(neg_plogp, 0)
    # entropy of column j renormalized by its coverage c_j:
    #   -sum_i (a_ij / c_j) log(a_ij / c_j) = log c_j - sum_i a_ij log a_ij / c_j
    max_h = math.log(n_out)
    if _min(coverage) > ZERO_COVERAGE:
        total = float(_sum(np.log(coverage) + col / coverage))
    else:
        empty = coverage <= ZERO_COVERAGE
        safe = np.where(empty, 1.0, coverage)
        total = float(_sum(np.where(empty, max_h, np.log(safe) + col / safe)))
    return _clamp(total / n_in, -max_h)


def absentmindedness_out(attn) -> float:
    """Negated mean entropy of the output tokens' attention distributions.

    Lies in ``[-log J, 0]`` and is 0 exactly when every row is one-hot.
    """
    return _ap_out(_neg_plogp(_as_attention(attn)))


def absentmindedness_in(attn) -> float:
    """Negated mean entropy of the input tokens' coverage-normalized columns.

    A column that receives no attention at all counts as maximally dispersed
    (entropy ``log I_out``).
    """
    a = _as_attention(attn)
    return _ap_in(_neg_plogp(a), _sum(a, 0))


def confidence(attn, beta: float | None = None) -> ConfidenceScores:
    """Compute all scores for one attention matrix.

    Args:
        attn: output-by-input attention weights, rows summing to 1.
        beta: when given, also compute the coverage penalty baseline with
            this weight.
    """
    a = _as_attention(attn, check_inf=False)
    coverage = _sum(a, 0)
    cdp = _cdp(coverage)
    if not math.isfinite(cdp):
        raise NonFinite("attention matrix contains infinite weights")
    neg_plogp = _neg_plogp(a)
    ap_out = _ap_out(neg_plogp)
    ap_in = _ap_in(neg_plogp, coverage)
    cp = None
    if beta is not None:
        _check_beta(beta)
        cp = _cp_from_coverage(coverage, beta)
    return ConfidenceScores(cdp=cdp, ap_out=ap_out, ap_in=ap_in, total=cdp + ap_out + ap_in, cp=cp)
