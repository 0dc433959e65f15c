"""Confidence scores for neural machine translation from attention matrices."""

__version__ = "0.1.0"

from .errors import AttnConfError
from .metrics import (
    ConfidenceScores,
    absentmindedness_in,
    absentmindedness_out,
    confidence,
    coverage_deviation_penalty,
    coverage_penalty,
    coverage_per_input,
    softmax_normalize,
)
from .records import AttentionRecord, HumanJudgment, read_judgments, read_records, write_records

__all__ = [
    "AttnConfError",
    "AttentionRecord",
    "ConfidenceScores",
    "HumanJudgment",
    "absentmindedness_in",
    "absentmindedness_out",
    "confidence",
    "coverage_deviation_penalty",
    "coverage_penalty",
    "coverage_per_input",
    "read_judgments",
    "read_records",
    "softmax_normalize",
    "write_records",
]
