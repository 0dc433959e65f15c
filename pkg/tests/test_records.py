import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attnconf.errors import (
    DimensionMismatch,
    DuplicateId,
    InvalidWeight,
    NonFinite,
    ParseError,
    RowSumViolation,
    ScoreOutOfRange,
)
from attnconf.metrics import ConfidenceScores, confidence
from attnconf.records import (
    AttentionRecord,
    HumanJudgment,
    average_judgments,
    format_record,
    read_external_scores,
    read_judgments,
    read_records,
    read_score_table,
    write_records,
    write_score_table,
)

from .helpers import make_record, random_records


def line(**fields):
    base = {"id": "s1", "src": ["a", "b"], "tgt": ["x", "y"], "attn": [[0.9, 0.1], [0.2, 0.8]]}
    base.update(fields)
    return json.dumps({k: v for k, v in base.items() if v is not None})


def assert_same(r1, r2):
    assert r1.id == r2.id and r1.src == r2.src and r1.tgt == r2.tgt
    assert r1.system == r2.system and dict(r1.meta) == dict(r2.meta)
    np.testing.assert_array_equal(r1.attn, r2.attn)


def test_well_formed_record():
    [rec] = read_records([line(system="nt", meta={"k": "v"}, extra=[1, 2])])
    assert rec.id == "s1" and rec.src == ("a", "b") and rec.tgt == ("x", "y")
    assert rec.attn.shape == (2, 2) and rec.system == "nt" and rec.meta == {"k": "v"}
    assert not rec.attn.flags.writeable


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch) as err:
        list(read_records([line(tgt=["x", "y", "z"])]))
    assert err.value.record_id == "s1" and err.value.line_no == 1
    with pytest.raises(DimensionMismatch):
        list(read_records([line(attn=[[1.0], [0.5, 0.5]])]))
    with pytest.raises(DimensionMismatch):
        list(read_records([line(src=[])]))


def test_row_sum_drift_strict_vs_lenient():
    drifting = line(attn=[[0.5, 0.499], [0.2, 0.8]])
    with pytest.raises(RowSumViolation):
        list(read_records([drifting], "strict"))
    [rec] = read_records([drifting], "lenient")
    np.testing.assert_allclose(rec.attn.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    assert rec.meta["renormalized"] == "true"
    np.testing.assert_array_equal(rec.attn[1], [0.2, 0.8])  # rows within tolerance stay untouched


def test_small_drift_within_tolerance_is_accepted_as_is():
    [rec] = read_records([line(attn=[[0.5, 0.49995], [0.2, 0.8]])], "strict")
    assert rec.attn[0, 1] == 0.49995 and "renormalized" not in rec.meta


def test_zero_row_cannot_be_renormalized():
    with pytest.raises(RowSumViolation):
        list(read_records([line(attn=[[0.0, 0.0], [0.2, 0.8]])], "lenient"))


@pytest.mark.parametrize("attn", [[[1.2, -0.2], [0.5, 0.5]], [[float("nan"), 1.0], [0.5, 0.5]]])
def test_invalid_weights(attn):
    text = json.dumps({"id": "w", "src": ["a", "b"], "tgt": ["x", "y"], "attn": attn})
    with pytest.raises(InvalidWeight):
        list(read_records([text], "lenient"))


@pytest.mark.parametrize(
    "text",
    ["not json", "[1, 2]", line(id=""), line(src="a b"), line(attn=[["0.5", 0.5], [1, 0]]),
     line(attn=[[True, False], [1, 0]]), line(system=3), line(meta={"k": 1})],
)
def test_parse_errors(text):
    with pytest.raises(ParseError) as err:
        list(read_records(["", text]))
    assert err.value.line_no == 2


def test_missing_attn_is_parse_error():
    text = json.dumps({"id": "s", "src": ["a"], "tgt": ["b"]})
    with pytest.raises(ParseError):
        list(read_records([text]))


def test_duplicate_ids():
    with pytest.raises(DuplicateId) as err:
        list(read_records([line(), line()]))
    assert err.value.line_no == 2
    assert len(list(read_records([line(), line()], check_duplicates=False))) == 2


def test_raw_mode_checks_only_finiteness():
    [rec] = read_records([line(attn=[[3.0, -7.0], [0.0, 12.5]])], raw=True)
    assert rec.attn.tolist() == [[3.0, -7.0], [0.0, 12.5]]
    with pytest.raises(NonFinite):
        list(read_records(['{"id": "s", "src": ["a"], "tgt": ["b"], "attn": [[Infinity]]}'], raw=True))


def test_unknown_mode():
    with pytest.raises(ValueError):
        list(read_records([line()], "sloppy"))


def test_record_constructor_validates_shape():
    with pytest.raises(DimensionMismatch):
        AttentionRecord("x", ["a"], ["b", "c"], [[1.0]])


# -- writing ---------------------------------------------------------------


def test_write_empty_and_single():
    assert list(write_records([])) == []
    out = list(write_records([make_record("one", np.eye(2))]))
    assert len(out) == 1 and out[0].endswith("}\n") and out[0].count("\n") == 1


def test_weights_use_17_significant_digits():
    rec = make_record("p", [[0.1, 0.9]])
    text = format_record(rec)
    assert "0.10000000000000001" in text
    assert json.loads(text)["attn"] == [[0.1, 0.9]]


def test_tokens_round_trip_byte_exact():
    tokens = ["Ā", "naïve", '"q"', "tab\there", "\\", "emoji\U0001F600", "<unk>", "", " "]
    rec = AttentionRecord("ü-1", tokens, ["x"], np.full((1, len(tokens)), 1 / len(tokens)), meta={"ключ": "значение"})
    [back] = read_records(write_records([rec]))
    assert back.src == tuple(tokens)
    assert [t.encode() for t in back.src] == [t.encode() for t in tokens]
    assert_same(rec, back)


def test_round_trip_1000_random_records():
    records = random_records(5, 1000, max_len=12)
    back = list(read_records(write_records(records)))
    assert len(back) == 1000
    for r1, r2 in zip(records, back):
        assert_same(r1, r2)


@settings(max_examples=100)
@given(st.lists(st.lists(st.floats(0, 1e6, allow_subnormal=True), min_size=1, max_size=5), min_size=1, max_size=5))
def test_weight_serialization_is_bit_exact(values):
    width = len(values[0])
    rows = [(row * width)[:width] for row in values]
    rec = AttentionRecord("h", ["s"] * width, ["t"] * len(rows), rows)
    [back] = read_records(write_records([rec]), raw=True)
    np.testing.assert_array_equal(back.attn, rec.attn)


# -- judgments, external scores, score tables --------------------------------


def test_read_judgments():
    text = ["# id\tscore_a\tscore_b\n", "s1\t4\t2\n", "\n", "s2\t3.5\t3.5\n"]
    j1, j2 = read_judgments(text)
    assert (j1.id, j1.score_a, j1.score_b) == ("s1", 4.0, 2.0)
    assert j1.preference == "A" and j2.preference is None


@pytest.mark.parametrize("text, exc", [("s3\t6\t1", ScoreOutOfRange), ("s3\t0.5\t1", ScoreOutOfRange),
                                       ("s3\t4", ParseError), ("s3\tgood\t1", ParseError),
                                       ("s3\tnan\t1", ParseError), ("\t1\t1", ParseError)])
def test_bad_judgments(text, exc):
    with pytest.raises(exc) as err:
        list(read_judgments(["s0\t1\t1", text]))
    assert err.value.line_no == 2


def test_average_judgments_keeps_order():
    js = [HumanJudgment("b", 5, 1), HumanJudgment("a", 2, 2), HumanJudgment("b", 2, 4)]
    assert average_judgments(js) == [HumanJudgment("b", 3.5, 2.5), HumanJudgment("a", 2, 2)]


def test_external_scores():
    assert read_external_scores(["#id\tscore", "a\t-12.5", "b\t3"]) == {"a": -12.5, "b": 3.0}
    with pytest.raises(DuplicateId):
        read_external_scores(["a\t1", "a\t2"])


def test_score_table_round_trip():
    rows = [(f"r{k}", confidence(r.attn, beta=1.0)) for k, r in enumerate(random_records(2, 20))]
    buf = io.StringIO()
    assert write_score_table(rows, buf, with_cp=True) == 20
    text = buf.getvalue()
    assert text.startswith("#id\tcdp\tap_out\tap_in\ttotal\tcp\n")
    assert read_score_table(io.StringIO(text)) == dict(rows)


def test_empty_score_table_is_empty():
    buf = io.StringIO()
    assert write_score_table([], buf) == 0 and buf.getvalue() == ""


def test_score_table_without_cp():
    buf = io.StringIO()
    write_score_table([("a", ConfidenceScores(-1.0, -2.0, -3.0, -6.0))], buf)
    assert read_score_table(buf.getvalue().splitlines()) == {"a": ConfidenceScores(-1.0, -2.0, -3.0, -6.0)}
