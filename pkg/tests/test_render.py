import os
import xml.etree.ElementTree as ET
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path

import numpy as np
import pytest

from attnconf.filtering import score_corpus
from attnconf.metrics import ConfidenceScores, confidence
from attnconf.records import AttentionRecord, read_records
from attnconf.render import (
    HeatmapSpec,
    caption_for,
    file_stem,
    format_score,
    render_batch,
    render_heatmap,
)

from . import oracles

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = FIXTURES / "golden"
NS = {"svg": "http://www.w3.org/2000/svg"}


def fixture_records():
    with open(FIXTURES / "render_fixtures.jsonl", encoding="utf-8") as f:
        return list(read_records(f))


def svg_for(attn, src=None, tgt=None, **kw):
    attn = np.asarray(attn, dtype=float)
    src = src or [f"s{j}" for j in range(attn.shape[1])]
    tgt = tgt or [f"t{i}" for i in range(attn.shape[0])]
    rec = AttentionRecord("r", src, tgt, attn)
    return render_heatmap(HeatmapSpec(rec, confidence(attn), **kw))


def test_format_score():
    assert format_score(-0.0) == "0.000"
    assert format_score(-0.0004) == "0.000"
    assert format_score(-1.3862943611198906) == "-1.386"
    # rounding follows the exact binary value, half-even on exact halves
    for x in (0.0125, -2.0005, 0.0625, -0.1875, 2.5e-4, 1.2345):
        expected = str(Decimal(x).quantize(Decimal("0.001"), ROUND_HALF_EVEN))
        assert format_score(x) == expected
    assert format_score(0.0625) == "0.062"


def test_captions():
    assert caption_for(confidence([[1.0]])) == "CDP=0.000, AP_out=0.000, AP_in=0.000, Total=0.000"
    assert caption_for(confidence(np.full((2, 2), 0.5))) == "CDP=0.000, AP_out=-0.693, AP_in=-0.693, Total=-1.386"


def test_caption_values_match_oracle():
    for rec in fixture_records():
        ref = oracles.scores(rec.attn.tolist())
        expected = ", ".join(f"{name}={ref[key]:.3f}".replace("=-0.000", "=0.000")
                             for name, key in (("CDP", "cdp"), ("AP_out", "ap_out"), ("AP_in", "ap_in"), ("Total", "total")))
        assert caption_for(confidence(rec.attn)) == expected


def test_svg_parses_and_has_one_cell_per_weight():
    rng = np.random.default_rng(1)
    attn = rng.dirichlet(np.ones(14), size=12)
    root = ET.fromstring(svg_for(attn))
    cells = root.findall("svg:g[@class='cells']/svg:rect", NS)
    assert len(cells) == 12 * 14
    assert {c.get("width") for c in cells} == {"18"}
    opacities = [float(c.get("fill-opacity")) for c in cells]
    np.testing.assert_allclose(opacities, attn.ravel(), atol=5e-5)


def test_half_weight_is_half_opacity():
    root = ET.fromstring(svg_for([[0.5, 0.5]]))
    assert [c.get("fill-opacity") for c in root.findall("svg:g[@class='cells']/svg:rect", NS)] == ["0.5", "0.5"]


def test_cell_size_and_viridis():
    root = ET.fromstring(svg_for([[0.0, 1.0]], cell_size=30, color_ramp="viridis"))
    cells = root.findall("svg:g[@class='cells']/svg:rect", NS)
    assert [c.get("width") for c in cells] == ["30", "30"]
    assert [c.get("fill") for c in cells] == ["#440154", "#fde725"]
    with pytest.raises(ValueError):
        HeatmapSpec(AttentionRecord("r", ["a"], ["b"], [[1.0]]), ConfidenceScores(0, 0, 0, 0), color_ramp="jet")


def test_labels_survive_escaping():
    src = ["<b>", "a&b", '"q"', "x" * 40]
    tgt = ["it's", "\x01ctl"]
    attn = np.full((2, 4), 0.25)
    root = ET.fromstring(svg_for(attn, src, tgt))
    source = root.findall("svg:g[@class='source']/svg:text", NS)
    assert [t.text for t in source[:3]] == src[:3]
    long_label = source[3]
    assert long_label.find("svg:title", NS).text == "x" * 40
    assert long_label.find("svg:title", NS).tail == "x" * 15 + "…"
    target = [t.text for t in root.findall("svg:g[@class='target']/svg:text", NS)]
    assert target == ["it's", "�ctl"]


def test_render_is_deterministic():
    rec = fixture_records()[2]
    spec = HeatmapSpec(rec, confidence(rec.attn))
    assert render_heatmap(spec) == render_heatmap(HeatmapSpec(rec, confidence(rec.attn)))


def test_goldens(tmp_path):
    paths = render_batch(score_corpus(fixture_records()), str(tmp_path))
    names = sorted(os.listdir(tmp_path))
    assert names == sorted(os.listdir(GOLDEN))
    for name in names:
        assert (tmp_path / name).read_bytes() == (GOLDEN / name).read_bytes(), name
    assert len(paths) == 4


def test_batch_rejects_colliding_names(tmp_path):
    recs = [AttentionRecord(i, ["a"], ["b"], [[1.0]]) for i in ("a/b", "a_b")]
    with pytest.raises(ValueError):
        render_batch(score_corpus(recs), str(tmp_path))


def test_file_stem():
    assert file_stem("s1") == "s1"
    assert file_stem("../etc/passwd") == "_etc_passwd"
    assert file_stem("...") == "_"
