"""Static SVG attention heat maps with score captions.

Layout: source tokens label the columns (rotated, above the grid), target
tokens label the rows (left of the grid), the caption sits below.  Cell
opacity is the attention weight itself.  Output contains no timestamps or
environment data, so identical input renders to identical bytes.
"""

from __future__ import annotations

import html
import os
import re
from dataclasses import dataclass
from typing import Iterable

from .filtering import ScoredTranslation
from .metrics import ConfidenceScores
from .records import AttentionRecord

GRAYSCALE = "grayscale"
VIRIDIS = "viridis"
RAMPS = (GRAYSCALE, VIRIDIS)

MAX_LABEL = 16
ELLIPSIS = "\u2026"
CHAR_WIDTH = 7
FONT_SIZE = 11
PAD = 8

# viridis sampled at 0, 0.25, 0.5, 0.75, 1
_VIRIDIS = ((68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37))
_XML_INVALID = re.compile("[\x00-\x08\x0b\x0c\x0e-\x1f\ud800-\udfff\ufffe\uffff]")


def format_score(x: float) -> str:
    """Three decimals, round-half-even, never ``-0.000``."""
    text = format(x, ".3f")
    return "0.000" if text == "-0.000" else text


def caption_for(scores: ConfidenceScores) -> str:
    return (
        f"CDP={format_score(scores.cdp)}, AP_out={format_score(scores.ap_out)}, "
        f"AP_in={format_score(scores.ap_in)}, Total={format_score(scores.total)}"
    )


@dataclass(frozen=True, eq=False)
class HeatmapSpec:
    record: AttentionRecord
    scores: ConfidenceScores
    cell_size: int = 18
    color_ramp: str = GRAYSCALE

    def __post_init__(self):
        if self.color_ramp not in RAMPS:
            raise ValueError(f"unknown color ramp {self.color_ramp!r}")
        if self.cell_size < 1:
            raise ValueError("cell_size must be positive")

    @property
    def caption(self) -> str:
        return caption_for(self.scores)


def _esc(text: str) -> str:
    return html.escape(_XML_INVALID.sub("\ufffd", text), quote=True)


def _label(token: str) -> str:
    if len(token) <= MAX_LABEL:
        return _esc(token)
    return f"<title>{_esc(token)}</title>{_esc(token[: MAX_LABEL - 1] + ELLIPSIS)}"


def _label_width(tokens) -> int:
    return min(max(len(t) for t in tokens), MAX_LABEL) * CHAR_WIDTH + PAD


def _color(weight: float, ramp: str) -> str:
    if ramp == GRAYSCALE:
        return "#000000"
    pos = min(max(weight, 0.0), 1.0) * (len(_VIRIDIS) - 1)
    i = min(int(pos), len(_VIRIDIS) - 2)
    t = pos - i
    lo, hi = _VIRIDIS[i], _VIRIDIS[i + 1]
    return "#" + "".join(f"{round(a + (b - a) * t):02x}" for a, b in zip(lo, hi))


def _opacity(weight: float) -> str:
    text = format(min(max(weight, 0.0), 1.0), ".4f")
    return text.rstrip("0").rstrip(".") if "." in text else text


def render_heatmap(spec: HeatmapSpec) -> str:
    """Render one record as an SVG document (a str ending in a newline)."""
    record, cs = spec.record, spec.cell_size
    n_out, n_in = record.attn.shape
    left = _label_width(record.tgt) + PAD
    top = _label_width(record.src) + PAD
    grid_w, grid_h = n_in * cs, n_out * cs
    width = left + grid_w + PAD
    height = top + grid_h + 2 * PAD + FONT_SIZE
    caption_width = len(spec.caption) * CHAR_WIDTH + 2 * PAD
    width = max(width, caption_width)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="{FONT_SIZE}">',
        f"<title>{_esc(record.id)}</title>",
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
        '<g class="source">',
    ]
    for j, token in enumerate(record.src):
        x = left + j * cs + cs // 2 + FONT_SIZE // 3
        y = top - PAD // 2
        out.append(f'<text x="{x}" y="{y}" transform="rotate(-90 {x} {y})">{_label(token)}</text>')
    out.append("</g>")
    out.append('<g class="target" text-anchor="end">')
    for i, token in enumerate(record.tgt):
        y = top + i * cs + cs // 2 + FONT_SIZE // 3
        out.append(f'<text x="{left - PAD // 2}" y="{y}">{_label(token)}</text>')
    out.append("</g>")
    out.append('<g class="cells">')
    for i, row in enumerate(record.attn.tolist()):
        for j, w in enumerate(row):
            out.append(
                f'<rect x="{left + j * cs}" y="{top + i * cs}" width="{cs}" height="{cs}" '
                f'fill="{_color(w, spec.color_ramp)}" fill-opacity="{_opacity(w)}"/>'
            )
    out.append("</g>")
    out.append(
        f'<rect x="{left}" y="{top}" width="{grid_w}" height="{grid_h}" fill="none" stroke="#888888"/>'
    )
    out.append(f'<text class="caption" x="{PAD}" y="{top + grid_h + PAD + FONT_SIZE}">{_esc(spec.caption)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def file_stem(record_id: str) -> str:
    """Filesystem-safe name for a record id."""
    stem = re.sub(r"[^A-Za-z0-9._-]", "_", record_id).lstrip(".")
    return stem or "_"


def render_batch(
    items: Iterable[ScoredTranslation],
    out_dir: str,
    cell_size: int = 18,
    color_ramp: str = GRAYSCALE,
) -> list[str]:
    """Write ``<id>.svg`` per record plus ``index.html`` listing the captions.

    Returns the written SVG paths.  Two ids mapping to the same file name
    are an error rather than a silent overwrite.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths, rows, used = [], [], set()
    for item in items:
        stem = file_stem(item.id)
        if stem in used:
            raise ValueError(f"record ids collide on file name {stem!r}.svg")
        used.add(stem)
        spec = HeatmapSpec(item.record, item.scores, cell_size, color_ramp)
        path = os.path.join(out_dir, stem + ".svg")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(render_heatmap(spec))
        paths.append(path)
        rows.append(
            f'<tr><td><a href="{_esc(stem)}.svg">{_esc(item.id)}</a></td><td>{_esc(spec.caption)}</td></tr>'
        )
    index = [
        "<!DOCTYPE html>",
        '<html><head><meta charset="utf-8"><title>attention heat maps</title></head><body>',
        "<table>",
        "<tr><th>id</th><th>scores</th></tr>",
        *rows,
        "</table>",
        "</body></html>",
    ]
    with open(os.path.join(out_dir, "index.html"), "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(index) + "\n")
    return paths
