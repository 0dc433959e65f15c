"""Command-line entry point.

Data goes to standard output or the named files; reports (JSON) go to
``--report`` or standard error.  Exit status is 0 on success, 1 on a data
error (the message names the line and record id) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import shutil
import sys
import tempfile
from typing import Iterator, Optional, TextIO

from . import __version__
from .errors import AttnConfError
from .evaluation import (
    format_tau_table,
    overlap_counts,
    per_metric_tau,
    selection_agreement,
    selection_from_scores,
)
from .filtering import (
    DEFAULT_KEEP_FRACTION,
    DEFAULT_UNK,
    ParallelWriter,
    filter_two_pass,
    score_corpus,
)
from .hybrid import hybrid_corpus, write_decision_log
from .metrics import softmax_normalize
from .parallel import available_workers
from .records import (
    MODES,
    STRICT,
    AttentionRecord,
    average_judgments,
    read_external_scores,
    read_judgments,
    read_records,
    read_score_table,
    write_records,
    write_score_table,
)
from .render import GRAYSCALE, RAMPS, render_batch

PROG = "attnconf"


def _fraction(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1], got {text}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0 or value == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Attention-based translation confidence toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=MODES, default=STRICT, help="row-sum validation / join strictness")
    common.add_argument("--workers", type=_positive_int, default=None, help="scoring processes (default: all CPUs)")
    common.add_argument("--report", metavar="PATH", help="write the JSON report here instead of stderr")

    beta = argparse.ArgumentParser(add_help=False)
    beta.add_argument("--beta", type=_positive_float, default=None, help="also compute the coverage penalty with this weight")

    p = sub.add_parser("score", parents=[common, beta], help="score records into a TSV table")
    p.add_argument("input", help="attention records ('-' for stdin)")
    p.add_argument("--out-scores", "-o", metavar="PATH", help="score table (default: stdout)")

    p = sub.add_parser("filter", parents=[common, beta], help="keep the most confident fraction of a corpus")
    p.add_argument("input", help="attention records ('-' for stdin)")
    p.add_argument("--keep-fraction", type=_fraction, default=DEFAULT_KEEP_FRACTION)
    p.add_argument("--unk-token", default=DEFAULT_UNK)
    p.add_argument("--output", "-o", metavar="PATH", help="kept records (default: stdout)")
    p.add_argument("--out-src", metavar="PATH", help="kept source sentences, one per line")
    p.add_argument("--out-tgt", metavar="PATH", help="kept target sentences, one per line")
    p.add_argument("--out-scores", metavar="PATH", help="score table of the kept records")

    p = sub.add_parser("hybrid", parents=[common, beta], help="pick the more confident of two systems per sentence")
    p.add_argument("input_a", help="records of system A")
    p.add_argument("input_b", help="records of system B")
    p.add_argument("--tie-break", choices=("A", "B"), default="A")
    p.add_argument("--output", "-o", metavar="PATH", help="chosen records (default: stdout)")
    p.add_argument("--decisions", metavar="PATH", help="TSV decision log (id, winner, total_a, total_b, margin)")

    p = sub.add_parser("eval", help="correlate score tables with human pairwise judgments")
    p.add_argument("--judgments", required=True, metavar="PATH", help="TSV id, score_a, score_b")
    p.add_argument("--scores-a", required=True, metavar="PATH", help="score table of system A")
    p.add_argument("--scores-b", required=True, metavar="PATH", help="score table of system B")
    p.add_argument("--external-a", metavar="PATH", help="external scores of system A (TSV id, score; higher is better)")
    p.add_argument("--external-b", metavar="PATH", help="external scores of system B")
    p.add_argument("--tie-break", choices=("A", "B"), default="A")
    p.add_argument("--output", "-o", metavar="PATH", help="report (default: stdout)")

    p = sub.add_parser("render", parents=[common], help="write SVG heat maps with score captions")
    p.add_argument("input", help="attention records ('-' for stdin)")
    p.add_argument("--out-dir", required=True, metavar="DIR")
    p.add_argument("--cell-size", type=_positive_int, default=18)
    p.add_argument("--color-ramp", choices=RAMPS, default=GRAYSCALE)

    p = sub.add_parser("normalize", help="softmax raw attention energies into attention records")
    p.add_argument("input", help="records whose 'attn' holds raw energies ('-' for stdin)")
    p.add_argument("--output", "-o", metavar="PATH", help="normalized records (default: stdout)")
    return parser


@contextlib.contextmanager
def _open_in(path: str) -> Iterator[TextIO]:
    if path == "-":
        yield sys.stdin
    else:
        with open(path, encoding="utf-8", newline="") as f:
            yield f


@contextlib.contextmanager
def _open_out(path: Optional[str]) -> Iterator[Optional[TextIO]]:
    if path is None:
        yield None
    elif path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            yield f


def _emit_report(args, text: str) -> None:
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as f:
            f.write(text + "\n")
    else:
        print(text, file=sys.stderr)


def _check_paths(parser: argparse.ArgumentParser, inputs: list[str], outputs: list[Optional[str]]) -> None:
    outs = [os.path.abspath(p) for p in outputs if p and p != "-"]
    ins = {os.path.abspath(p) for p in inputs if p and p != "-"}
    if len(set(outs)) != len(outs):
        parser.error("output paths must be distinct")
    if ins & set(outs):
        parser.error("an output path equals an input path")


def _records(f: TextIO, args, raw: bool = False) -> Iterator[AttentionRecord]:
    return read_records(f, getattr(args, "mode", STRICT), raw=raw)


def _cmd_score(args) -> None:
    with _open_in(args.input) as f, _open_out(args.out_scores) as out:
        out = out or sys.stdout
        rows = ((s.id, s.scores) for s in score_corpus(_records(f, args), args.workers, args.beta))
        write_score_table(rows, out, with_cp=args.beta is not None)


def _cmd_filter(args) -> None:
    with contextlib.ExitStack() as stack:
        path = args.input
        if path == "-":
            # the two-pass filter needs to read its input twice
            tmp = stack.enter_context(tempfile.TemporaryDirectory())
            path = os.path.join(tmp, "input.jsonl")
            with open(path, "w", encoding="utf-8", newline="") as f:
                shutil.copyfileobj(sys.stdin, f)

        def open_records():
            f = stack.enter_context(open(path, encoding="utf-8", newline=""))
            return read_records(f, args.mode)

        records_out = stack.enter_context(_open_out(args.output)) or sys.stdout
        writer = ParallelWriter(
            stack.enter_context(_open_out(args.out_src)),
            stack.enter_context(_open_out(args.out_tgt)),
            stack.enter_context(_open_out(args.out_scores)),
            with_cp=args.beta is not None,
        )

        def emit(item):
            records_out.write(next(write_records([item.record])))
            writer(item)

        report = filter_two_pass(open_records, emit, args.keep_fraction, args.unk_token, args.workers, args.beta)
    _emit_report(args, report.to_json())


def _cmd_hybrid(args) -> None:
    with _open_in(args.input_a) as fa, _open_in(args.input_b) as fb:
        stream_b = score_corpus(_records(fb, args), args.workers, args.beta)
        stream_a = score_corpus(_records(fa, args), args.workers, args.beta)
        choices, report = hybrid_corpus(stream_a, stream_b, args.tie_break, args.mode)
    with _open_out(args.output) as out, _open_out(args.decisions) as log:
        (out or sys.stdout).writelines(write_records(c.chosen.record for c in choices))
        if log is not None:
            write_decision_log(choices, log)
    _emit_report(args, report.to_json())


def _cmd_eval(args) -> None:
    with _open_in(args.judgments) as f:
        judgments = average_judgments(read_judgments(f))
    with _open_in(args.scores_a) as f:
        scores_a = read_score_table(f)
    with _open_in(args.scores_b) as f:
        scores_b = read_score_table(f)

    lines = [format_tau_table(per_metric_tau(judgments, scores_a, scores_b), "kendall tau vs human judgments")]
    attention = selection_from_scores(scores_a, scores_b, args.tie_break)
    overlaps = [("attention_vs_human", overlap_counts(attention, judgments))]
    agreement = None
    if args.external_a is not None:
        with _open_in(args.external_a) as f:
            ext_a = read_external_scores(f)
        with _open_in(args.external_b) as f:
            ext_b = read_external_scores(f)
        external = selection_from_scores(ext_a, ext_b, args.tie_break)
        overlaps.append(("external_vs_human", overlap_counts(external, judgments)))
        agreement = selection_agreement(external, attention)
    lines.append("# overlap of selections with human preference")
    lines.append("#method\tpercent\tmatches\tcompared\thuman_ties\tunselected")
    for name, c in overlaps:
        lines.append(f"{name}\t{c.percent:.1f}\t{c.matches}\t{c.compared}\t{c.human_ties}\t{c.unselected}")
    if agreement is not None:
        lines.append(f"external_vs_attention\t{agreement:.1f}")
    with _open_out(args.output) as out:
        (out or sys.stdout).write("\n".join(lines) + "\n")


def _cmd_render(args) -> None:
    with _open_in(args.input) as f:
        scored = score_corpus(_records(f, args), args.workers)
        paths = render_batch(scored, args.out_dir, args.cell_size, args.color_ramp)
    _emit_report(args, json.dumps({"out_dir": args.out_dir, "rendered": len(paths)}))


def _cmd_normalize(args) -> None:
    with _open_in(args.input) as f, _open_out(args.output) as out:
        out = out or sys.stdout
        for record in read_records(f, raw=True):
            normalized = AttentionRecord(
                record.id, record.src, record.tgt, softmax_normalize(record.attn), record.system, record.meta
            )
            out.writelines(write_records([normalized]))


COMMANDS = {
    "score": _cmd_score,
    "filter": _cmd_filter,
    "hybrid": _cmd_hybrid,
    "eval": _cmd_eval,
    "render": _cmd_render,
    "normalize": _cmd_normalize,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) is None:
        args.workers = available_workers()

    inputs = [getattr(args, k, None) for k in ("input", "input_a", "input_b", "judgments", "scores_a", "scores_b", "external_a", "external_b")]
    outputs = [getattr(args, k, None) for k in ("output", "out_src", "out_tgt", "out_scores", "decisions", "report")]
    _check_paths(parser, inputs, outputs)
    if args.command == "eval" and (args.external_a is None) != (args.external_b is None):
        parser.error("--external-a and --external-b go together")

    try:
        COMMANDS[args.command](args)
    except AttnConfError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def run() -> None:
    sys.exit(main())
