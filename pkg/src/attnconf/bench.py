"""Single-worker scoring throughput benchmark.

    python -m attnconf.bench [--records N] [--size 25] [--repeats 5]

Prints a JSON line with records/s for every repeat and their median.
Record construction and validation happen before timing starts; the clock
covers ``score_corpus`` only.
"""

from __future__ import annotations

import argparse
import json
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .filtering import score_corpus
from .records import AttentionRecord


@dataclass(frozen=True)
class BenchResult:
    records: int
    size: int
    runs: list
    median: float


def synthetic_records(n: int, size: int, seed: int = 0) -> list[AttentionRecord]:
    rng = np.random.default_rng(seed)
    src = [f"s{j}" for j in range(size)]
    tgt = [f"t{i}" for i in range(size)]
    return [AttentionRecord(f"b{k}", src, tgt, rng.dirichlet(np.ones(size), size=size)) for k in range(n)]


def measure(n: int = 20_000, size: int = 25, repeats: int = 5, seed: int = 0) -> BenchResult:
    records = synthetic_records(n, size, seed)
    for _ in score_corpus(records[: min(n, 500)]):  # warm-up
        pass
    runs = []
    for _ in range(repeats):
        start = time.perf_counter()
        count = sum(1 for _ in score_corpus(records, workers=1))
        runs.append(count / (time.perf_counter() - start))
    return BenchResult(n, size, runs, statistics.median(runs))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(prog="python -m attnconf.bench", description=__doc__.splitlines()[0])
    parser.add_argument("--records", type=int, default=20_000)
    parser.add_argument("--size", type=int, default=25)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)
    result = measure(args.records, args.size, args.repeats)
    print(json.dumps({
        "records": result.records,
        "size": result.size,
        "median": round(result.median),
        "runs": [round(r) for r in result.runs],
    }))


if __name__ == "__main__":
    main()
