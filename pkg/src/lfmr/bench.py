"""Throughput benchmark harness.

Methodology: every repeat builds a fresh structure from a fresh arena,
pre-populates it to half the key range, then runs ``threads`` workers for
``duration_secs`` applying operations drawn from the contains:insert:remove
mix with per-thread deterministic generators seeded by
``(seed, repeat, tid)``.  Reported throughput is the mean over repeats in
operations per second with a Student-t 95% confidence interval.

``ratio_nr`` compares a scheme against the leak-everything baseline run
with the same configuration and seed, as a scheme-overhead measure.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import statistics
import threading
import time
from dataclasses import dataclass, field

from scipy import stats as _stats

from .node_pool import arena_new
from .runtime import Runtime
from .schemes import EpochScheme, HazardScheme
from .sets import LIST_NODE_LAYOUT, make_set

DEFAULT_MIX = (50, 25, 25)  # contains : insert : remove


@dataclass
class BenchConfig:
    ds: str = "list"              # "list" or "hash"
    variant: str = "hhs"          # "hhs", "hm", "harris"
    scheme: str = "fa"            # "fa", "hp", "ebr", "nr"
    key_range: int = 10000
    threads: int = 1
    duration_secs: float = 1.0
    repeats: int = 10
    mix: tuple[int, int, int] = DEFAULT_MIX
    pool: int = 50000
    seed: int = 1
    buckets: int = 10000
    poison: bool = False

    def mix_str(self) -> str:
        return ":".join(str(m) for m in self.mix)


@dataclass
class BenchResult:
    config: BenchConfig
    per_repeat_ops: list[float] = field(default_factory=list)
    ratio_nr: float | None = None

    @property
    def mean_ops(self) -> float:
        return statistics.fmean(self.per_repeat_ops)

    @property
    def ci95(self) -> float:
        """Half-width of the Student-t 95% confidence interval of the
        mean; 0 for a single repeat."""
        n = len(self.per_repeat_ops)
        if n < 2:
            return 0.0
        sd = statistics.stdev(self.per_repeat_ops)
        t = _stats.t.ppf(0.975, n - 1)
        return t * sd / math.sqrt(n)

    def row(self) -> dict:
        c = self.config
        return {
            "ds": c.ds, "variant": c.variant, "scheme": c.scheme,
            "range": c.key_range, "threads": c.threads,
            "mix": c.mix_str(), "repeats": c.repeats,
            "mean_ops": round(self.mean_ops, 1),
            "ci95": round(self.ci95, 1),
            "ratio_nr": (round(self.ratio_nr, 3)
                         if self.ratio_nr is not None else ""),
        }


def build_structure(cfg: BenchConfig):
    """Construct (structure, runtime_or_None) for one repeat."""
    arena = arena_new(cfg.pool, LIST_NODE_LAYOUT)
    runtime = None
    scheme_state = None
    if cfg.scheme == "fa":
        runtime = Runtime(max_threads=cfg.threads + 1, poison=cfg.poison)
    elif cfg.scheme == "hp":
        scheme_state = HazardScheme(arena, max_threads=cfg.threads + 1,
                                    threads_hint=cfg.threads)
    elif cfg.scheme == "ebr":
        scheme_state = EpochScheme(arena, max_threads=cfg.threads + 1)
    s = make_set(cfg.ds, cfg.variant, cfg.scheme, arena=arena,
                 runtime=runtime, scheme_state=scheme_state,
                 buckets=cfg.buckets)
    return s, runtime


def prepopulate(structure, cfg: BenchConfig) -> int:
    """Insert every other key so the structure holds half the key range."""
    structure.register_thread()
    n = 0
    for key in range(0, cfg.key_range, 2):
        if structure.insert(key):
            n += 1
    return n


def _worker(structure, cfg: BenchConfig, repeat: int, tid: int,
            start_evt: threading.Event, stop: list, counts: list) -> None:
    structure.register_thread()
    rng = random.Random(f"{cfg.seed}:{repeat}:{tid}")
    c, i, r = cfg.mix
    total = c + i + r
    contains, insert, remove = (structure.contains, structure.insert,
                                structure.remove)
    key_range = cfg.key_range
    ops = 0
    start_evt.wait()
    while not stop[0]:
        key = rng.randrange(key_range)
        pick = rng.randrange(total)
        if pick < c:
            contains(key)
        elif pick < c + i:
            insert(key)
        else:
            remove(key)
        ops += 1
    counts[tid] = ops


def run_repeat(cfg: BenchConfig, repeat: int) -> float:
    """One timed repeat on a fresh structure; returns ops/second."""
    structure, _rt = build_structure(cfg)
    prepopulate(structure, cfg)
    start_evt = threading.Event()
    stop = [False]
    counts = [0] * cfg.threads
    threads = [threading.Thread(target=_worker,
                                args=(structure, cfg, repeat, tid,
                                      start_evt, stop, counts))
               for tid in range(cfg.threads)]
    for t in threads:
        t.start()
    start_evt.set()
    t0 = time.perf_counter()
    time.sleep(cfg.duration_secs)
    stop[0] = True
    for t in threads:
        t.join()
    elapsed = time.perf_counter() - t0
    return sum(counts) / elapsed


def run_benchmark(cfg: BenchConfig, with_nr_ratio: bool = True) -> BenchResult:
    result = BenchResult(cfg)
    for repeat in range(cfg.repeats):
        result.per_repeat_ops.append(run_repeat(cfg, repeat))
    if with_nr_ratio and cfg.scheme != "nr":
        nr_cfg = BenchConfig(**{**cfg.__dict__, "scheme": "nr",
                                "poison": False})
        nr = BenchResult(nr_cfg)
        for repeat in range(cfg.repeats):
            nr.per_repeat_ops.append(run_repeat(nr_cfg, repeat))
        if nr.mean_ops > 0:
            result.ratio_nr = result.mean_ops / nr.mean_ops
    return result


# ---------------------------------------------------------------------------
# reporting

CSV_COLUMNS = ["ds", "variant", "scheme", "range", "threads", "mix",
               "repeats", "mean_ops", "ci95", "ratio_nr"]


def render(results: list[BenchResult], fmt: str = "table") -> str:
    rows = [r.row() for r in results]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()
    if fmt == "json":
        return json.dumps(rows, indent=2)
    if fmt == "table":
        widths = {c: max(len(c), *(len(str(row[c])) for row in rows))
                  for c in CSV_COLUMNS}
        lines = ["  ".join(c.ljust(widths[c]) for c in CSV_COLUMNS)]
        for row in rows:
            lines.append("  ".join(str(row[c]).ljust(widths[c])
                                   for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}")
