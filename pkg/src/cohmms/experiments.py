"""Monte Carlo harness: how often is a random finite metric measure space full?"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .closure import coherent_closure, fullness
from .genericity import PowerCache, density_condition, separation_profile
from .space import NumericPolicy, as_exact, random_euclidean

__all__ = ["ExperimentConfig", "ExperimentRow", "run_montecarlo", "sample_seed", "format_float", "CSV_COLUMNS"]

CSV_COLUMNS = ["n", "sample_index", "full", "class_count", "N_min", "min_margin",
               "off_diag_injective", "diag_power2_injective"]


@dataclass(frozen=True)
class ExperimentConfig:
    n_range: tuple[int, ...]
    samples: int = 200
    dim: int = 2
    measure_mode: str = "uniform"
    seed: int = 0
    policy: NumericPolicy = field(default_factory=NumericPolicy)
    N_max: int = 2
    csv_path: str | None = None
    json_path: str | None = None
    include_timing: bool = False

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not self.n_range or min(self.n_range) < 1:
            raise ValueError("n_range must list point counts >= 1")
        if self.measure_mode not in ("uniform", "random-simplex"):
            raise ValueError(f"unknown measure mode {self.measure_mode!r}")


@dataclass(frozen=True)
class ExperimentRow:
    n: int
    sample_index: int
    full: bool
    class_count: int
    N_min: int | None
    min_margin: float
    off_diag_injective: bool
    diag_power2_injective: bool
    elapsed_ms: float = 0.0


def sample_seed(seed: int, n: int, index: int) -> int:
    """Per-sample seed derived from (config seed, n, sample index)."""
    return int(np.random.SeedSequence([seed, n, index]).generate_state(1)[0])


def format_float(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    short = repr(x)
    digits = len(short.lstrip("-").replace(".", "").split("e")[0].lstrip("0"))
    return short if digits <= 12 else f"{x:.12g}"


def _run_one(args) -> ExperimentRow:
    cfg, n, idx = args
    t0 = time.perf_counter()
    space = random_euclidean(n, cfg.dim, sample_seed(cfg.seed, n, idx), cfg.measure_mode)
    if cfg.policy.exact:
        space = as_exact(space)
    part = coherent_closure(space, cfg.policy)
    cert = fullness(part)
    cache = PowerCache(space)
    n_min, margin = separation_profile(space, cfg.N_max, cfg.policy, cache)
    off, diag = density_condition(space, cfg.policy)
    elapsed = (time.perf_counter() - t0) * 1000.0
    return ExperimentRow(n, idx, cert.full, cert.class_count, n_min, float(margin), off, diag, elapsed)


def _row_fields(row: ExperimentRow, timing: bool) -> list[str]:
    out = [str(row.n), str(row.sample_index), str(row.full).lower(), str(row.class_count),
           "" if row.N_min is None else str(row.N_min), format_float(row.min_margin),
           str(row.off_diag_injective).lower(), str(row.diag_power2_injective).lower()]
    if timing:
        out.append(format_float(round(row.elapsed_ms, 3)))
    return out


def summarize(rows: list[ExperimentRow]) -> dict:
    per_n: dict[int, list[ExperimentRow]] = {}
    for r in rows:
        per_n.setdefault(r.n, []).append(r)
    summary = {}
    for n, rs in sorted(per_n.items()):
        k = len(rs)
        summary[str(n)] = {
            "samples": k,
            "fraction_full": sum(r.full for r in rs) / k,
            "fraction_density": sum(r.off_diag_injective and r.diag_power2_injective for r in rs) / k,
            "fraction_separated": sum(r.N_min is not None for r in rs) / k,
            "mean_class_count": sum(r.class_count for r in rs) / k,
        }
    return summary


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("COHMMS_THREADS", "1")))
    except ValueError:
        return 1


def run_montecarlo(config: ExperimentConfig, workers: int | None = None) -> tuple[list[ExperimentRow], dict]:
    """Generate, close and certify every sample; rows come back in (n, index) order.

    When ``config.csv_path`` is set, rows are appended and flushed one by one
    so a crash leaves a valid prefix.  The summary goes to ``json_path``.
    """
    tasks = [(config, n, i) for n in config.n_range for i in range(config.samples)]
    workers = workers or _threads()
    header = CSV_COLUMNS + (["elapsed_ms"] if config.include_timing else [])
    sink = None
    writer = None
    if config.csv_path:
        sink = open(config.csv_path, "w", newline="")
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(header)
        sink.flush()
    rows: list[ExperimentRow] = []
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(_run_one, tasks, chunksize=8)
                for row in results:
                    rows.append(row)
                    if writer:
                        writer.writerow(_row_fields(row, config.include_timing))
                        sink.flush()
        else:
            for t in tasks:
                row = _run_one(t)
                rows.append(row)
                if writer:
                    writer.writerow(_row_fields(row, config.include_timing))
                    sink.flush()
    finally:
        if sink:
            sink.close()
    summary = {
        "config": {
            "n_range": list(config.n_range), "samples": config.samples, "dim": config.dim,
            "measure_mode": config.measure_mode, "seed": config.seed, "N_max": config.N_max,
            "policy": asdict(config.policy),
        },
        "per_n": summarize(rows),
    }
    if config.json_path:
        Path(config.json_path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return rows, summary


def rows_to_csv(rows: list[ExperimentRow], timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + (["elapsed_ms"] if timing else []))
    for r in rows:
        w.writerow(_row_fields(r, timing))
    return buf.getvalue()
