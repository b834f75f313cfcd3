"""Per-query wall-clock timing of depth and benchmark evaluations."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from depthmon.charting import fit_centrality
from depthmon.depth import ReferenceSet
from depthmon.errors import ConfigError


@dataclass(frozen=True)
class TimingSample:
    method: str
    duration_ns: int
    query_index: int
    ref_size: int
    dim: int


TIMING_COLUMNS = ("method", "duration_ns", "query_index", "ref_size", "dim")
SUMMARY_STATS = ("min", "median", "mean", "p95", "max")


def time_queries(
    methods: Sequence,
    ref: ReferenceSet,
    queries: np.ndarray,
    query_indices: Sequence[int] | None = None,
) -> list[TimingSample]:
    """Time one centrality evaluation per (method, query).

    Fitting (reference depths, neighbour structures, trees) happens before
    the clock starts; one untimed warm-up call absorbs JIT compilation.
    """
    if not methods:
        raise ConfigError("timing needs at least one method")
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if query_indices is None:
        query_indices = range(len(queries))
    rows = []
    for method in methods:
        fitted = fit_centrality(method, ref)
        fitted.centrality(queries[:1])
        for qi, q in zip(query_indices, queries):
            t0 = time.perf_counter_ns()
            fitted.centrality(q[None, :])
            rows.append(TimingSample(method.label, time.perf_counter_ns() - t0, int(qi), ref.size, ref.dim))
    return rows


def _order_stat(sorted_values: np.ndarray, q: float) -> int:
    # smallest row value with at least a fraction q of rows at or below it
    return int(sorted_values[max(int(np.ceil(q * len(sorted_values))) - 1, 0)])


def summarize(rows: Sequence[TimingSample]) -> dict[str, dict[str, float]]:
    """Min, median, mean, 95th percentile and max duration (ns) per method.

    Median and p95 are order statistics of the rows (the lower median for
    even counts), so they can be recomputed from the timing CSV.
    """
    by_method: dict[str, list[int]] = {}
    for r in rows:
        by_method.setdefault(r.method, []).append(r.duration_ns)
    out = {}
    for method, values in by_method.items():
        v = np.sort(np.asarray(values, dtype=np.int64))
        out[method] = {
            "count": int(v.size),
            "min": int(v[0]),
            "median": _order_stat(v, 0.5),
            "mean": float(v.mean()),
            "p95": _order_stat(v, 0.95),
            "max": int(v[-1]),
        }
    return out
