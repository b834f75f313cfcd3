"""Rank statistics and the r / Q control charts built on them."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from depthmon.depth import MERGED, DepthSpec, ReferenceSet, depth
from depthmon.errors import ConfigError, UnknownClassError
from depthmon.reference import EmbeddingRecord, Phase


class ChartType(str, enum.Enum):
    R = "r"
    Q = "q"


def irwin_hall_cdf(s: float, n: int) -> float:
    """CDF of the sum of ``n`` independent uniform(0, 1) variables at ``s``."""
    if s <= 0:
        return 0.0
    if s >= n:
        return 1.0
    terms = [(-1) ** k * math.comb(n, k) * (s - k) ** n for k in range(int(math.floor(s)) + 1)]
    return min(1.0, max(0.0, math.fsum(terms) / math.factorial(n)))


def bates_cdf(x: float, n: int) -> float:
    """CDF of the mean of ``n`` independent uniform(0, 1) variables."""
    return irwin_hall_cdf(n * x, n)


def q_lcl(alpha: float, n: int) -> float:
    """Lower control limit of the Q chart with batch size ``n``.

    Closed form ``(n! alpha)^(1/n) / n`` when ``alpha <= 1/n!``; otherwise the
    root of ``bates_cdf(LCL, n) = alpha`` found by bisection.
    """
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 2:
        raise ConfigError(f"batch size must be >= 2, got {n}")
    if alpha <= 1.0 / math.factorial(n):
        return (math.factorial(n) * alpha) ** (1.0 / n) / n
    return _bates_quantile(alpha, n)


def _bates_quantile(alpha: float, n: int, tol: float = 1e-13) -> float:
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bates_cdf(mid, n) < alpha:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ChartConfig:
    chart: ChartType = ChartType.R
    alpha: float = 0.05
    batch_size: int = 1

    def __post_init__(self):
        object.__setattr__(self, "chart", ChartType(self.chart))
        if not 0 < self.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.chart is ChartType.Q and self.batch_size < 2:
            raise ConfigError("Q chart needs batch_size >= 2")
        if self.chart is ChartType.R and self.batch_size != 1:
            raise ConfigError("r chart uses batch_size 1")

    @property
    def lcl(self) -> float:
        if self.chart is ChartType.R:
            return self.alpha
        return q_lcl(self.alpha, self.batch_size)


@dataclass(frozen=True)
class SignalRecord:
    index: int
    class_used: int
    statistic: float
    signal: bool
    phase: Phase
    misclassified: bool | None = field(default=None, compare=False)


def r_statistic(query_depth, ref_depths) -> float | np.ndarray:
    """Share of reference depths that are ``<=`` the query depth.

    Accepts a scalar or an array of query depths.
    """
    ref = np.sort(np.asarray(ref_depths, dtype=float).ravel())
    if ref.size == 0:
        raise ConfigError("reference depths are empty")
    counts = np.searchsorted(ref, query_depth, side="right")
    out = counts / ref.size
    return float(out) if np.ndim(out) == 0 else out


def q_statistic(r_values) -> float:
    r = np.asarray(r_values, dtype=float)
    if r.size == 0:
        raise ConfigError("empty batch")
    return float(r.mean())


# ---------------------------------------------------------------- centrality


class FittedCentrality(Protocol):
    reference_centrality: np.ndarray

    def centrality(self, points: np.ndarray) -> np.ndarray: ...


class CentralityMethod(Protocol):
    label: str

    def fit(self, ref: ReferenceSet) -> FittedCentrality: ...


class _FittedDepth:
    def __init__(self, spec: DepthSpec, ref: ReferenceSet):
        self.spec = spec
        self.ref = ref
        self.reference_centrality = ref.reference_depths(spec)

    def centrality(self, points):
        return np.atleast_1d(depth(np.atleast_2d(points), self.ref, self.spec))


def fit_centrality(method, ref: ReferenceSet) -> FittedCentrality:
    """Fit a depth spec or a benchmark scorer to a reference set."""
    if isinstance(method, DepthSpec):
        return _FittedDepth(method, ref)
    return method.fit(ref)


def method_label(method) -> str:
    return method.label


# ---------------------------------------------------------------- charts


def _emit(statistics, indices, classes, phases, misclassified, config: ChartConfig) -> list[SignalRecord]:
    lcl = config.lcl
    out = []
    if config.chart is ChartType.R:
        for s, i, c, p, m in zip(statistics, indices, classes, phases, misclassified):
            out.append(SignalRecord(int(i), int(c), float(s), bool(s <= lcl), p, m))
        return out
    n = config.batch_size
    for start in range(0, len(statistics) - n + 1, n):
        q = q_statistic(statistics[start : start + n])
        last = start + n - 1
        mis = [m for m in misclassified[start : start + n] if m is not None]
        out.append(
            SignalRecord(
                int(indices[last]),
                int(classes[last]),
                q,
                bool(q <= lcl),
                phases[last],
                any(mis) if mis else None,
            )
        )
    return out


def _select_reference(label: int, fitted: Mapping[int, FittedCentrality]) -> int:
    if label in fitted:
        return label
    if MERGED in fitted:
        return MERGED
    raise UnknownClassError(label)


def monitor_stream(
    records: Sequence[EmbeddingRecord],
    refs: Mapping[int, ReferenceSet],
    method,
    config: ChartConfig,
    fitted: Mapping[int, FittedCentrality] | None = None,
) -> list[SignalRecord]:
    """Chart statistics for a stream of records.

    Each record is compared with the reference set of its predicted class,
    falling back to the merged set when one is supplied. Q charts average
    consecutive, non-overlapping runs of ``batch_size`` r values in arrival
    order; a trailing partial batch is dropped.

    Args:
        records: Stream in arrival order.
        refs: Reference sets keyed by class label (or ``MERGED``).
        method: A :class:`DepthSpec` or a fitted-able benchmark scorer.
        config: Chart type and limit.
        fitted: Optional pre-fitted centrality per key of ``refs``.

    Raises:
        UnknownClassError: A predicted class has no reference set and no
            merged fallback exists.
    """
    if fitted is None:
        fitted = {label: fit_centrality(method, ref) for label, ref in refs.items()}
    if not records:
        return []
    used = np.array([_select_reference(r.predicted_label, fitted) for r in records])
    r_values = np.empty(len(records))
    for label in np.unique(used):
        sel = np.flatnonzero(used == label)
        pts = np.vstack([records[i].embedding for i in sel])
        f = fitted[int(label)]
        r_values[sel] = r_statistic(f.centrality(pts), f.reference_centrality)
    return _emit(
        r_values,
        [r.index for r in records],
        used,
        [r.phase for r in records],
        [r.misclassified for r in records],
        config,
    )


def phase1_signals(
    refs: Mapping[int, ReferenceSet],
    method,
    config: ChartConfig,
    fitted: Mapping[int, FittedCentrality] | None = None,
    leave_one_out: bool = False,
) -> list[SignalRecord]:
    """In-sample chart statistics of every reference point.

    Each point is ranked against its own full reference set, so it counts
    itself. With ``leave_one_out`` the point's own depth is excluded from the
    count instead. Q charts batch in-sample values in stream-index order
    within each reference set.
    """
    if fitted is None:
        fitted = {label: fit_centrality(method, ref) for label, ref in refs.items()}
    out = []
    for label in sorted(refs):
        ref = refs[label]
        cen = np.asarray(fitted[label].reference_centrality, dtype=float)
        if leave_one_out:
            sorted_c = np.sort(cen)
            r = (np.searchsorted(sorted_c, cen, side="right") - 1) / (cen.size - 1)
        else:
            r = r_statistic(cen, cen)
        out.extend(
            _emit(r, ref.indices, [label] * ref.size, [Phase.PHASE_I] * ref.size, [False] * ref.size, config)
        )
    return out
