"""Phase I / Phase II monitoring runs and the Monte Carlo study."""

from __future__ import annotations

import dataclasses
import enum
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from depthmon.benchmarks import BENCHMARK_LABELS, CentralityScorer
from depthmon.charting import ChartConfig, SignalRecord, fit_centrality, monitor_stream, phase1_signals
from depthmon.depth import MERGED, DepthSpec, Notion, ReferenceSet
from depthmon.errors import ConfigError, DataError
from depthmon.metrics import MonitoringReport, build_report
from depthmon.reference import (
    EmbeddingRecord,
    Phase,
    build_reference_by_confidence,
    build_reference_merged,
    build_reference_random,
    validate_phase1,
)

logger = logging.getLogger(__name__)


class ReferenceStrategy(str, enum.Enum):
    CONFIDENCE = "confidence"
    RANDOM = "random"
    MERGED = "merged"


@dataclass(frozen=True)
class ReferencePlan:
    """How Phase I reference sets are drawn.

    ``size`` is per class for the per-class strategies and the total for the
    merged one; ``None`` takes everything available (the smallest class size
    for per-class strategies).
    """

    strategy: ReferenceStrategy = ReferenceStrategy.CONFIDENCE
    size: int | None = None
    seed: int = 0
    ridge: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", ReferenceStrategy(self.strategy))
        if self.size is not None and self.size < 1:
            raise ConfigError("reference size must be positive")


def resolve_method(method) -> DepthSpec | CentralityScorer:
    """Accept a depth spec, a scorer, or a method label such as ``PDa2`` or ``LOF``."""
    if isinstance(method, (DepthSpec, CentralityScorer)):
        return method
    if isinstance(method, str):
        for label in BENCHMARK_LABELS:
            if method.lower() == label.lower():
                return CentralityScorer(label)
        return DepthSpec.from_label(method)
    raise ConfigError(f"cannot interpret method {method!r}")


def method_feature(method) -> str:
    return getattr(method, "feature", "embedding")


def project_records(records: Sequence[EmbeddingRecord], feature: str) -> list[EmbeddingRecord]:
    """Swap each record's embedding for the monitored feature.

    ``"softmax"`` uses the score of the predicted class as a 1-vector.
    """
    if feature == "embedding":
        return list(records)
    if feature != "softmax":
        raise ConfigError(f"unknown feature {feature!r}")
    return [dataclasses.replace(r, embedding=np.array([r.confidence(r.predicted_label)])) for r in records]


def build_references(
    phase1: Sequence[EmbeddingRecord], plan: ReferencePlan, strict: bool = True
) -> dict[int, ReferenceSet]:
    """Reference sets keyed by class, or a single ``MERGED`` entry."""
    if not phase1:
        raise DataError("no correctly classified Phase I records")
    if plan.strategy is ReferenceStrategy.MERGED:
        size = len(phase1) if plan.size is None else plan.size
        return {MERGED: build_reference_merged(phase1, size, plan.ridge, strict)}
    labels = sorted({r.true_label for r in phase1})
    size = plan.size
    if size is None:
        size = min(sum(r.true_label == c for r in phase1) for c in labels)
    refs = {}
    for c in labels:
        if plan.strategy is ReferenceStrategy.CONFIDENCE:
            refs[c] = build_reference_by_confidence(phase1, c, size, plan.ridge, strict)
        else:
            seed = int(np.random.SeedSequence([plan.seed, c]).generate_state(1)[0])
            refs[c] = build_reference_random(phase1, c, size, seed, plan.ridge, strict)
    return refs


def _needs_covariance(method) -> bool:
    if isinstance(method, DepthSpec):
        return method.notion is Notion.MAHALANOBIS
    return method.label == "MDis"


@dataclass
class RunResult:
    method_label: str
    phase1: list[SignalRecord]
    phase2: list[SignalRecord]
    report: MonitoringReport
    references: dict[int, ReferenceSet] = field(repr=False)
    removed_phase1: int = 0
    fitted: dict = field(default_factory=dict, repr=False)

    @property
    def signals(self) -> list[SignalRecord]:
        return self.phase1 + self.phase2


def run_pipeline(
    records: Sequence[EmbeddingRecord],
    method,
    config: ChartConfig,
    plan: ReferencePlan = ReferencePlan(),
    leave_one_out: bool = False,
) -> RunResult:
    """Phase I (validation, references, FAR) followed by Phase II monitoring.

    Args:
        records: Phase I records and the Phase II stream, in any interleaving;
            Phase II order is the order in ``records``.
        method: Depth spec, benchmark scorer, or method label.
        config: Chart settings.
        plan: Reference sampling.
        leave_one_out: Exclude each reference point's own depth from its
            Phase I rank.
    """
    method = resolve_method(method)
    records = project_records(records, method_feature(method))
    phase1_all = [r for r in records if r.phase is Phase.PHASE_I]
    stream = [r for r in records if r.phase is not Phase.PHASE_I]
    kept, removed = validate_phase1(phase1_all)
    refs = build_references(kept, plan, strict=_needs_covariance(method))
    fitted = {label: fit_centrality(method, ref) for label, ref in refs.items()}
    p1 = phase1_signals(refs, method, config, fitted, leave_one_out)
    p2 = monitor_stream(stream, refs, method, config, fitted)
    report = build_report(p1 + p2)
    logger.info("%s: FAR %s SR %s CDR %s", method.label, report.far, report.sr_weighted, report.cdr)
    return RunResult(method.label, p1, p2, report, refs, removed, fitted)


_MC_METRICS = ("far", "sr_weighted", "cdr")


def monte_carlo_study(
    records: Sequence[EmbeddingRecord],
    method,
    config: ChartConfig,
    runs: int,
    seed: int = 0,
    size: int | None = None,
    run_seeds: Sequence[int] | None = None,
    ridge: bool = False,
) -> dict[str, dict[str, float | None]]:
    """Repeat the pipeline with freshly drawn random reference samples.

    Run ``i`` draws its references with ``run_seeds[i]``; by default the
    seeds are spawned from ``seed``.

    Returns:
        For each of ``far``, ``sr_weighted`` and ``cdr``: mean, sample
        standard deviation and the per-run values.
    """
    if runs < 2:
        raise ConfigError("monte carlo study needs runs >= 2")
    if run_seeds is None:
        run_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(runs)]
    elif len(run_seeds) != runs:
        raise ConfigError("run_seeds must have one entry per run")
    values = {m: [] for m in _MC_METRICS}
    for s in run_seeds:
        plan = ReferencePlan(ReferenceStrategy.RANDOM, size, int(s), ridge)
        report = run_pipeline(records, method, config, plan).report
        for m in _MC_METRICS:
            values[m].append(getattr(report, m))
    out = {}
    for m, v in values.items():
        if any(x is None for x in v):
            out[m] = {"mean": None, "std": None, "runs": v}
        else:
            arr = np.asarray(v, dtype=float)
            out[m] = {"mean": float(arr.mean()), "std": float(arr.std(ddof=1)), "runs": [float(x) for x in v]}
    return out
