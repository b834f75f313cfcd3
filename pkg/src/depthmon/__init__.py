"""Rank control charts on data depths of neural network embeddings."""

from depthmon.benchmarks import CentralityScorer, score_to_centrality
from depthmon.charting import ChartConfig, ChartType, SignalRecord, monitor_stream, q_lcl, q_statistic, r_statistic
from depthmon.depth import MERGED, DepthSpec, Notion, ProjectionVariant, ReferenceSet, depth
from depthmon.metrics import MonitoringReport, build_report
from depthmon.pipeline import ReferencePlan, monte_carlo_study, run_pipeline
from depthmon.reference import EmbeddingRecord, Phase
from depthmon.sphere import Optimizer

__all__ = [
    "MERGED",
    "CentralityScorer",
    "ChartConfig",
    "ChartType",
    "DepthSpec",
    "EmbeddingRecord",
    "MonitoringReport",
    "Notion",
    "Optimizer",
    "Phase",
    "ProjectionVariant",
    "ReferencePlan",
    "ReferenceSet",
    "SignalRecord",
    "build_report",
    "depth",
    "monitor_stream",
    "monte_carlo_study",
    "q_lcl",
    "q_statistic",
    "r_statistic",
    "run_pipeline",
    "score_to_centrality",
]
