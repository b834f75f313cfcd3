from __future__ import annotations

import numpy as np
import pytest

from depthmon.benchmarks import CentralityScorer
from depthmon.charting import ChartConfig
from depthmon.depth import MERGED, DepthSpec, Notion
from depthmon.errors import ConfigError, DataError
from depthmon.pipeline import (
    ReferencePlan,
    ReferenceStrategy,
    build_references,
    method_feature,
    project_records,
    resolve_method,
    run_pipeline,
)
from depthmon.reference import EmbeddingRecord, Phase


def phase1(n_per_class=20, dim=2):
    rng = np.random.default_rng(0)
    out = []
    for i in range(2 * n_per_class):
        label = i % 2
        score = 0.6 + 0.39 * rng.random()
        soft = np.array([score, 1 - score]) if label == 0 else np.array([1 - score, score])
        out.append(EmbeddingRecord(i, rng.standard_normal(dim) + 5 * label, label, Phase.PHASE_I, label, soft))
    return out


class TestResolve:
    @pytest.mark.parametrize("label,kind", [("MD", DepthSpec), ("pda2", DepthSpec), ("lof", CentralityScorer),
                                            ("iForest", CentralityScorer)])
    def test_labels(self, label, kind):
        assert isinstance(resolve_method(label), kind)

    def test_passthrough_and_errors(self):
        spec = DepthSpec(Notion.MAHALANOBIS)
        assert resolve_method(spec) is spec
        with pytest.raises(ConfigError):
            resolve_method(3)
        with pytest.raises(ConfigError):
            resolve_method("PD9")

    def test_features(self):
        assert method_feature(resolve_method("MD")) == "embedding"
        assert method_feature(resolve_method("NOF")) == "softmax"


class TestProject:
    def test_softmax_uses_predicted_class_score(self):
        records = phase1(3)
        projected = project_records(records, "softmax")
        for r, p in zip(records, projected):
            assert p.embedding.tolist() == [r.softmax[r.predicted_label]]
            assert p.index == r.index and p.phase is r.phase
        assert project_records(records, "embedding") == records

    def test_unknown_feature(self):
        with pytest.raises(ConfigError):
            project_records(phase1(3), "logits")


class TestBuildReferences:
    def test_per_class_defaults_to_smallest_class(self):
        refs = build_references(phase1(10), ReferencePlan())
        assert sorted(refs) == [0, 1] and all(ref.size == 10 for ref in refs.values())

    def test_merged_is_single_entry(self):
        refs = build_references(phase1(10), ReferencePlan(ReferenceStrategy.MERGED, 12))
        assert list(refs) == [MERGED] and refs[MERGED].size == 12

    def test_random_is_seeded(self):
        plan = ReferencePlan(ReferenceStrategy.RANDOM, 8, seed=4)
        a, b = build_references(phase1(10), plan), build_references(phase1(10), plan)
        assert all(list(a[c].indices) == list(b[c].indices) for c in (0, 1))

    def test_rejects(self):
        with pytest.raises(DataError):
            build_references([], ReferencePlan())
        with pytest.raises(ConfigError):
            ReferencePlan(size=0)


def test_run_pipeline_counts_removed_phase1_records():
    records = phase1(20)
    bad = records[0]
    records[0] = EmbeddingRecord(bad.index, bad.embedding, 1, Phase.PHASE_I, 0, bad.softmax[::-1])
    result = run_pipeline(records, "MD", ChartConfig(), ReferencePlan(size=15))
    assert result.removed_phase1 == 1
    assert len(result.phase1) == 30 and result.phase2 == []
