"""Phase I records and construction of reference samples."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from depthmon.depth import MERGED, ReferenceSet
from depthmon.errors import DataError, InsufficientDataError

logger = logging.getLogger(__name__)


class Phase(str, enum.Enum):
    PHASE_I = "phase1"
    PHASE_II_IN_CONTROL = "phase2_ic"
    PHASE_II_OUT_OF_CONTROL = "phase2_ooc"
    UNLABELED = "unlabeled"


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    """One monitored observation.

    Class labels are non-negative integers that double as column indices
    into ``softmax``.
    """

    index: int
    embedding: np.ndarray
    predicted_label: int
    phase: Phase = Phase.UNLABELED
    true_label: int | None = None
    softmax: np.ndarray | None = None

    def __post_init__(self):
        emb = np.asarray(self.embedding, dtype=float).ravel()
        object.__setattr__(self, "embedding", emb)
        object.__setattr__(self, "phase", Phase(self.phase))
        if self.softmax is not None:
            sm = np.asarray(self.softmax, dtype=float).ravel()
            if np.any(sm < -1e-12) or np.any(sm > 1 + 1e-12) or abs(sm.sum() - 1.0) > 1e-6:
                raise DataError(f"record {self.index}: softmax entries must lie in [0, 1] and sum to 1")
            object.__setattr__(self, "softmax", sm)
        if self.phase is Phase.PHASE_I and self.true_label is None:
            raise DataError(f"record {self.index}: Phase I records need a true label")

    @property
    def misclassified(self) -> bool | None:
        if self.true_label is None:
            return None
        return self.true_label != self.predicted_label

    def confidence(self, label: int) -> float:
        if self.softmax is None:
            raise DataError(f"record {self.index} has no softmax scores")
        if not 0 <= label < self.softmax.size:
            raise DataError(f"record {self.index}: class {label} outside softmax of length {self.softmax.size}")
        return float(self.softmax[label])

    def __eq__(self, other):
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.index == other.index
            and self.predicted_label == other.predicted_label
            and self.true_label == other.true_label
            and self.phase is other.phase
            and np.array_equal(self.embedding, other.embedding)
            and (
                (self.softmax is None and other.softmax is None)
                or (self.softmax is not None and other.softmax is not None
                    and np.array_equal(self.softmax, other.softmax))
            )
        )

    __hash__ = None


def validate_phase1(records: Iterable[EmbeddingRecord]) -> tuple[list[EmbeddingRecord], int]:
    """Keep the correctly classified Phase I records.

    Returns:
        The kept records and the number removed.
    """
    kept = []
    removed = 0
    for r in records:
        if r.phase is not Phase.PHASE_I:
            raise DataError(f"record {r.index} is not a Phase I record")
        if r.true_label is None:
            raise DataError(f"record {r.index}: Phase I records need a true label")
        if r.predicted_label == r.true_label:
            kept.append(r)
        else:
            removed += 1
    if removed:
        logger.info("dropped %d misclassified Phase I records", removed)
    return kept, removed


def _class_records(records: Sequence[EmbeddingRecord], label: int) -> list[EmbeddingRecord]:
    out = [r for r in records if r.true_label == label]
    bad = [r.index for r in out if r.predicted_label != r.true_label]
    if bad:
        raise DataError(f"reference candidates must be correctly classified; offending indices {bad[:5]}")
    return out


def _to_reference(chosen: Sequence[EmbeddingRecord], label: int, ridge: bool, strict: bool) -> ReferenceSet:
    pts = np.vstack([r.embedding for r in chosen])
    return ReferenceSet.from_points(pts, label, indices=[r.index for r in chosen], ridge=ridge, strict=strict)


def _top_confidence(candidates: Sequence[EmbeddingRecord], label: int, size: int) -> list[EmbeddingRecord]:
    # highest score first, ties by lower stream index
    ranked = sorted(candidates, key=lambda r: (-r.confidence(label), r.index))
    return ranked[:size]


def build_reference_by_confidence(
    records: Sequence[EmbeddingRecord], label: int, size: int, ridge: bool = False, strict: bool = True
) -> ReferenceSet:
    """Reference set of the ``size`` records of class ``label`` with the highest softmax score for it."""
    candidates = _class_records(records, label)
    if len(candidates) < size:
        raise InsufficientDataError(f"class {label}: requested {size} reference points", len(candidates))
    chosen = _top_confidence(candidates, label, size)
    return _to_reference(sorted(chosen, key=lambda r: r.index), label, ridge, strict)


def build_reference_random(
    records: Sequence[EmbeddingRecord],
    label: int,
    size: int,
    seed: int,
    ridge: bool = False,
    strict: bool = True,
) -> ReferenceSet:
    """Uniform sample without replacement of ``size`` records of class ``label``."""
    candidates = sorted(_class_records(records, label), key=lambda r: r.index)
    if len(candidates) < size:
        raise InsufficientDataError(f"class {label}: requested {size} reference points", len(candidates))
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(candidates), size=size, replace=False))
    return _to_reference([candidates[i] for i in pick], label, ridge, strict)


def build_reference_merged(
    records: Sequence[EmbeddingRecord], size: int, ridge: bool = False, strict: bool = True
) -> ReferenceSet:
    """Class-balanced pooled reference set labelled ``MERGED``.

    Each class contributes ``size // v`` top-confidence points; the remainder
    goes one point each to the lowest class labels.
    """
    labels = sorted({r.true_label for r in records})
    if not labels:
        raise InsufficientDataError(f"merged reference of size {size}", 0)
    total = len(records)
    if size > total:
        raise InsufficientDataError(f"merged reference of size {size}", total)
    base, extra = divmod(size, len(labels))
    chosen = []
    for i, label in enumerate(labels):
        want = base + (1 if i < extra else 0)
        candidates = _class_records(records, label)
        if len(candidates) < want:
            raise InsufficientDataError(f"class {label}: merged reference needs {want} points", len(candidates))
        chosen.extend(_top_confidence(candidates, label, want))
    return _to_reference(sorted(chosen, key=lambda r: r.index), MERGED, ridge, strict)
