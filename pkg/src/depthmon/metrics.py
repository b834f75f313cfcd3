"""Evaluation rates of a monitoring run."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from depthmon.charting import SignalRecord
from depthmon.errors import DataError
from depthmon.reference import Phase


def _rate(signals: Sequence[SignalRecord]) -> float | None:
    if not signals:
        return None
    return sum(s.signal for s in signals) / len(signals)


def _in_phase(signals, phase):
    return [s for s in signals if s.phase is phase]


def far(signals: Sequence[SignalRecord]) -> float | None:
    """False-alarm rate: share of Phase I statistics that signal."""
    if any(s.phase is not Phase.PHASE_I for s in signals):
        raise DataError("far expects Phase I signal records only")
    return _rate(signals)


def sr_weighted(signals: Sequence[SignalRecord]) -> tuple[float | None, dict[int, float]]:
    """Signal rate over in-control Phase II records, weighted by class size.

    Returns:
        The weighted rate (equal to the pooled proportion) and the rate of
        each class that was consulted.
    """
    by_class: dict[int, list[SignalRecord]] = {}
    for s in signals:
        by_class.setdefault(s.class_used, []).append(s)
    per_class = {c: _rate(v) for c, v in sorted(by_class.items())}
    if not signals:
        return None, {}
    total = sum(len(v) for v in by_class.values())
    return sum(len(by_class[c]) * r for c, r in per_class.items()) / total, per_class


def cdr(signals: Sequence[SignalRecord]) -> float | None:
    """Correct detection rate over out-of-control records."""
    return _rate(signals)


def conditional_sr(signals: Sequence[SignalRecord], misclassified_mask) -> tuple[float | None, float | None]:
    """Signal rates among misclassified and among correctly classified records."""
    mask = np.asarray(misclassified_mask, dtype=bool).ravel()
    if mask.size != len(signals):
        raise DataError(f"mask has {mask.size} entries for {len(signals)} signal records")
    mis = [s for s, m in zip(signals, mask) if m]
    cor = [s for s, m in zip(signals, mask) if not m]
    return _rate(mis), _rate(cor)


@dataclass
class MonitoringReport:
    far: float | None
    sr_weighted: float | None
    sr_per_class: dict[int, float]
    cdr: float | None
    sr_given_misclassified: float | None
    sr_given_correct: float | None
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sr_per_class"] = {str(k): v for k, v in self.sr_per_class.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MonitoringReport":
        d = dict(d)
        d["sr_per_class"] = {int(k): v for k, v in d["sr_per_class"].items()}
        return cls(**d)


def build_report(signals: Sequence[SignalRecord]) -> MonitoringReport:
    """Aggregate Phase I and Phase II signal records into all rates.

    The conditional rates use the ``misclassified`` flag carried by in-control
    records; records without one are left out of both sides.
    """
    p1 = _in_phase(signals, Phase.PHASE_I)
    ic = _in_phase(signals, Phase.PHASE_II_IN_CONTROL)
    ooc = _in_phase(signals, Phase.PHASE_II_OUT_OF_CONTROL)
    sr, per_class = sr_weighted(ic)
    labelled = [s for s in ic if s.misclassified is not None]
    sr_m, sr_c = conditional_sr(labelled, [s.misclassified for s in labelled])
    counts = {
        "phase1": len(p1),
        "phase2_ic": len(ic),
        "phase2_ooc": len(ooc),
        "unlabeled": len(_in_phase(signals, Phase.UNLABELED)),
        "phase2_ic_misclassified": sum(bool(s.misclassified) for s in labelled),
        "phase2_ic_correct": sum(not s.misclassified for s in labelled),
    }
    return MonitoringReport(far(p1), sr, per_class, cdr(ooc), sr_m, sr_c, counts)
