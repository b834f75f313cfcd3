"""Outlier scores used as comparison methods, adapted to the rank charts.

Every scorer is fitted to a :class:`ReferenceSet` and then scores arbitrary
query points. Reference points are scored through the same query path as
any other point, so a query that duplicates a reference point receives
exactly that point's score. Scores are turned into centrality values by
:func:`score_to_centrality` before ranking.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial import cKDTree
from sklearn.ensemble import IsolationForest

from depthmon.depth import ReferenceSet
from depthmon.errors import ConfigError, DataError, NumericError

logger = logging.getLogger(__name__)


class Orientation(str, enum.Enum):
    HIGHER_IS_CENTRAL = "higher_is_central"
    HIGHER_IS_OUTLYING = "higher_is_outlying"


class BenchmarkMethod(str, enum.Enum):
    LOF = "LOF"
    KDEOS = "KDEOS"
    IFOREST = "iForest"
    MDIS = "MDis"
    NOF = "NOF"


BENCHMARK_LABELS = tuple(m.value for m in BenchmarkMethod)

_DEFAULT_PARAMS: dict[BenchmarkMethod, dict[str, Any]] = {
    BenchmarkMethod.LOF: {"k": 20},
    BenchmarkMethod.KDEOS: {"kernel": "gaussian", "k_min": 5, "k_max": 20},
    BenchmarkMethod.IFOREST: {"trees": 100, "subsample": 256, "seed": 0},
    BenchmarkMethod.MDIS: {},
    BenchmarkMethod.NOF: {},
}

# MDis and NOF monitor the scalar confidence output by default
_DEFAULT_FEATURE = {BenchmarkMethod.MDIS: "softmax", BenchmarkMethod.NOF: "softmax"}


def score_to_centrality(orientation, score):
    """Map a score to a value where larger means more central."""
    if not isinstance(orientation, Orientation):
        orientation = getattr(orientation, "orientation", orientation)
    orientation = Orientation(orientation)
    if orientation is Orientation.HIGHER_IS_CENTRAL:
        return score
    return -np.asarray(score) if np.ndim(score) else -score


# ---------------------------------------------------------------- neighbours


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _check_finite(x: np.ndarray, what: str):
    if not np.all(np.isfinite(x)):
        raise DataError(f"{what} contain non-finite values")


def _neighbours(tree: cKDTree, points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    d, i = tree.query(points, k=k)
    return np.reshape(d, (len(points), k)), np.reshape(i, (len(points), k))


def _reference_neighbours(tree: cKDTree, ref: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """k nearest neighbours of each reference point among the others."""
    n = len(ref)
    d, idx = _neighbours(tree, ref, min(k + 1, n))
    out_d = np.empty((n, k))
    out_i = np.empty((n, k), dtype=int)
    for row in range(n):
        keep = idx[row] != row
        if keep.all():
            # self hidden behind zero-distance duplicates: drop the farthest
            keep[-1] = False
        out_d[row] = d[row][keep][:k]
        out_i[row] = idx[row][keep][:k]
    return out_d, out_i


@dataclass
class _LofState:
    k: int
    tree: cKDTree
    k_distance: np.ndarray
    lrd: np.ndarray
    floor: float


def _data_scale(ref: np.ndarray) -> float:
    scale = float(np.max(np.ptp(ref, axis=0))) if ref.size else 0.0
    return scale if scale > 0 else 1.0


def _lof_fit(ref: np.ndarray, k: int) -> _LofState:
    n = len(ref)
    if not 1 <= k < n:
        raise ConfigError(f"LOF needs 1 <= k < |R| = {n}, got k={k}")
    tree = cKDTree(ref)
    d, idx = _reference_neighbours(tree, ref, k)
    k_dist = d[:, -1]
    floor = 1e-12 * _data_scale(ref)
    reach = np.maximum(k_dist[idx], d)
    lrd = 1.0 / np.maximum(reach.mean(axis=1), floor)
    return _LofState(k, tree, k_dist, lrd, floor)


def _lof_query(state: _LofState, points: np.ndarray) -> np.ndarray:
    d, idx = _neighbours(state.tree, points, state.k)
    reach = np.maximum(state.k_distance[idx], d)
    lrd_q = 1.0 / np.maximum(reach.mean(axis=1), state.floor)
    return state.lrd[idx].mean(axis=1) / lrd_q


def lof_score(query, ref, k: int = 20) -> np.ndarray:
    """Local outlier factor of each query row with respect to ``ref``.

    Neighbourhoods hold exactly ``k`` points; the query itself is not part
    of the reference set.
    """
    ref = _as_points(ref.points if isinstance(ref, ReferenceSet) else ref)
    return _lof_query(_lof_fit(ref, k), _as_points(query))


# ---------------------------------------------------------------- KDEOS


def _kernel(kind: str, dist: np.ndarray, h: np.ndarray, dim: int) -> np.ndarray:
    u = dist / h
    if kind == "gaussian":
        return np.exp(-0.5 * u * u) / ((2.0 * np.pi) ** (dim / 2.0) * h**dim)
    if kind == "epanechnikov":
        return 0.75 * np.maximum(1.0 - u * u, 0.0) / h**dim
    raise ConfigError(f"unknown kernel {kind!r}")


@dataclass
class _KdeosState:
    kernel: str
    k_min: int
    k_max: int
    tree: cKDTree
    bandwidth: np.ndarray  # (n, K): k-distance of each reference point per k
    density: np.ndarray  # (n, K)
    dim: int


def _kdeos_fit(ref: np.ndarray, kernel: str, k_min: int, k_max: int) -> _KdeosState:
    n, dim = ref.shape
    if not 1 <= k_min <= k_max < n:
        raise ConfigError(f"KDEOS needs 1 <= k_min <= k_max < |R| = {n}")
    tree = cKDTree(ref)
    d, idx = _reference_neighbours(tree, ref, k_max)
    floor = 1e-12 * _data_scale(ref)
    ks = np.arange(k_min, k_max + 1)
    bw = np.maximum(d[:, ks - 1], floor)
    dens = np.empty((n, len(ks)))
    for j, k in enumerate(ks):
        dens[:, j] = _kernel(kernel, d[:, :k], bw[idx[:, :k], j], dim).mean(axis=1)
    return _KdeosState(kernel, k_min, k_max, tree, bw, dens, dim)


def _kdeos_query(state: _KdeosState, points: np.ndarray) -> np.ndarray:
    d, idx = _neighbours(state.tree, points, state.k_max)
    z = np.empty((len(points), state.k_max - state.k_min + 1))
    for j, k in enumerate(range(state.k_min, state.k_max + 1)):
        nb = idx[:, :k]
        dens_q = _kernel(state.kernel, d[:, :k], state.bandwidth[nb, j], state.dim).mean(axis=1)
        nd = state.density[nb, j]
        mu = nd.mean(axis=1)
        sd = nd.std(axis=1)
        diff = dens_q - mu
        # equal neighbour densities: no spread to compare against
        z[:, j] = np.divide(diff, sd, out=np.zeros_like(diff), where=sd > 0)
    return -z.mean(axis=1)


def kdeos_score(query, ref, kernel: str = "gaussian", k_min: int = 5, k_max: int = 20) -> np.ndarray:
    """Kernel-density outlier score (higher is more outlying).

    For each ``k`` the density of a point is the mean kernel contribution
    of its ``k`` nearest reference points, each with bandwidth equal to its
    own ``k``-distance. The query density is z-scored against the densities
    of those neighbours, and the z-scores are averaged over ``k`` and negated.
    """
    ref = _as_points(ref.points if isinstance(ref, ReferenceSet) else ref)
    return _kdeos_query(_kdeos_fit(ref, kernel, k_min, k_max), _as_points(query))


# ---------------------------------------------------------------- iForest


def iforest_fit(ref, trees: int = 100, subsample: int = 256, seed: int = 0) -> IsolationForest:
    ref = _as_points(ref.points if isinstance(ref, ReferenceSet) else ref)
    if trees < 1:
        raise ConfigError("iForest needs at least one tree")
    if not 2 <= subsample <= len(ref):
        raise ConfigError(f"iForest subsample must lie in [2, {len(ref)}], got {subsample}")
    return IsolationForest(n_estimators=trees, max_samples=subsample, random_state=seed).fit(ref)


def iforest_score(query, forest: IsolationForest) -> np.ndarray:
    """Anomaly score ``2^(-E[h] / c(psi))`` in (0, 1)."""
    return -forest.score_samples(_as_points(query))


# ---------------------------------------------------------------- MDis


def mdis_score(query, ref) -> np.ndarray:
    """Squared Mahalanobis distance; univariate ``(q - mean)^2 / var`` on scalars."""
    ref = _as_points(ref.points if isinstance(ref, ReferenceSet) else ref)
    q = _as_points(query)
    mean = ref.mean(axis=0)
    if ref.shape[1] == 1:
        var = ref[:, 0].var(ddof=1)
        if not var > 0:
            raise NumericError("MDis needs positive reference variance")
        return (q[:, 0] - mean[0]) ** 2 / var
    cov = np.cov(ref, rowvar=False, ddof=1)
    try:
        inv = np.linalg.inv(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericError("MDis reference covariance is singular") from exc
    diff = q - mean
    return np.einsum("ij,jk,ik->i", diff, inv, diff)


# ---------------------------------------------------------------- NOF


def natural_neighbour_eigenvalue(ref) -> tuple[int, bool]:
    """Smallest ``k`` at which every reference point is among another's ``k`` nearest.

    Returns:
        ``(lambda, capped)``; ``capped`` is true when the search stopped at
        ``|R| - 1`` without meeting the condition.
    """
    ref = _as_points(ref.points if isinstance(ref, ReferenceSet) else ref)
    n = len(ref)
    if n < 3:
        raise ConfigError("NOF needs at least 3 reference points")
    _, idx = _reference_neighbours(cKDTree(ref), ref, n - 1)
    hit = np.zeros(n, dtype=bool)
    for k in range(1, n):
        hit[idx[:, k - 1]] = True
        if hit.all():
            return k, False
    return n - 1, True


def nof_score(query, ref) -> np.ndarray:
    """Natural outlier factor: the local outlier factor at the natural eigenvalue."""
    ref = _as_points(ref.points if isinstance(ref, ReferenceSet) else ref)
    lam, capped = natural_neighbour_eigenvalue(ref)
    if capped:
        logger.warning("natural neighbour search hit the cap; using lambda = %d", lam)
    return lof_score(query, ref, lam)


# ---------------------------------------------------------------- scorer


@dataclass(frozen=True)
class CentralityScorer:
    """A benchmark method with its parameters.

    Attributes:
        method: Which outlier score.
        params: Method parameters; missing entries take the defaults
            (LOF ``k=20``; KDEOS Gaussian, ``k_min=5``, ``k_max=20``;
            iForest 100 trees, ``subsample=min(256, |R|)``, ``seed=0``).
        feature: ``"embedding"`` or ``"softmax"``, the input the pipeline
            feeds this scorer.
    """

    method: BenchmarkMethod
    params: dict = field(default_factory=dict)
    feature: str | None = None

    def __post_init__(self):
        method = BenchmarkMethod(self.method)
        object.__setattr__(self, "method", method)
        unknown = set(self.params) - set(_DEFAULT_PARAMS[method])
        if unknown:
            raise ConfigError(f"{method.value} does not take parameters {sorted(unknown)}")
        object.__setattr__(self, "params", {**_DEFAULT_PARAMS[method], **self.params})
        if self.feature is None:
            object.__setattr__(self, "feature", _DEFAULT_FEATURE.get(method, "embedding"))
        if self.feature not in ("embedding", "softmax"):
            raise ConfigError(f"feature must be 'embedding' or 'softmax', got {self.feature!r}")

    @property
    def label(self) -> str:
        return self.method.value

    @property
    def orientation(self) -> Orientation:
        return Orientation.HIGHER_IS_OUTLYING

    def to_dict(self) -> dict:
        return {"method": self.method.value, "params": dict(self.params), "feature": self.feature}

    @classmethod
    def from_dict(cls, d: dict) -> "CentralityScorer":
        return cls(BenchmarkMethod(d["method"]), dict(d.get("params", {})), d.get("feature"))

    def fit(self, ref: ReferenceSet) -> "FittedScorer":
        return FittedScorer(self, ref)


class FittedScorer:
    """A scorer bound to one reference set."""

    def __init__(self, scorer: CentralityScorer, ref: ReferenceSet):
        self.scorer = scorer
        self.ref = ref
        pts = _as_points(ref.points)
        _check_finite(pts, "reference points")
        p = scorer.params
        m = scorer.method
        self.capped = False
        self.eigenvalue = None
        if m is BenchmarkMethod.LOF:
            self._state = _lof_fit(pts, p["k"])
            self._score = lambda q: _lof_query(self._state, q)
        elif m is BenchmarkMethod.KDEOS:
            self._state = _kdeos_fit(pts, p["kernel"], p["k_min"], p["k_max"])
            self._score = lambda q: _kdeos_query(self._state, q)
        elif m is BenchmarkMethod.IFOREST:
            forest = iforest_fit(pts, p["trees"], min(p["subsample"], len(pts)), p["seed"])
            self._score = lambda q: iforest_score(q, forest)
        elif m is BenchmarkMethod.MDIS:
            self._score = lambda q: mdis_score(q, pts)
            mdis_score(pts[:1], pts)  # fail early on zero variance
        else:
            self.eigenvalue, self.capped = natural_neighbour_eigenvalue(pts)
            self._state = _lof_fit(pts, self.eigenvalue)
            self._score = lambda q: _lof_query(self._state, q)
        self.reference_scores = self.score(pts)
        self.reference_centrality = score_to_centrality(scorer.orientation, self.reference_scores)

    def score(self, points) -> np.ndarray:
        q = _as_points(points)
        if q.shape[1] != self.ref.dim:
            raise DataError(f"query dimension {q.shape[1]} does not match reference dimension {self.ref.dim}")
        return np.asarray(self._score(q), dtype=float)

    def centrality(self, points) -> np.ndarray:
        return score_to_centrality(self.scorer.orientation, self.score(points))
