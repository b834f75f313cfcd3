"""Data depth of query vectors with respect to a reference sample.

Four notions are available: Mahalanobis, Simplicial (exact enumeration,
k <= 3), a smoothed direction-sampled Halfspace depth, and Projection depth
(symmetric or one-sided outlyingness) approximated by one of three sphere
searches. All functions accept a single ``(k,)`` query or an ``(m, k)``
batch.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy.special import expit

from depthmon.errors import (
    ConfigError,
    DataError,
    SingularCovarianceError,
    UnsupportedDimensionError,
)
from depthmon.sphere import Optimizer, random_directions, sphere_optimize

MERGED = -1
"""Class label of a reference set pooled over all classes."""


class Notion(str, enum.Enum):
    MAHALANOBIS = "mahalanobis"
    SIMPLICIAL = "simplicial"
    HALFSPACE_ROBUST = "halfspace_robust"
    PROJECTION = "projection"


class ProjectionVariant(str, enum.Enum):
    SYMMETRIC = "symmetric"
    ASYMMETRIC = "asymmetric"


_OPTIMIZER_CODES = {
    Optimizer.COORDINATE_DESCENT: "1",
    Optimizer.NELDER_MEAD: "2",
    Optimizer.REFINED_RANDOM_SEARCH: "3",
}


@dataclass(frozen=True)
class DepthSpec:
    """Depth notion plus the approximation parameters it needs.

    ``direction_budget`` defaults to 1000 sampled directions for the halfspace
    depth and 5000 evaluations for refined random search. ``smoothing`` is the
    logistic bandwidth of the halfspace count in units of the per-direction
    MAD; 0 gives the plain add-one count.
    """

    notion: Notion
    projection_variant: ProjectionVariant | None = None
    optimizer: Optimizer | None = None
    direction_budget: int | None = None
    restarts: int = 10
    max_iterations: int = 100
    convergence_tol: float = 1e-6
    rng_seed: int = 0
    smoothing: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "notion", Notion(self.notion))
        if self.notion is Notion.PROJECTION:
            if self.projection_variant is None or self.optimizer is None:
                raise ConfigError("projection depth needs projection_variant and optimizer")
            object.__setattr__(self, "projection_variant", ProjectionVariant(self.projection_variant))
            object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        elif self.projection_variant is not None or self.optimizer is not None:
            raise ConfigError("projection_variant/optimizer are only valid for projection depth")
        if self.direction_budget is None:
            default = 5000 if self.optimizer is Optimizer.REFINED_RANDOM_SEARCH else 1000
            object.__setattr__(self, "direction_budget", default)
        if self.direction_budget < 1:
            raise ConfigError("direction_budget must be >= 1")
        if self.restarts < 1 or self.max_iterations < 1:
            raise ConfigError("restarts and max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            raise ConfigError("convergence_tol must be > 0")
        if self.smoothing < 0:
            raise ConfigError("smoothing must be >= 0")

    @property
    def label(self) -> str:
        if self.notion is Notion.MAHALANOBIS:
            return "MD"
        if self.notion is Notion.SIMPLICIAL:
            return "SD"
        if self.notion is Notion.HALFSPACE_ROBUST:
            return "HDr"
        prefix = "PDa" if self.projection_variant is ProjectionVariant.ASYMMETRIC else "PD"
        return prefix + _OPTIMIZER_CODES[self.optimizer]

    @classmethod
    def from_label(cls, label: str, **kwargs) -> "DepthSpec":
        """Build a spec from a method label such as ``MD``, ``HDr`` or ``PDa2``."""
        key = label.strip()
        simple = {"MD": Notion.MAHALANOBIS, "SD": Notion.SIMPLICIAL, "HDR": Notion.HALFSPACE_ROBUST}
        if key.upper() in simple:
            return cls(simple[key.upper()], **kwargs)
        if key.upper().startswith("PD") and key[-1] in "123":
            variant = ProjectionVariant.ASYMMETRIC if key[2:3].lower() == "a" else ProjectionVariant.SYMMETRIC
            optimizer = {v: k for k, v in _OPTIMIZER_CODES.items()}[key[-1]]
            return cls(Notion.PROJECTION, variant, optimizer, **kwargs)
        raise ConfigError(f"unknown depth label {label!r}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for name in ("notion", "projection_variant", "optimizer"):
            if d[name] is not None:
                d[name] = d[name].value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DepthSpec":
        return cls(**d)


DEPTH_LABELS = ("MD", "SD", "HDr", "PD1", "PD2", "PD3", "PDa1", "PDa2", "PDa3")


@dataclass(frozen=True, eq=False)
class ReferenceSet:
    """Phase I reference sample of one class (or of all classes merged).

    Build instances with :meth:`from_points`; the mean and inverse covariance
    are computed once there. ``depth_cache`` holds the in-sample depths for
    ``cache_spec`` and is filled by :meth:`with_depth_cache`.
    """

    class_label: int
    points: np.ndarray
    mean_vec: np.ndarray
    inv_cov: np.ndarray
    indices: tuple[int, ...] = ()
    depth_cache: np.ndarray | None = None
    cache_spec: DepthSpec | None = None
    _shared: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_points(
        cls,
        points,
        class_label: int = MERGED,
        indices: Sequence[int] | None = None,
        ridge: bool = False,
        strict: bool = True,
    ) -> "ReferenceSet":
        """Freeze a reference sample.

        Args:
            points: ``(n, k)`` array with ``n >= k + 2``.
            class_label: Class id or ``MERGED``.
            indices: Stream indices of the points (default ``0..n-1``).
            ridge: Add ``1e-8 * trace / k`` to the covariance diagonal.
            strict: Reject a singular covariance. Scorers that never use the
                covariance pass ``False``; a pseudo-inverse is stored then.

        Raises:
            SingularCovarianceError: ``strict`` and the covariance is singular.
        """
        pts = np.array(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise DataError(f"reference points must be a 2-D array, got shape {pts.shape}")
        n, k = pts.shape
        if n < k + 2:
            raise DataError(f"reference set needs at least k + 2 = {k + 2} points, got {n}")
        if not np.all(np.isfinite(pts)):
            raise DataError("reference points must be finite")
        mean = pts.mean(axis=0)
        cov = np.atleast_2d(np.cov(pts, rowvar=False, ddof=1))
        if ridge:
            cov = cov + 1e-8 * np.trace(cov) / k * np.eye(k)
        eig = np.linalg.eigvalsh(cov)
        singular = eig[0] <= 1e-12 * max(eig[-1], 0.0) or eig[-1] <= 0
        if singular and strict:
            raise SingularCovarianceError(
                f"reference covariance of class {class_label} is singular "
                f"(eigenvalues {eig[0]:.3g}..{eig[-1]:.3g}); enable the ridge option to regularize"
            )
        inv = np.linalg.pinv(cov) if singular else np.linalg.inv(cov)
        pts.setflags(write=False)
        idx = tuple(int(i) for i in indices) if indices is not None else tuple(range(n))
        if len(idx) != n:
            raise DataError("indices length does not match number of points")
        return cls(class_label, pts, mean, inv, idx)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def with_depth_cache(self, spec: DepthSpec) -> "ReferenceSet":
        """Return a copy carrying the in-sample depths of every point under ``spec``."""
        if self.cache_spec == spec and self.depth_cache is not None:
            return self
        values = depth(self.points, self, spec)
        values.setflags(write=False)
        return dataclasses.replace(self, depth_cache=values, cache_spec=spec, _shared=self._shared)

    def reference_depths(self, spec: DepthSpec) -> np.ndarray:
        if self.cache_spec == spec and self.depth_cache is not None:
            return self.depth_cache
        return self.with_depth_cache(spec).depth_cache


def _as_batch(query) -> tuple[np.ndarray, bool]:
    q = np.asarray(query, dtype=float)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    if not np.all(np.isfinite(q)):
        raise DataError("query must be finite")
    return q, single


def _check_dim(q: np.ndarray, ref: ReferenceSet):
    if q.shape[1] != ref.dim:
        raise DataError(f"query dimension {q.shape[1]} does not match reference dimension {ref.dim}")


def univariate_med_mad(values) -> tuple[float, float]:
    """Median and median absolute deviation from the median.

    >>> univariate_med_mad([1, 2, 3, 4])
    (2.5, 1.0)
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise DataError("median of an empty sample")
    med = float(np.median(v))
    return med, float(np.median(np.abs(v - med)))


# ---------------------------------------------------------------- Mahalanobis


def mahalanobis_depth(query, ref: ReferenceSet):
    """``1 / (1 + (q - mean)' S^-1 (q - mean))`` with the reference sample moments."""
    q, single = _as_batch(query)
    _check_dim(q, ref)
    diff = q - ref.mean_vec
    d2 = np.einsum("ij,jk,ik->i", diff, ref.inv_cov, diff)
    out = 1.0 / (1.0 + np.maximum(d2, 0.0))
    return float(out[0]) if single else out


# ---------------------------------------------------------------- Simplicial


@numba.njit(cache=True)
def _simplicial_count_2d(v):
    n = v.shape[0]
    cross = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            cross[i, j] = v[i, 0] * v[j, 1] - v[i, 1] * v[j, 0]
    count = 0
    for a in range(n):
        for b in range(a + 1, n):
            s_ab = cross[a, b]
            if s_ab == 0.0:
                continue
            for c in range(b + 1, n):
                s_bc = cross[b, c]
                s_ca = cross[c, a]
                if s_ab > 0.0:
                    if s_bc > 0.0 and s_ca > 0.0:
                        count += 1
                elif s_bc < 0.0 and s_ca < 0.0:
                    count += 1
    return count


@numba.njit(cache=True)
def _simplicial_count_3d(v):
    n = v.shape[0]
    det = np.zeros((n, n, n))
    for i in range(n):
        for j in range(i + 1, n):
            cx = v[i, 1] * v[j, 2] - v[i, 2] * v[j, 1]
            cy = v[i, 2] * v[j, 0] - v[i, 0] * v[j, 2]
            cz = v[i, 0] * v[j, 1] - v[i, 1] * v[j, 0]
            for l in range(j + 1, n):
                det[i, j, l] = cx * v[l, 0] + cy * v[l, 1] + cz * v[l, 2]
    count = 0
    for a in range(n):
        for b in range(a + 1, n):
            for c in range(b + 1, n):
                d_abc = det[a, b, c]
                if d_abc == 0.0:
                    continue
                for d in range(c + 1, n):
                    # null-space vector of [v_a v_b v_c v_d] from cofactors
                    m1 = det[b, c, d]
                    m2 = -det[a, c, d]
                    m3 = det[a, b, d]
                    m4 = -d_abc
                    if m4 > 0.0:
                        if m1 > 0.0 and m2 > 0.0 and m3 > 0.0:
                            count += 1
                    elif m1 < 0.0 and m2 < 0.0 and m3 < 0.0:
                        count += 1
    return count


def _comb(n: int, r: int) -> int:
    from math import comb

    return comb(n, r)


def simplicial_depth(query, ref: ReferenceSet):
    """Fraction of the open simplices spanned by ``k + 1`` reference points that contain the query.

    Exact enumeration, so only ``k <= 3`` is supported. Degenerate simplices
    have empty interior and never count.
    """
    q, single = _as_batch(query)
    _check_dim(q, ref)
    k = ref.dim
    if k > 3:
        raise UnsupportedDimensionError(f"simplicial depth is limited to k <= 3, got k = {k}")
    n = ref.size
    total = _comb(n, k + 1)
    pts = np.ascontiguousarray(ref.points)
    out = np.empty(q.shape[0])
    for i, x in enumerate(q):
        v = pts - x
        if k == 1:
            below = int(np.sum(v[:, 0] < 0))
            above = int(np.sum(v[:, 0] > 0))
            cnt = below * above
        elif k == 2:
            cnt = _simplicial_count_2d(v)
        else:
            cnt = _simplicial_count_3d(v)
        out[i] = cnt / total
    return float(out[0]) if single else out


# ---------------------------------------------------------------- Halfspace


def _halfspace_state(ref: ReferenceSet, spec: DepthSpec):
    key = ("halfspace", spec.rng_seed, spec.direction_budget, spec.smoothing)
    state = ref._shared.get(key)
    if state is None:
        rng = np.random.default_rng(spec.rng_seed)
        dirs = random_directions(rng, spec.direction_budget, ref.dim)
        proj = ref.points @ dirs.T  # (n, B)
        med = np.median(proj, axis=0)
        mad = np.median(np.abs(proj - med), axis=0)
        scale = np.max(np.abs(proj - med), axis=0)
        # directions with MAD = 0 fall back to a tiny fraction of the spread
        mad = np.where(mad > 0, mad, np.maximum(scale, 1.0) * 1e-6)
        state = (dirs, proj, spec.smoothing * mad)
        ref._shared[key] = state
    return state


def halfspace_depth_robust(query, ref: ReferenceSet, spec: DepthSpec):
    """Direction-sampled halfspace depth with add-one smoothing.

    For every sampled direction ``p`` the (soft) number of reference points
    with ``<p, m_b> >= <p, q>`` is turned into ``(count + 1) / (|R| + 2)`` and
    the minimum over directions is returned. With ``spec.smoothing > 0`` the
    indicator is replaced by a logistic ramp of width ``smoothing * MAD`` of
    the projected sample, which makes the depth continuous in the query.
    The result is strictly positive and tends to ``1 / (|R| + 2)`` far from the data.
    """
    q, single = _as_batch(query)
    _check_dim(q, ref)
    dirs, proj, width = _halfspace_state(ref, spec)
    n = ref.size
    out = np.empty(q.shape[0])
    for i, x in enumerate(q):
        qp = dirs @ x  # (B,)
        diff = proj - qp
        if spec.smoothing > 0:
            counts = expit(diff / width).sum(axis=0)
        else:
            counts = (diff >= 0).sum(axis=0)
        out[i] = (counts.min() + 1.0) / (n + 2.0)
    return float(out[0]) if single else out


# ---------------------------------------------------------------- Projection


def _sorted_projection_stats(ref_points: np.ndarray, dirs: np.ndarray, variant: ProjectionVariant):
    proj = np.sort(dirs @ ref_points.T, axis=1)  # (m, n)
    n = proj.shape[1]
    lo, hi = (n - 1) // 2, n // 2
    med = 0.5 * (proj[:, lo] + proj[:, hi])
    dev = proj - med[:, None]
    if variant is ProjectionVariant.SYMMETRIC:
        scale = np.median(np.abs(dev), axis=1)
    else:
        # dev rows are sorted, so the strictly positive part is a suffix
        c = (dev > 0).sum(axis=1)
        rows = np.arange(dev.shape[0])
        start = n - c
        a = np.clip(start + (c - 1) // 2, 0, n - 1)
        b = np.clip(start + c // 2, 0, n - 1)
        scale = np.where(c > 0, 0.5 * (dev[rows, a] + dev[rows, b]), 0.0)
    return med, scale


def projection_outlyingness(query, ref_points, dirs, variant=ProjectionVariant.SYMMETRIC) -> np.ndarray:
    """Outlyingness of one query along each row of ``dirs``.

    Symmetric: ``|<p,q> - med| / MAD``. Asymmetric: ``max(<p,q> - med, 0)``
    divided by the median of the strictly positive deviations. A zero scale
    gives ``+inf`` when the numerator is positive and 0 otherwise.
    """
    variant = ProjectionVariant(variant)
    dirs = np.atleast_2d(dirs)
    med, scale = _sorted_projection_stats(np.asarray(ref_points, dtype=float), dirs, variant)
    qp = dirs @ np.asarray(query, dtype=float)
    num = qp - med
    num = np.abs(num) if variant is ProjectionVariant.SYMMETRIC else np.maximum(num, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(scale > 0, num / np.where(scale > 0, scale, 1.0), np.where(num > 0, np.inf, 0.0))
    return out


def _query_seed(spec: DepthSpec, x: np.ndarray) -> np.random.SeedSequence:
    digest = hashlib.blake2b(np.ascontiguousarray(x, dtype=np.float64).tobytes(), digest_size=8).digest()
    return np.random.SeedSequence([spec.rng_seed & 0xFFFFFFFFFFFFFFFF, int.from_bytes(digest, "little")])


@numba.njit(cache=True, inline="always")
def _swap(a, i, j):
    t = a[i]
    a[i] = a[j]
    a[j] = t


@numba.njit(cache=True)
def _select(a, lo, hi, k):
    # k-th smallest of a[lo:hi]; partially reorders that range. The
    # partition loop is branch free, which matters more than comparison
    # count at these sizes.
    hi -= 1
    while hi - lo > 16:
        mid = (lo + hi) // 2
        if a[mid] < a[lo]:
            _swap(a, mid, lo)
        if a[hi] < a[lo]:
            _swap(a, hi, lo)
        if a[mid] < a[hi]:
            _swap(a, mid, hi)
        pivot = a[hi]
        first = lo
        for i in range(lo, hi):
            x = a[i]
            a[i] = a[first]
            a[first] = x
            first += x < pivot
        _swap(a, first, hi)
        if k == first:
            return a[k]
        if k < first:
            hi = first - 1
            continue
        left = first - lo
        lo = first + 1
        if left * 8 < hi - lo:
            # lopsided split, usually a run of ties: peel off the pivot copies
            eq = lo
            for i in range(lo, hi + 1):
                x = a[i]
                a[i] = a[eq]
                a[eq] = x
                eq += x == pivot
            if k < eq:
                return pivot
            lo = eq
    for i in range(lo + 1, hi + 1):
        v = a[i]
        j = i - 1
        while j >= lo and a[j] > v:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = v
    return a[k]


@numba.njit(cache=True)
def _select_median(a, lo, hi):
    # median of a[lo:hi]; after the call a[lo + m//2:hi] >= median >= a[lo:lo + m//2]
    m = hi - lo
    mid = lo + m // 2
    upper = _select(a, lo, hi, mid)
    if m % 2 == 1:
        return upper
    lower = a[lo]
    for i in range(lo + 1, mid):
        if a[i] > lower:
            lower = a[i]
    return 0.5 * (lower + upper)


@numba.njit(cache=True)
def _median_and_scale(vals, n, asymmetric):
    # overwrites vals
    med = _select_median(vals, 0, n)
    if asymmetric:
        # values above the median all sit in the upper half after selection
        m = 0
        for i in range(n // 2, n):
            if vals[i] > med:
                vals[m] = vals[i] - med
                m += 1
        scale = _select_median(vals, 0, m) if m > 0 else 0.0
    else:
        for i in range(n):
            vals[i] = abs(vals[i] - med)
        scale = _select_median(vals, 0, n)
    return med, scale


@numba.njit(cache=True)
def _projection_objective(p, q, pts, asymmetric, work):
    n, k = pts.shape
    for i in range(n):
        s = 0.0
        for j in range(k):
            s += pts[i, j] * p[j]
        work[i] = s
    med, scale = _median_and_scale(work, n, asymmetric)
    qp = 0.0
    for j in range(k):
        qp += q[j] * p[j]
    num = qp - med
    num = max(num, 0.0) if asymmetric else abs(num)
    if scale > 0.0:
        return num / scale
    return np.inf if num > 0.0 else 0.0


def projection_depth(query, ref: ReferenceSet, spec: DepthSpec):
    """Projection depth ``1 / (1 + O)`` with ``O`` the approximate supremum of outlyingness.

    The random stream of every query is derived from ``spec.rng_seed`` and
    the query's own bytes, so evaluation order and batching do not matter.
    """
    q, single = _as_batch(query)
    _check_dim(q, ref)
    asym = spec.projection_variant is ProjectionVariant.ASYMMETRIC
    pts = np.ascontiguousarray(ref.points)
    out = np.empty(q.shape[0])
    for i, x in enumerate(q):
        x = np.ascontiguousarray(x)
        _, o = sphere_optimize(
            _projection_objective,
            ref.dim,
            spec.optimizer,
            args=(x, pts, asym, np.empty(ref.size)),
            restarts=spec.restarts,
            max_iterations=spec.max_iterations,
            tol=spec.convergence_tol,
            budget=spec.direction_budget,
            seed=_query_seed(spec, x),
        )
        out[i] = 0.0 if o == np.inf else 1.0 / (1.0 + o)
    return float(out[0]) if single else out


# ---------------------------------------------------------------- dispatch


def depth(query, ref: ReferenceSet, spec: DepthSpec):
    """Depth of ``query`` under the notion selected by ``spec``.

    Every notion is a deterministic function of the query vector, so
    repeated rows in a batch are evaluated once.
    """
    q = np.asarray(query, dtype=float)
    if q.ndim == 2 and q.shape[0] > 1:
        uniq, inverse = np.unique(q, axis=0, return_inverse=True)
        if uniq.shape[0] < q.shape[0]:
            return np.asarray(_depth(uniq, ref, spec))[inverse.ravel()]
    return _depth(query, ref, spec)


def _depth(query, ref: ReferenceSet, spec: DepthSpec):
    if spec.notion is Notion.MAHALANOBIS:
        return mahalanobis_depth(query, ref)
    if spec.notion is Notion.SIMPLICIAL:
        return simplicial_depth(query, ref)
    if spec.notion is Notion.HALFSPACE_ROBUST:
        return halfspace_depth_robust(query, ref, spec)
    return projection_depth(query, ref, spec)
