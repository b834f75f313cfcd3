"""Maximization of a function over the unit sphere.

Three searches are provided: coordinate descent along great circles,
Nelder-Mead in a tangent-plane chart around the start, and refined random
search with shrinking caps. Every algorithm is written once as a plain
function of ``(objective, args, ...)``. When the objective is a numba
``njit`` function the compiled twin runs; any other callable goes through the
pure-Python version.

Random draws come from numpy generators spawned per restart and are passed in
as arrays, so restart ``i`` behaves the same regardless of how many restarts
follow it.
"""

from __future__ import annotations

import enum
import math
from typing import Callable

import numba
import numpy as np
from numba import types
from numba.core.dispatcher import Dispatcher

from depthmon.errors import ConfigError, NumericError


class Optimizer(str, enum.Enum):
    COORDINATE_DESCENT = "coordinate_descent"
    NELDER_MEAD = "nelder_mead"
    REFINED_RANDOM_SEARCH = "refined_random_search"


RRS_ROUNDS = 10
RRS_SHRINK = 0.5
CD_GRID = 8
CD_ANGLE_TOL = 1e-5
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def random_directions(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Draw ``count`` directions uniformly on the unit sphere.

    Rows are generated sequentially, so a longer draw from the same generator
    state extends a shorter one.
    """
    z = rng.standard_normal((count, dim))
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return z / norms


def _clean(v):
    # NaN counts as "no information"; +inf is a legitimate supremum
    if v != v:
        return -np.inf
    return v


def _unit(x):
    return x / np.sqrt(np.sum(x * x))


def _cd_impl(f, args, starts, max_iterations, tol, grid):
    restarts, dim = starts.shape
    out_p = np.empty((restarts, dim))
    out_v = np.empty(restarts)
    out_seen = np.zeros(restarts, dtype=np.bool_)
    for r in range(restarts):
        p = starts[r].copy()
        fp = _clean(f(p, *args))
        seen = fp > -np.inf
        for _ in range(max_iterations):
            f_old = fp
            for j in range(dim):
                u = -p[j] * p
                u[j] += 1.0
                nu = np.sqrt(np.sum(u * u))
                if nu < 1e-12:
                    continue
                u = u / nu
                t_best = 0.0
                f_best = fp
                for i in range(grid):
                    t = -0.5 * np.pi + np.pi * (i + 1.0) / (grid + 1.0)
                    v = _clean(f(np.cos(t) * p + np.sin(t) * u, *args))
                    if v > -np.inf:
                        seen = True
                    if v > f_best:
                        f_best = v
                        t_best = t
                # golden-section refinement around the best grid angle
                h = np.pi / (grid + 1.0)
                a = t_best - h
                b = t_best + h
                c = b - _GOLDEN * (b - a)
                d = a + _GOLDEN * (b - a)
                fc = _clean(f(np.cos(c) * p + np.sin(c) * u, *args))
                fd = _clean(f(np.cos(d) * p + np.sin(d) * u, *args))
                while b - a > CD_ANGLE_TOL:
                    if fc >= fd:
                        b = d
                        d = c
                        fd = fc
                        c = b - _GOLDEN * (b - a)
                        fc = _clean(f(np.cos(c) * p + np.sin(c) * u, *args))
                    else:
                        a = c
                        c = d
                        fc = fd
                        d = a + _GOLDEN * (b - a)
                        fd = _clean(f(np.cos(d) * p + np.sin(d) * u, *args))
                if fc > f_best:
                    f_best = fc
                    t_best = c
                if fd > f_best:
                    f_best = fd
                    t_best = d
                if f_best > fp:
                    if f_best > -np.inf:
                        seen = True
                    p = _unit(np.cos(t_best) * p + np.sin(t_best) * u)
                    fp = f_best
            if fp == np.inf:
                break
            if fp - f_old <= tol * max(1.0, abs(fp)):
                break
        out_p[r] = p
        out_v[r] = fp
        out_seen[r] = seen
    return out_p, out_v, out_seen


def _nm_impl(f, args, starts, bases, max_iterations, tol, step):
    # minimizes g = -f over tangent coordinates t, point = unit(start + t @ basis)
    restarts, dim = starts.shape
    d = dim - 1
    out_p = np.empty((restarts, dim))
    out_v = np.empty(restarts)
    out_seen = np.zeros(restarts, dtype=np.bool_)
    for r in range(restarts):
        start = starts[r]
        basis = bases[r]
        simplex = np.zeros((d + 1, d))
        for i in range(d):
            simplex[i + 1, i] = step
        vals = np.empty(d + 1)
        seen = False
        for i in range(d + 1):
            v = _clean(f(_unit(start + simplex[i] @ basis), *args))
            seen = seen or v > -np.inf
            vals[i] = -v
        for _ in range(max_iterations):
            order = np.argsort(vals)
            simplex = simplex[order]
            vals = vals[order]
            if vals[0] == -np.inf:
                break
            size = 0.0
            for i in range(1, d + 1):
                size = max(size, np.max(np.abs(simplex[i] - simplex[0])))
            if size <= tol and (abs(vals[-1] - vals[0]) <= tol or vals[-1] == np.inf):
                break
            centroid = np.zeros(d)
            for i in range(d):
                centroid += simplex[i]
            centroid /= d
            worst = simplex[d]
            xr = centroid + (centroid - worst)
            fr = -_clean(f(_unit(start + xr @ basis), *args))
            seen = seen or fr < np.inf
            if fr < vals[0]:
                xe = centroid + 2.0 * (xr - centroid)
                fe = -_clean(f(_unit(start + xe @ basis), *args))
                seen = seen or fe < np.inf
                if fe < fr:
                    simplex[d] = xe
                    vals[d] = fe
                else:
                    simplex[d] = xr
                    vals[d] = fr
                continue
            if fr < vals[d - 1]:
                simplex[d] = xr
                vals[d] = fr
                continue
            if fr < vals[d]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = -_clean(f(_unit(start + xc @ basis), *args))
                accept = fc <= fr
            else:
                xc = centroid - 0.5 * (centroid - worst)
                fc = -_clean(f(_unit(start + xc @ basis), *args))
                accept = fc < vals[d]
            seen = seen or fc < np.inf
            if accept:
                simplex[d] = xc
                vals[d] = fc
                continue
            for i in range(1, d + 1):
                simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                vals[i] = -_clean(f(_unit(start + simplex[i] @ basis), *args))
                seen = seen or vals[i] < np.inf
        best = int(np.argmin(vals))
        out_p[r] = _unit(start + simplex[best] @ basis)
        out_v[r] = -vals[best]
        out_seen[r] = seen
    return out_p, out_v, out_seen


def _rrs_impl(f, args, firsts, noises, shrink):
    # firsts: (restarts, m, dim) uniform directions
    # noises: (restarts, rounds - 1, m, dim) gaussian draws
    restarts, m, dim = firsts.shape
    out_p = np.empty((restarts, dim))
    out_v = np.empty(restarts)
    out_seen = np.zeros(restarts, dtype=np.bool_)
    for r in range(restarts):
        best = firsts[r, 0].copy()
        f_best = -np.inf
        seen = False
        for i in range(m):
            v = _clean(f(firsts[r, i], *args))
            seen = seen or v > -np.inf
            if v > f_best:
                f_best = v
                best[:] = firsts[r, i]
        center = best.copy()
        cand = np.empty(dim)
        step = 1.0 / np.sqrt(dim)
        for t in range(noises.shape[1]):
            center[:] = best
            for i in range(m):
                norm = 0.0
                for j in range(dim):
                    cand[j] = center[j] + step * noises[r, t, i, j]
                    norm += cand[j] * cand[j]
                norm = np.sqrt(norm)
                for j in range(dim):
                    cand[j] /= norm
                v = _clean(f(cand, *args))
                seen = seen or v > -np.inf
                if v > f_best:
                    f_best = v
                    best[:] = cand
            step *= shrink
        out_p[r] = best
        out_v[r] = f_best
        out_seen[r] = seen
    return out_p, out_v, out_seen


_JIT = {}
_IMPLS = {"cd": _cd_impl, "nm": _nm_impl, "rrs": _rrs_impl}


def _kernel_types(name: str, args: tuple):
    # explicit first-class function types keep the on-disk cache key stable
    # across processes (a raw dispatcher type is process specific)
    argt = numba.typeof(args)
    vec = types.float64[::1]
    ftype = types.FunctionType(types.float64(vec, *argt.types))
    mat = types.float64[:, ::1]
    if name == "cd":
        return (ftype, argt, mat, types.int64, types.float64, types.int64)
    if name == "nm":
        return (ftype, argt, mat, types.float64[:, :, ::1], types.int64, types.float64, types.float64)
    return (ftype, argt, types.float64[:, :, ::1], types.float64[:, :, :, ::1], types.float64)


def _kernel(name: str, objective, args: tuple):
    if not isinstance(objective, Dispatcher):
        return _IMPLS[name]
    sig = _kernel_types(name, args)
    key = (name, sig)
    if key not in _JIT:
        _JIT[key] = numba.njit(sig, cache=True)(_IMPLS[name])
    return _JIT[key]


_clean_py, _unit_py = _clean, _unit
_clean = numba.njit(cache=True)(_clean_py)
_unit = numba.njit(cache=True)(_unit_py)


def tangent_basis(p: np.ndarray) -> np.ndarray:
    """Orthonormal basis, as ``dim - 1`` rows, of the tangent plane at unit vector ``p``."""
    dim = p.size
    q, _ = np.linalg.qr(np.column_stack([p, np.eye(dim)]))
    return np.ascontiguousarray(q[:, 1:dim].T)


def sphere_optimize(
    objective: Callable,
    dim: int,
    method: Optimizer | str = Optimizer.NELDER_MEAD,
    *,
    args: tuple = (),
    restarts: int = 10,
    max_iterations: int = 100,
    tol: float = 1e-6,
    budget: int = 5000,
    seed: int | np.random.SeedSequence = 0,
) -> tuple[np.ndarray, float]:
    """Maximize ``objective(p, *args)`` over unit vectors ``p`` of length ``dim``.

    Args:
        objective: Scalar function of a unit vector. ``+inf`` is allowed,
            NaN is treated as missing. Pass an ``njit`` function for speed.
        dim: Ambient dimension (>= 1).
        method: Search algorithm.
        args: Extra positional arguments forwarded to the objective.
        restarts: Number of independent starting points.
        max_iterations: Sweep cap for coordinate descent, iteration cap for
            Nelder-Mead.
        tol: Convergence tolerance on improvement and simplex size.
        budget: Total evaluations for refined random search, split evenly
            over restarts and rounds.
        seed: Integer seed or seed sequence.

    Returns:
        Best direction and its value over all restarts. The value is a
        maximum over evaluated points, so it bounds the supremum from below.

    Raises:
        NumericError: If every evaluated value was NaN or ``-inf``.
    """
    method = Optimizer(method)
    if dim < 1:
        raise ConfigError("dim must be >= 1")
    if restarts < 1 or max_iterations < 1 or budget < 1:
        raise ConfigError("restarts, max_iterations and budget must be positive")
    if not tol > 0:
        raise ConfigError("tol must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rngs = [np.random.default_rng(c) for c in ss.spawn(restarts)]
    args = tuple(args)

    if dim == 1:
        dirs = np.array([[1.0], [-1.0]])
        vals = np.array([_clean_py(float(objective(p, *args))) for p in dirs])
        seen = vals > -np.inf
    else:
        name = {Optimizer.COORDINATE_DESCENT: "cd", Optimizer.NELDER_MEAD: "nm"}.get(method, "rrs")
        kernel = _kernel(name, objective, args)
        if method is Optimizer.REFINED_RANDOM_SEARCH:
            per_round = max(1, budget // (restarts * RRS_ROUNDS))
            firsts = np.empty((restarts, per_round, dim))
            noises = np.empty((restarts, RRS_ROUNDS - 1, per_round, dim))
            for i, rng in enumerate(rngs):
                firsts[i] = random_directions(rng, per_round, dim)
                noises[i] = rng.standard_normal((RRS_ROUNDS - 1, per_round, dim))
            dirs, vals, seen = kernel(objective, args, firsts, noises, RRS_SHRINK)
        else:
            starts = np.stack([random_directions(rng, 1, dim)[0] for rng in rngs])
            if method is Optimizer.COORDINATE_DESCENT:
                dirs, vals, seen = kernel(objective, args, starts, int(max_iterations), float(tol), CD_GRID)
            else:
                bases = np.stack([tangent_basis(p) for p in starts])
                dirs, vals, seen = kernel(objective, args, starts, bases, int(max_iterations), float(tol), 0.5)
    any_seen = bool(np.any(seen))
    # first restart wins ties, so adding restarts never changes an earlier optimum
    best = int(np.argmax(vals))
    best_dir, best_val = np.asarray(dirs[best]), float(vals[best])
    if not any_seen:
        raise NumericError("objective is non-finite at every evaluated direction")
    return best_dir.copy(), float(best_val)
