"""Numeric diagnostics of sampled trajectories.

Everything here works on samples: derivatives are three-point central
differences and variations are sums of sample increments (lower bounds of
the true variation), so unbounded variation shows up as growth along a
sequence of cutoffs rather than as a single number.

Components are numbered from 1 (``x1``, ``x2``, ...) throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core_types import PiecewiseSystem, Trajectory
from .errors import FilippovError, IntervalTouchesSingularity, OutOfDomain, TooSparse
from .filippov import FilippovProbe, filippov_set


# ---------------------------------------------------------------------------
# batched field evaluation


def field_samples(sys: PiecewiseSystem, t, x, probe: FilippovProbe = FilippovProbe()):
    """Vertices of ``F(x_i, t_i)`` for many points.

    Returns ``(single, values, sets)``: ``single[i]`` is True where exactly
    one piece applies and ``values[i]`` is its field value; elsewhere
    ``sets[i]`` holds the vertex array from :func:`filippov_set` (or None
    when F is undefined there).
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float).reshape(t.size, sys.dimension)
    m = t.size
    signs = np.zeros((m, len(sys.surfaces)), dtype=int)
    near = np.zeros(m, dtype=bool)
    for j, s in enumerate(sys.surfaces):
        v = np.asarray(s.sigma(x, t), dtype=float).reshape(m)
        g = np.linalg.norm(np.asarray(s.gradient(x, t), dtype=float).reshape(m, -1), axis=1)
        signs[:, j] = np.sign(v)
        near |= np.abs(v) <= probe.probe_radius * g
    owner = np.full(m, -1)
    count = np.zeros(m, dtype=int)
    for k, p in enumerate(sys.pieces):
        ok = p.window.contains(t)
        for j, sj in enumerate(p.signs):
            if sj != 0:
                ok &= signs[:, j] == sj
        owner[ok] = k
        count += ok
    bad_t = sys.singular_times.contains_array(t)
    single = (count == 1) & ~near & ~bad_t
    values = np.full((m, sys.dimension), np.nan)
    for k, p in enumerate(sys.pieces):
        sel = single & (owner == k)
        if np.any(sel):
            values[sel] = p.field_many(t[sel], x[sel])
    sets: list = [None] * m
    for i in np.nonzero(~single & ~bad_t)[0]:
        try:
            sets[i] = filippov_set(sys, x[i], float(t[i]), probe).vertices
        except FilippovError:
            sets[i] = None
    return single, values, sets


def _central_differences(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Second-order derivative estimate at interior samples of a nonuniform grid."""
    hl = (t[1:-1] - t[:-2])[:, None]
    hr = (t[2:] - t[1:-1])[:, None]
    return (hl**2 * x[2:] - hr**2 * x[:-2] + (hr**2 - hl**2) * x[1:-1]) / (hl * hr * (hl + hr))


# ---------------------------------------------------------------------------
# residual


@dataclass(frozen=True)
class ResidualReport:
    max_distance: float
    mean_distance: float
    n_points: int
    worst_time: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.n_points > 0 and self.max_distance <= self.tol


def residual_check(traj: Trajectory, sys: PiecewiseSystem, probe: FilippovProbe = FilippovProbe(),
                   tol: float = 1e-2, exclude: Sequence = (), max_gap: float = 1e-3,
                   singular_margin: Optional[float] = None) -> ResidualReport:
    """Distance of the sampled derivative to ``F(x, t)`` at interior samples.

    Samples within ``probe.probe_radius`` of a surface, within
    ``singular_margin`` (default ``probe.probe_radius``) of a singular
    instant, or inside one of the ``exclude`` intervals ``(a, b)`` are
    skipped, as are stencils whose two gaps differ by more than a factor
    1000 (round-off dominates there); derivatives never straddle a segment
    interface.  Raises
    :class:`TooSparse` if a used sample has a neighbour farther than
    ``max_gap``.
    """
    margin = probe.probe_radius if singular_margin is None else singular_margin
    ts, xs, ds = [], [], []
    for seg in traj.segments:
        if seg.t.size < 3:
            continue
        t, x = seg.t, seg.x
        tm = t[1:-1]
        hl, hr = tm - t[:-2], t[2:] - tm
        use = sys.singular_times.distance(tm) > margin
        use &= np.minimum(hl, hr) >= 1e-3 * np.maximum(hl, hr)
        for a, b in exclude:
            use &= ~((tm > a) & (tm < b))
        if not np.any(use):
            continue
        gaps = np.maximum(hl, hr)
        if np.any(gaps[use] > max_gap):
            i = np.nonzero(use & (gaps > max_gap))[0][0]
            raise TooSparse(f"sample gap {gaps[i]:.3g} > {max_gap:.3g} near t = {tm[i]!r}")
        d = _central_differences(t, x)
        ts.append(tm[use])
        xs.append(x[1:-1][use])
        ds.append(d[use])
    if not ts:
        return ResidualReport(math.nan, math.nan, 0, math.nan, tol)
    t = np.concatenate(ts)
    x = np.concatenate(xs)
    d = np.concatenate(ds)
    single, values, sets = field_samples(sys, t, x, probe)
    dist = np.full(t.size, np.nan)
    dist[single] = np.linalg.norm(d[single] - values[single], axis=1)
    # points on surfaces are skipped, as the grid cannot resolve the switching there
    keep = np.isfinite(dist)
    if not np.any(keep):
        return ResidualReport(math.nan, math.nan, 0, math.nan, tol)
    i = int(np.argmax(np.where(keep, dist, -1.0)))
    return ResidualReport(float(dist[i]), float(np.mean(dist[keep])), int(keep.sum()), float(t[i]), tol)


# ---------------------------------------------------------------------------
# variation and oscillation


def _component(traj: Trajectory, component: int):
    if not 1 <= component <= traj.dimension:
        raise ValueError(f"component must be in 1..{traj.dimension}")
    t, x, _ = traj.samples()
    return t, x[:, component - 1]


def _check_interval(traj: Trajectory, a: float, b: float):
    lo, hi, closed = traj.domain
    if not a <= b:
        raise ValueError("empty interval")
    if a < lo or b > hi or (b == hi and not closed):
        raise OutOfDomain(f"[{a!r}, {b!r}] is not inside the trajectory domain")


def total_variation(traj: Trajectory, component: int, interval) -> float:
    """Sum of absolute increments of ``x_component`` over samples in ``[a, b]``."""
    a, b = float(interval[0]), float(interval[1])
    _check_interval(traj, a, b)
    t, v = _component(traj, component)
    sel = (t >= a) & (t <= b)
    return float(np.sum(np.abs(np.diff(v[sel]))))


def vector_variation(traj: Trajectory, interval) -> float:
    """Sum of Euclidean increments of the state over samples in ``[a, b]``."""
    a, b = float(interval[0]), float(interval[1])
    _check_interval(traj, a, b)
    t, x, _ = traj.samples()
    sel = (t >= a) & (t <= b)
    return float(np.sum(np.linalg.norm(np.diff(x[sel], axis=0), axis=1)))


@dataclass(frozen=True)
class VariationCurve:
    cutoffs: np.ndarray
    variations: np.ndarray
    slope: float
    intercept: float
    r_squared: float

    def rows(self):
        return [(float(d), float(v)) for d, v in zip(self.cutoffs, self.variations)]


def fit_log(cutoffs, values):
    """Least-squares fit ``values ~ a ln(1/cutoff) + b``; returns ``(a, b, R^2)``."""
    u = np.log(1.0 / np.asarray(cutoffs, dtype=float))
    v = np.asarray(values, dtype=float)
    A = np.vstack([u, np.ones_like(u)]).T
    (a, b), *_ = np.linalg.lstsq(A, v, rcond=None)
    ss_tot = float(np.sum((v - v.mean()) ** 2))
    ss_res = float(np.sum((v - (a * u + b)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(a), float(b), r2


def variation_growth(traj: Trajectory, component: int, T: float, deltas, t0: Optional[float] = None,
                     per_octave: int = 8) -> VariationCurve:
    """Total variation of ``x_component`` on ``[t0, T - delta]`` for each cutoff.

    Raises :class:`TooSparse` if some octave ``[T - 2 delta, T - delta]``
    holds fewer than ``per_octave`` samples.
    """
    deltas = np.sort(np.asarray(deltas, dtype=float))[::-1]
    if deltas.size < 2 or np.any(deltas <= 0):
        raise ValueError("need at least two positive cutoffs")
    t, _ = _component(traj, component)
    start = traj.domain[0] if t0 is None else float(t0)
    for d in deltas:
        n = np.count_nonzero((t >= T - 2 * d) & (t <= T - d))
        if n < per_octave:
            raise TooSparse(f"only {n} samples in [T - {2 * d:.3g}, T - {d:.3g}]")
    tv = np.array([total_variation(traj, component, (start, T - d)) for d in deltas])
    a, b, r2 = fit_log(deltas, tv)
    return VariationCurve(deltas, tv, a, b, r2)


def oscillation_profile(traj: Trajectory, component: int, T: float, windows) -> list:
    """``(delta, max - min)`` of ``x_component`` over samples in ``(T - delta, T)``."""
    t, v = _component(traj, component)
    lo, hi, _ = traj.domain
    out = []
    for d in windows:
        d = float(d)
        # the window may reach past the last sample: an open end at T is not sampled
        if not d > 0 or T - d < lo or T - d >= hi:
            raise OutOfDomain(f"window ({T - d!r}, {T!r}) is not inside the trajectory domain")
        sel = (t > T - d) & (t < T)
        if not np.any(sel):
            raise OutOfDomain(f"no samples in ({T - d!r}, {T!r})")
        out.append((d, float(v[sel].max() - v[sel].min())))
    return out


# ---------------------------------------------------------------------------
# variation bound on compact intervals


@dataclass(frozen=True)
class BoundReport:
    interval: tuple
    variation: float
    radius: float
    Q: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.variation <= self.bound


def variation_bound_check(traj: Trajectory, sys: PiecewiseSystem, interval, n_times: int = 101,
                          n_ball: int = 200, seed: int = 0,
                          probe: FilippovProbe = FilippovProbe()) -> BoundReport:
    """Check ``TV(x; [a, b]) <= (b - a) Q (1 + 1e-6)``.

    ``M`` is the largest sampled ``|x(t)|`` on the interval and ``Q``
    bounds the vertex norms of ``F`` over ``[a, b] x {|x| <= M}``; it is
    estimated from the trajectory samples, a time grid and pseudo-random
    points of the ball (including its boundary and the origin).
    """
    a, b = float(interval[0]), float(interval[1])
    if sys.singular_times.within(a, b):
        raise IntervalTouchesSingularity(f"[{a!r}, {b!r}] contains a singular instant")
    tv = vector_variation(traj, (a, b))
    t, x, _ = traj.samples()
    sel = (t >= a) & (t <= b)
    ts, xs = t[sel], x[sel]
    M = float(np.max(np.linalg.norm(xs, axis=1))) if ts.size else 0.0

    rng = np.random.default_rng(seed)
    n = sys.dimension
    dirs = rng.normal(size=(n_ball, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = M * np.concatenate([np.ones(n_ball // 2), rng.uniform(size=n_ball - n_ball // 2) ** (1.0 / n)])
    ball = np.vstack([np.zeros((1, n)), dirs * radii[:, None]])
    grid = np.linspace(a, b, n_times)
    pt = np.concatenate([ts, np.repeat(grid, ball.shape[0])])
    px = np.concatenate([xs, np.tile(ball, (n_times, 1))])
    single, values, sets = field_samples(sys, pt, px, probe)
    q = np.linalg.norm(values[single], axis=1).max() if np.any(single) else 0.0
    for V in sets:
        if V is not None:
            q = max(q, float(np.linalg.norm(V, axis=1).max()))
    Q = float(q)
    return BoundReport((a, b), tv, M, Q, (b - a) * Q * (1.0 + 1e-6))
