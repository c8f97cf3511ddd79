"""Trajectories of piecewise systems with singular instants.

Between singular instants the active smooth piece is integrated with an
embedded Dormand-Prince pair.  Surface crossings are located on the dense
output, attractive surfaces are followed with the sliding vector field and
tangential one-sided fields near the origin trigger an equilibrium snap.
At a singular instant the left limit is tested with a Cauchy criterion on
geometrically spaced samples; the run then continues from the limit, stays
at the origin, or stops because no limit exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .core_types import (
    IntegratorSettings,
    PiecewiseSystem,
    ScenarioConfig,
    SmoothPiece,
    SwitchingSurface,
    Trajectory,
    TrajectorySegment,
    as_state,
    as_time,
    trajectory_violations,
)
from .errors import (
    Degenerate,
    FilippovError,
    GapInDomain,
    InsufficientSamples,
    LimitMismatch,
    NoSignChange,
    NotAttractive,
    StepBudget,
    StepUnderflow,
    UndefinedPoint,
)
from .filippov import FilippovProbe, adjacent_pieces, contains_zero, filippov_set, sliding_vector_field

__all__ = [
    "IntegratorSettings",
    "ContinuationReport",
    "StepTail",
    "SlidingStep",
    "OUTCOMES",
    "step_classical",
    "locate_event",
    "step_sliding",
    "detect_limit",
    "geometric_times",
    "integrate",
    "solve",
    "concatenate",
]

OUTCOMES = ("continued-with-limit", "continued-with-zero", "no-limit-exists",
            "horizon-reached", "step-budget-exhausted")


@dataclass(frozen=True)
class ContinuationReport:
    outcome: str
    limit_estimate: Optional[np.ndarray] = None
    evidence: dict = field(default_factory=dict)
    time: float = math.nan
    message: str = ""

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        continued = self.outcome in ("continued-with-limit", "continued-with-zero")
        if continued != (self.limit_estimate is not None):
            raise ValueError("limit_estimate must be given exactly for continued outcomes")

    def summary(self) -> str:
        parts = [f"outcome: {self.outcome}"]
        if math.isfinite(self.time):
            parts.append(f"at t = {self.time!r}")
        if self.limit_estimate is not None:
            parts.append("limit = (" + ", ".join(repr(float(v)) for v in self.limit_estimate) + ")")
        if "ratio" in self.evidence:
            parts.append(f"tail ratio = {self.evidence['ratio']:.4g}")
        if self.message:
            parts.append(self.message)
        return "; ".join(parts)


# ---------------------------------------------------------------------------
# single steps


_EVENT_SCAN = 33  # dense-output points scanned for the first crossing in a step
_EMPTY_I = np.zeros(0, dtype=np.int64)
_EMPTY_F = np.zeros(0)


def _python_field(piece: SmoothPiece):
    def f(kind, t, x, p, out):
        out[:] = piece.field(x, t)
    return f


def _python_guard(sys: PiecewiseSystem):
    def g(t, x, G, b, out):
        for i, s in enumerate(sys.surfaces):
            out[i] = float(s.sigma(x, t))
    return g


def _run_piece(sys, piece, t, x, t_stop, stops, h, settings, t_sing, watch=_EMPTY_I, wsign=_EMPTY_F,
               max_steps=None, single=False, atol=None):
    """Run the step loop for one piece; returns the raw loop tuple."""
    max_steps = settings.max_steps if max_steps is None else max_steps
    atol = settings.atol if atol is None else atol
    G, b = sys.guard_data()
    G = np.ascontiguousarray(G, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    args = (float(t), np.ascontiguousarray(x, dtype=float), float(t_stop),
            np.ascontiguousarray(stops, dtype=float), float(h), settings.rtol, float(atol),
            float(settings.max_step), float(t_sing), settings.min_step_fraction, G, b,
            np.ascontiguousarray(watch, dtype=np.int64), np.ascontiguousarray(wsign, dtype=float),
            int(max_steps), bool(single), kernels.RK_A, kernels.RK_B, kernels.RK_C, kernels.RK_E)
    if piece.compiled and sys.linear_surfaces:
        return kernels.compiled_loop(piece.kind, piece.params, *args)
    loop = kernels.python_loop(_python_field(piece), _python_guard(sys))
    return loop(-1, _EMPTY_F, *args)


def _raise_status(status, t):
    if status == kernels.UNDERFLOW:
        raise StepUnderflow(f"step size underflow at t = {t!r}")
    if status == kernels.BUDGET:
        raise StepBudget(f"step budget exhausted at t = {t!r}")
    if status == kernels.NONFINITE:
        raise UndefinedPoint(f"non-finite field value at t = {t!r}")


def step_classical(sys: PiecewiseSystem, x, t: float, h: float, settings: IntegratorSettings = IntegratorSettings()):
    """One accepted embedded Runge-Kutta step of the piece active at ``(x, t)``.

    Returns ``(x_next, h_used, h_suggest)`` with ``h_used <= h``; near the
    next singular instant ``s`` the step also obeys
    ``h_used <= min_step_fraction * (s - t)``.
    """
    x = as_state(x, sys.dimension)
    piece = sys.piece_at(x, t)
    s = sys.singular_times.next_after(t)
    res = _run_piece(sys, piece, t, x, t + h, _EMPTY_F, h, settings, s, single=True)
    status, t_new, x_new, h_next = res[0], res[1], res[2], res[3]
    _raise_status(status, t_new)
    return x_new.copy(), t_new - t, h_next


@dataclass(frozen=True)
class StepTail:
    """Data of one step with its dense output: ``[t, t + h]`` from ``x``."""

    t: float
    x: np.ndarray
    h: float
    K: np.ndarray

    def state(self, tq):
        theta = (np.asarray(tq, dtype=float) - self.t) / self.h
        return kernels.dense_eval(self.t, self.x, self.h, self.K, theta)

    @property
    def end_state(self) -> np.ndarray:
        return self.state(self.t + self.h)


def locate_event(tail: StepTail, surface: SwitchingSurface, event_tol: float = 1e-10,
                 side: Optional[int] = None) -> float:
    """Time in ``(tail.t, tail.t + h]`` where ``surface`` is crossed.

    The crossing is bracketed on the dense output and refined with Brent's
    method to ``event_tol``.  ``side`` is the sign of sigma before the
    crossing; when omitted it is read from the start of the step.
    """
    def sig(theta):
        tq = tail.t + theta * tail.h
        return float(surface.sigma(tail.state(tq), tq))

    if side is None:
        s0 = sig(0.0)
        side = 0 if s0 == 0 else (1 if s0 > 0 else -1)
    if side == 0:
        raise NoSignChange("sigma vanishes at the start of the step; pass side")
    if sig(1.0) * side > 0:
        raise NoSignChange("sigma keeps its sign over the step")
    # earliest sign change on a scan of the dense output; the start may lie on the surface
    grid = np.linspace(0.0, 1.0, _EVENT_SCAN)
    vals = np.array([sig(th) for th in grid]) * side
    pos = np.nonzero(vals > 0)[0]
    if pos.size == 0:
        raise NoSignChange("no point of the step on the expected side of the surface")
    i = pos[0]
    after = np.nonzero(vals[i:] <= 0)[0]
    j = i + after[0]
    lo, hi = grid[j - 1], grid[j]
    if vals[j] == 0.0:
        return tail.t + hi * tail.h
    theta = brentq(sig, lo, hi, xtol=event_tol / tail.h, rtol=4 * np.finfo(float).eps)
    return tail.t + theta * tail.h


@dataclass(frozen=True)
class SlidingStep:
    x: np.ndarray
    t: float
    h_used: float
    h_next: float
    exit: str  # "sliding" | "cross" | "equilibrium"


def _project(surface: SwitchingSurface, x, t, iters: int = 4):
    for _ in range(iters):
        s = float(surface.sigma(x, t))
        if s == 0.0:
            break
        g = np.asarray(surface.gradient(x, t), dtype=float)
        x = x - s * g / float(g @ g)
    return x


def _one_sided(sys, x, t, j, probe_radius):
    found, _ = adjacent_pieces(sys, x, t, probe_radius)
    plus = [p for p, sv in found if sv[j] == 1]
    minus = [p for p, sv in found if sv[j] == -1]
    if not plus or not minus:
        raise UndefinedPoint(f"surface {j} does not separate two pieces at t = {t!r}")
    return plus[0], minus[0]


def step_sliding(sys: PiecewiseSystem, x, t: float, surface: int, h: float,
                 settings: IntegratorSettings = IntegratorSettings(), t_stop: Optional[float] = None) -> SlidingStep:
    """One step along the sliding vector field on surface index ``surface``.

    The state is projected back onto the surface after the step.  ``exit``
    is ``"cross"`` when attractivity fails at the new point and
    ``"equilibrium"`` when both one-sided fields are tangential there.
    """
    x = as_state(x, sys.dimension)
    surf = sys.surfaces[surface]
    plus, minus = _one_sided(sys, x, t, surface, settings.probe_radius)
    n0 = np.asarray(surf.gradient(x, t), dtype=float)
    try:
        sliding_vector_field(plus.field(x, t), minus.field(x, t), n0)  # NotAttractive propagates
    except Degenerate:
        return SlidingStep(x, float(t), 0.0, float(h), "equilibrium")

    def field(kind, tq, y, p, out):
        fp, fm = plus.field(y, tq), minus.field(y, tq)
        n = np.asarray(surf.gradient(y, tq), dtype=float)
        ap, am = float(n @ fp), float(n @ fm)
        if am == ap:
            out[:] = 0.5 * (fp + fm)
        else:
            a = am / (am - ap)
            out[:] = a * fp + (1.0 - a) * fm

    loop = kernels.python_loop(field, kernels.linear_guard.py_func)
    end = t + h if t_stop is None else min(t + h, t_stop)
    s = sys.singular_times.next_after(t)
    res = loop(-1, _EMPTY_F, float(t), x, float(end), _EMPTY_F, float(h), settings.rtol, settings.atol,
               float(settings.max_step), float(s), settings.min_step_fraction, np.zeros((0, sys.dimension)),
               _EMPTY_F, _EMPTY_I, _EMPTY_F, settings.max_steps, True,
               kernels.RK_A, kernels.RK_B, kernels.RK_C, kernels.RK_E)
    status, t_new, x_new, h_next = res[0], res[1], res[2], res[3]
    _raise_status(status, t_new)
    x_new = _project(surf, x_new.copy(), t_new)
    exit = "sliding"
    try:
        sliding_vector_field(plus.field(x_new, t_new), minus.field(x_new, t_new),
                             np.asarray(surf.gradient(x_new, t_new), dtype=float))
    except NotAttractive:
        exit = "cross"
    except Degenerate:
        exit = "equilibrium"
    return SlidingStep(x_new, t_new, t_new - t, h_next, exit)


# ---------------------------------------------------------------------------
# limits at singular instants


def geometric_times(T: float, t_ref: float, octaves: int) -> np.ndarray:
    """``T - 2**-k (T - t_ref)`` for ``k = 0..octaves``."""
    return T - (T - t_ref) * np.exp2(-np.arange(octaves + 1, dtype=float))


def _decay_ratio(v: np.ndarray) -> float:
    """Per-sample contraction ratio of a sequence, from the maxima of its two halves.

    A sequence that keeps oscillating at a fixed amplitude has ratio ~1
    whatever its phase, while a geometric one has its own ratio.
    """
    m = v.size // 2
    a, b = float(v[:m].max()), float(v[v.size - m:].max())
    if a == 0.0:
        return 0.0 if b == 0.0 else math.inf
    return (b / a) ** (1.0 / (v.size - m))


def detect_limit(samples, T: float, settings: IntegratorSettings = IntegratorSettings()) -> ContinuationReport:
    """Cauchy test for ``lim x(t)`` as ``t -> T`` from geometric samples.

    ``samples`` is ``(t, x)`` (arrays) or a list of ``(t, x)`` pairs with
    ``T - t_k = 2**-k (T - t_ref)``, ``k = 0..K``, ``K >= 20``.  The tail
    increments ``|x_{k+1} - x_k|``, ``k >= K/2``, must contract with ratio
    at most ``settings.ratio_max``; the limit is then ``x_K`` up to the
    geometric tail bound.  The limit is snapped to zero when the norms
    themselves contract (or zero lies inside the tail bound).
    """
    if isinstance(samples, tuple) and len(samples) == 2 and np.ndim(samples[0]) == 1 and np.ndim(samples[1]) == 2:
        t, x = samples
    else:
        t = np.array([s[0] for s in samples], dtype=float)
        x = np.array([np.ravel(s[1]) for s in samples], dtype=float)
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    K = t.size - 1
    if K < 20:
        raise InsufficientSamples(f"need at least 21 geometric samples, got {t.size}")
    gaps = T - t
    expected = gaps[0] * np.exp2(-np.arange(K + 1, dtype=float))
    if not (gaps[0] > 0 and np.allclose(gaps, expected, rtol=1e-9, atol=0.0)):
        raise InsufficientSamples("samples are not geometrically spaced towards T")
    if not np.all(np.isfinite(x)):
        raise InsufficientSamples("non-finite samples")

    inc = np.linalg.norm(np.diff(x, axis=0), axis=1)
    k0 = K // 2
    ratio = _decay_ratio(inc[k0:])
    norm_ratio = _decay_ratio(np.linalg.norm(x[k0:], axis=1))
    L = x[-1].copy()
    last = float(inc[K - (K - k0) // 2:].max())
    tail = last * ratio / (1.0 - ratio) if ratio < 1 else math.inf
    evidence = dict(times=t.copy(), increments=inc, ratio=ratio, norm_ratio=norm_ratio, tail_bound=tail)
    if ratio > settings.ratio_max:
        return ContinuationReport("no-limit-exists", None, evidence, T,
                                  "tail increments do not contract (Cauchy test failed)")
    if np.linalg.norm(L) <= tail + settings.conv_radius or norm_ratio <= settings.ratio_max:
        return ContinuationReport("continued-with-zero", np.zeros_like(L), evidence, T)
    return ContinuationReport("continued-with-limit", L, evidence, T)


# ---------------------------------------------------------------------------
# the solver


def _on_radius(x) -> float:
    """Distance (in units of |grad sigma|) below which a point counts as on a surface."""
    return 16.0 * np.finfo(float).eps * (1.0 + float(np.linalg.norm(x)))


def _surface_atol(st: IntegratorSettings, x, watch) -> float:
    """Absolute tolerance for a run that watches switching surfaces.

    Square-root corrections move the state off a surface by O(|x|^2) only,
    so near the origin the absolute tolerance shrinks with |x|^2 to keep
    the side of the surface resolved down to the snap radius.
    """
    if len(watch) == 0:
        return st.atol
    return max(min(st.atol, st.rtol * float(x @ x)), 1e-300)


class _Builder:
    """Accumulates samples of one segment."""

    def __init__(self, mode: str, t: float, x):
        self.mode = mode
        self.ts = [np.array([t], dtype=float)]
        self.xs = [np.array(x, dtype=float).reshape(1, -1)]
        self.t_last = t
        self.x_last = np.array(x, dtype=float)

    def add(self, ts, xs):
        ts = np.asarray(ts, dtype=float)
        xs = np.asarray(xs, dtype=float).reshape(ts.size, -1)
        keep = ts > self.t_last
        if not np.any(keep):
            return
        ts, xs = ts[keep], xs[keep]
        self.ts.append(ts.copy())
        self.xs.append(xs.copy())
        self.t_last = float(ts[-1])
        self.x_last = xs[-1].copy()

    def segment(self, end: Optional[float] = None) -> TrajectorySegment:
        return TrajectorySegment(np.concatenate(self.ts), np.concatenate(self.xs), self.mode, end)


class _Solver:
    def __init__(self, sys: PiecewiseSystem, settings: IntegratorSettings, t_end: float):
        self.sys = sys
        self.st = settings
        self.t_end = t_end
        self.probe = FilippovProbe(settings.probe_radius)
        self.segments: list = []
        self.reports: list = []
        self.steps_left = settings.max_steps
        self.h = math.nan
        self.geo = None
        self.geo_x: dict = {}

    # -- helpers -----------------------------------------------------------

    def zero_ok(self, t: float) -> bool:
        try:
            F = filippov_set(self.sys, np.zeros(self.sys.dimension), t, self.probe)
        except FilippovError:
            return False
        return contains_zero(F)

    def record_geo(self, ts, xs):
        if self.geo is None:
            return
        ts = np.asarray(ts)
        hit = np.isin(ts, self.geo)
        for tv, xv in zip(ts[hit], np.asarray(xs)[hit]):
            self.geo_x[float(tv)] = np.array(xv)

    def add(self, b: _Builder, ts, xs):
        b.add(ts, xs)
        self.record_geo(ts, xs)

    def close(self, b: _Builder, end: Optional[float] = None):
        self.segments.append(b.segment(end))

    def initial_h(self, t, t_stop):
        if math.isfinite(self.h) and self.h > 0:
            return self.h
        return min(1e-3, 0.01 * max(t_stop - t, 1e-12))

    # -- surfaces ----------------------------------------------------------

    def on_surface(self, x, t, on, allow_snap=True):
        """Decide how to leave a point on the surfaces ``on``.

        Returns ``("zero",)``, ``("slide", j)`` or ``("piece", piece, signs)``.
        """
        sys = self.sys
        if allow_snap and np.linalg.norm(x) <= self.st.conv_radius and self.zero_ok(t):
            return ("zero",)
        found, _ = adjacent_pieces(sys, x, t, self.st.probe_radius)
        if not found:
            raise UndefinedPoint(f"no piece adjacent to x={x}, t={t!r}")
        if len(on) == 1:
            j = on[0]
            n = np.asarray(sys.surfaces[j].gradient(x, t), dtype=float)
            plus = [(p, sv) for p, sv in found if sv[j] == 1]
            minus = [(p, sv) for p, sv in found if sv[j] == -1]
            if plus and minus:
                fp, fm = plus[0][0].field(x, t), minus[0][0].field(x, t)
                ap, am = float(n @ fp), float(n @ fm)
                try:
                    sliding_vector_field(fp, fm, n)
                    return ("slide", j)
                except NotAttractive:
                    pass
                except Degenerate:
                    pass
                if ap < 0 and am < 0:
                    return ("piece",) + minus[0]
                if ap > 0 and am > 0:
                    return ("piece",) + plus[0]
                if ap > 0 > am:
                    return ("piece",) + plus[0]  # repulsive: leave on the + side
                return ("piece",) + (plus[0] if ap + am >= 0 else minus[0])
        # several surfaces, or only one side defined: the first candidate
        return ("piece",) + found[0]

    # -- phases ------------------------------------------------------------

    def classical_phase(self, t, x, stop, s, from_zero=False):
        """Integrate from ``(t, x)`` to ``stop`` (< ``s``) in classical/sliding mode.

        Returns ``(t, x, snapped)``; ``snapped`` means an equilibrium snap
        happened at ``t`` and a zero-continuation should follow.
        """
        sys, st = self.sys, self.st
        b = _Builder("classical", t, x)
        self.record_geo([t], [x])
        stuck = 0
        first = True
        while t < stop:
            relevant = sys.relevant_surfaces(t)
            signs = sys.sign_vector(x, t, _on_radius(x))
            on = [j for j in relevant if signs[j] == 0]
            if first and not from_zero and not np.any(x) and self.zero_ok(t):
                self.close(b)
                return t, x, True
            if on:
                dec = self.on_surface(x, t, on, allow_snap=not (first and from_zero))
            else:
                found = sys.matching(signs, t)
                if not found:
                    raise UndefinedPoint(f"no piece covers x={x}, t={t!r}")
                dec = ("piece", found[0], signs)
            first = False
            if dec[0] == "zero":
                self.close(b)
                return t, np.zeros_like(x), True
            if dec[0] == "slide":
                self.close(b)
                t, x, exit = self.slide(dec[1], t, x, stop, s)
                b = _Builder("classical", t, x)
                if exit == "equilibrium" and np.linalg.norm(x) <= st.conv_radius and self.zero_ok(t):
                    self.close(b)
                    return t, np.zeros_like(x), True
                continue
            piece, side = dec[1], dec[2]
            watch = np.array([j for j in relevant], dtype=np.int64)
            wsign = np.array([side[j] if side[j] != 0 else 1 for j in relevant], dtype=float)
            target = min(stop, piece.window.end_after(t))
            stops = self.geo[(self.geo > t) & (self.geo < target)] if self.geo is not None else _EMPTY_F
            res = _run_piece(sys, piece, t, x, target, stops, self.initial_h(t, target), st, s,
                             watch, wsign, max_steps=self.steps_left, atol=_surface_atol(st, x, watch))
            status, t1, x1, h1, ts, xs = res[:6]
            self.steps_left -= int(res[12])
            self.h = h1
            self.add(b, ts, xs)
            t0_run = t
            t, x = float(t1), np.array(x1)
            if status == kernels.EVENT:
                tail = StepTail(float(res[7]), np.array(res[9]), float(res[8]), np.array(res[11]))
                x_b = np.array(res[10])
                best = None
                for w, j in enumerate(watch):
                    surf = sys.surfaces[j]
                    if float(surf.sigma(x_b, tail.t + tail.h)) * wsign[w] < 0:
                        try:
                            te = locate_event(tail, surf, st.event_tol, side=int(wsign[w]))
                        except NoSignChange:
                            te = tail.t + tail.h
                        if best is None or te < best[0]:
                            best = (te, j)
                te, j = best
                xe = _project(sys.surfaces[j], tail.state(te), te)
                if te <= t0_run:
                    stuck += 1
                    if stuck > 3:
                        raise Degenerate(f"no progress leaving surface {j} at t = {te!r}")
                else:
                    stuck = 0
                self.add(b, [te], [xe])
                t, x = b.t_last, b.x_last.copy()
                # keep the step size of the rejected step as a hint
                self.h = max(tail.h, 1e-12)
            else:
                _raise_status(status, t)
        self.close(b)
        return t, x, False

    def slide(self, j, t, x, stop, s):
        """Follow the sliding field on surface ``j``; returns ``(t, x, exit)``."""
        b = _Builder("sliding", t, x)
        h = self.initial_h(t, stop)
        exit = "sliding"
        while t < stop:
            nxt = self.geo[self.geo > t] if self.geo is not None else _EMPTY_F
            t_lim = min(stop, float(nxt[0])) if nxt.size else stop
            if self.steps_left <= 0:
                raise StepBudget(f"step budget exhausted at t = {t!r}")
            step = step_sliding(self.sys, x, t, j, h, self.st, t_stop=t_lim)
            self.steps_left -= 1
            self.add(b, [step.t], [step.x])
            t, x, h = step.t, step.x, step.h_next
            if step.exit != "sliding":
                exit = step.exit
                break
        self.h = h
        self.close(b)
        return t, x, exit

    def zero_phase(self, t, stop):
        """Zero-continuation on ``[t, stop]`` while ``0 in F(0, t)``.

        Returns ``(t_reached, defined)``; ``defined`` is False when the
        system has no right-hand side right after ``t``.
        """
        grid = np.linspace(t, stop, max(self.st.zero_samples, 2))
        D = self.sys.singular_times
        last_ok = t
        for i, tg in enumerate(grid):
            if D.contains(float(tg)):
                if i == 0 or i == grid.size - 1:
                    last_ok = float(tg)
                    continue
            if self.zero_ok(float(tg)):
                last_ok = float(tg)
                continue
            if i == 0 or (i == 1 and D.contains(float(grid[0]))):
                try:
                    filippov_set(self.sys, np.zeros(self.sys.dimension), float(tg), self.probe)
                except UndefinedPoint:
                    return t, False
            break
        if last_ok <= t:
            return t, True
        ts = grid[grid <= last_ok]
        seg = TrajectorySegment(ts, np.zeros((ts.size, self.sys.dimension)), "zero-continuation")
        self.segments.append(seg)
        return last_ok, True

    # -- driver ------------------------------------------------------------

    def run(self, t0: float, x0: np.ndarray):
        sys, st = self.sys, self.st
        D = sys.singular_times
        t, x = t0, x0
        mode = "zero" if (not np.any(x0) and (D.contains(t0) or self.zero_ok(t0))) else "classical"
        from_zero = False
        while t < self.t_end:
            s = D.next_after(t)
            stop = min(s, self.t_end)
            if mode == "zero":
                t_new, defined = self.zero_phase(t, stop)
                if not defined:
                    self.reports.append(ContinuationReport(
                        "horizon-reached", None, {}, t, "the system is not defined beyond this instant"))
                    break
                if t_new < stop:
                    t, x, mode, from_zero = t_new, np.zeros_like(x), "classical", True
                    continue
                t = stop
                if stop == s:
                    self.reports.append(ContinuationReport(
                        "continued-with-zero", np.zeros_like(x), {}, s, "state already at the origin"))
                continue
            if stop < s:
                self.geo = None
                t, x, snapped = self.classical_phase(t, x, stop, s, from_zero)
                from_zero = False
                if snapped:
                    mode = "zero"
                    continue
                break
            # approach the singular instant s through geometric samples
            self.geo = geometric_times(s, t, st.limit_octaves)
            self.geo_x = {}
            t_k = float(self.geo[-1])
            t, x, snapped = self.classical_phase(t, x, t_k, s, from_zero)
            from_zero = False
            if snapped:
                mode = "zero"
                self.geo = None
                continue
            samples = [(tv, self.geo_x[float(tv)]) for tv in self.geo if float(tv) in self.geo_x]
            if len(samples) != self.geo.size:
                raise InsufficientSamples("geometric samples were not all reached")
            self.geo = None
            rep = detect_limit(samples, s, st)
            last = self.segments.pop()
            b = _Builder(last.mode, last.start, last.x[0])
            b.add(last.t, last.x)
            if rep.outcome == "no-limit-exists":
                self.segments.append(b.segment(end=s))
                self.reports.append(rep)
                break
            L = rep.limit_estimate
            if rep.outcome == "continued-with-zero" and not self._zero_after(s):
                rep = ContinuationReport("continued-with-limit", x.copy(), rep.evidence, s,
                                         "0 is not in F(0, t) after the singular instant")
                L = rep.limit_estimate
            b.add([s], [L])
            self.segments.append(b.segment())
            self.reports.append(rep)
            t, x = s, np.array(L)
            if rep.outcome == "continued-with-zero":
                mode = "zero"
            elif not any(p.window.contains(s) for p in sys.pieces):
                self.reports[-1] = ContinuationReport(
                    "horizon-reached", None, rep.evidence, s, "the system is not defined beyond this instant")
                break

    def _zero_after(self, s):
        hi = min(self.sys.singular_times.next_after(s), self.t_end)
        if not hi > s:
            return True
        tp = s + min(1e-6 * max(1.0, s), 0.5 * (hi - s))
        return self.zero_ok(tp)

    def trajectory(self) -> Trajectory:
        return Trajectory(tuple(self.segments), self.st.continuity_tol)

    def report(self) -> ContinuationReport:
        if self.reports:
            return self.reports[-1]
        return ContinuationReport("horizon-reached", None, {}, self.segments[-1].end)


def integrate(sys: PiecewiseSystem, t0: float, x0, t_stop: float,
              settings: IntegratorSettings = IntegratorSettings()) -> Trajectory:
    """Classical (and sliding) integration on ``[t0, t_stop]`` with ``t_stop`` before the next singular instant."""
    t0, t_stop = as_time(t0), as_time(t_stop)
    x0 = as_state(x0, sys.dimension)
    s = sys.singular_times.next_after(t0)
    if not t_stop < s:
        raise ValueError(f"t_stop = {t_stop!r} reaches the singular instant {s!r}")
    solver = _Solver(sys, settings, t_stop)
    t, x, snapped = solver.classical_phase(t0, x0, t_stop, s)
    if snapped and t < t_stop:
        solver.zero_phase(t, t_stop)
    return solver.trajectory()


def solve(sys: PiecewiseSystem, scenario: ScenarioConfig, settings: Optional[IntegratorSettings] = None):
    """Maximal trajectory from ``(scenario.t0, scenario.x0)`` up to ``scenario.t_end``.

    Returns ``(trajectory, report)``.  The report is that of the last
    singular instant met, or ``horizon-reached`` if none was.
    """
    st = scenario.settings() if settings is None else settings
    x0 = as_state(scenario.x0, sys.dimension)
    solver = _Solver(sys, st, as_time(scenario.t_end))
    solver.run(as_time(scenario.t0), x0)
    return solver.trajectory(), solver.report()


def concatenate(parts: Sequence[Trajectory], continuity_tol: float = 1e-6) -> Trajectory:
    """Glue trajectories on abutting domains into one trajectory."""
    parts = sorted(parts, key=lambda p: p.domain[0])
    if len(parts) == 1:
        return parts[0]
    for a, b in zip(parts[:-1], parts[1:]):
        a_end, b_start = a.domain[1], b.domain[0]
        if a_end != b_start:
            raise GapInDomain(f"domains do not abut: {a_end!r} vs {b_start!r}")
        if not a.domain[2]:
            raise LimitMismatch(f"no left limit at {a_end!r}")
        jump = float(np.linalg.norm(a.final_state() - b.segments[0].x[0]))
        if jump > continuity_tol:
            raise LimitMismatch(f"limits differ by {jump:.3g} at t = {a_end!r}")
    segs = tuple(s for p in parts for s in p.segments)
    assert not trajectory_violations(segs, continuity_tol)
    return Trajectory(segs, continuity_tol)
