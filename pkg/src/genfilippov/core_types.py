"""Domain data model: time sets, piecewise systems, trajectories, convex sets.

States are plain ``numpy`` float arrays and times are plain floats; the
helpers :func:`as_state` and :func:`as_time` enforce their invariants at the
boundaries where user data enters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.spatial import ConvexHull

from . import kernels
from .errors import (
    InvalidConfig,
    InvalidTrajectory,
    OnSurface,
    SingularTime,
    UndefinedPoint,
)

MODES = ("classical", "sliding", "zero-continuation", "constructed")


def as_time(t) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0.0:
        raise ValueError(f"time must be finite and nonnegative, got {t!r}")
    return t


def as_state(x, dimension: Optional[int] = None) -> np.ndarray:
    x = np.array(x, dtype=float).reshape(-1)
    if dimension is not None and x.shape[0] != dimension:
        raise ValueError(f"expected state of dimension {dimension}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"state has non-finite entries: {x!r}")
    return x


# ---------------------------------------------------------------------------
# time sets


@dataclass(frozen=True)
class TimeWindow:
    """Half-open window ``[lo, hi)``, optionally repeated with ``period``."""

    lo: float = 0.0
    hi: float = math.inf
    period: Optional[float] = None

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("empty time window")
        if self.period is not None and not (self.hi - self.lo) <= self.period:
            raise ValueError("window longer than its period")

    def contains(self, t):
        t = np.asarray(t, dtype=float)
        if self.period is None:
            return (t >= self.lo) & (t < self.hi)
        u = np.mod(t - self.lo, self.period)
        return (t >= self.lo) & (u < self.hi - self.lo)

    def end_after(self, t: float) -> float:
        """End of the window occurrence containing ``t``."""
        if self.period is None:
            return self.hi
        k = math.floor((t - self.lo) / self.period)
        end = self.lo + k * self.period + (self.hi - self.lo)
        if end <= t:
            end += self.period
        return end


@dataclass(frozen=True)
class SingularTimeSet:
    """The set D of instants where the right-hand side is not locally bounded.

    Either a finite list (``kind="finite"``) or an arithmetic progression
    ``start, start + period, ...`` (``kind="progression"``).  Neither form
    has cluster points.
    """

    kind: str = "finite"
    elements: tuple = ()
    start: float = 0.0
    period: float = 0.0

    def __post_init__(self):
        if self.kind == "finite":
            els = tuple(sorted(float(e) for e in self.elements))
            if any(e < 0 or not math.isfinite(e) for e in els):
                raise ValueError("singular instants must be finite and nonnegative")
            if len(set(els)) != len(els):
                raise ValueError("duplicate singular instants")
            object.__setattr__(self, "elements", els)
        elif self.kind == "progression":
            if not self.period > 0:
                raise ValueError("progression period must be strictly positive")
            if self.start < 0:
                raise ValueError("progression start must be nonnegative")
        else:
            raise ValueError(f"unknown singular set kind {self.kind!r}")

    @classmethod
    def finite(cls, *elements) -> "SingularTimeSet":
        return cls("finite", tuple(elements))

    @classmethod
    def progression(cls, start: float, period: float) -> "SingularTimeSet":
        return cls("progression", (), float(start), float(period))

    def contains(self, t: float) -> bool:
        if self.kind == "finite":
            return t in self.elements
        if t < self.start:
            return False
        k = round((t - self.start) / self.period)
        return self.start + k * self.period == t

    def contains_array(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.kind == "finite":
            return np.isin(t, np.array(self.elements, dtype=float))
        k = np.round((t - self.start) / self.period)
        return (t >= self.start) & (self.start + k * self.period == t)

    def next_after(self, t: float) -> float:
        """Smallest element strictly greater than ``t`` (``inf`` if none)."""
        if self.kind == "finite":
            for e in self.elements:
                if e > t:
                    return e
            return math.inf
        if t < self.start:
            return self.start
        k = math.floor((t - self.start) / self.period) + 1
        cand = self.start + k * self.period
        while cand <= t:
            cand += self.period
        return cand

    def distance(self, t) -> np.ndarray:
        """Distance of each time in ``t`` to the nearest singular instant."""
        t = np.asarray(t, dtype=float)
        if self.kind == "finite":
            if not self.elements:
                return np.full(t.shape, np.inf)
            els = np.array(self.elements)
            return np.min(np.abs(t[..., None] - els), axis=-1)
        k = np.clip(np.round((t - self.start) / self.period), 0, None)
        return np.abs(t - (self.start + k * self.period))

    def within(self, a: float, b: float) -> list:
        out, s = [], self.next_after(a) if not self.contains(a) else a
        while s <= b:
            out.append(s)
            s = self.next_after(s)
        return out


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True, eq=False)
class SwitchingSurface:
    """Codimension-one surface ``sigma(x, t) = 0``.

    ``sigma`` and ``gradient`` must broadcast over leading axes of ``x``.
    Surfaces built with :meth:`linear` carry their coefficients so that the
    compiled integrator can watch them.
    """

    sigma: Callable
    gradient: Callable
    name: str = ""
    coeffs: Optional[tuple] = None

    @classmethod
    def linear(cls, a, b: float = 0.0, name: str = "") -> "SwitchingSurface":
        a = np.array(a, dtype=float)
        a.flags.writeable = False
        b = float(b)

        def sigma(x, t=None):
            return np.asarray(x, dtype=float) @ a + b

        def gradient(x, t=None):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(a, x.shape).copy()

        return cls(sigma, gradient, name, (a, b))


@dataclass(frozen=True, eq=False)
class SmoothPiece:
    """One smooth branch of a piecewise right-hand side.

    The region is the set of ``(x, t)`` with ``t`` in ``window`` and
    ``sign(sigma_j(x, t)) == signs[j]`` for every surface whose entry in
    ``signs`` is nonzero (zero entries are "don't care").  The field must
    extend continuously to the closure of the region.
    """

    signs: tuple
    window: TimeWindow
    kind: int = -1
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    fn: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if (self.kind < 0) == (self.fn is None):
            raise ValueError("a piece needs exactly one of a compiled kind or a Python fn")
        p = np.array(self.params, dtype=float).reshape(-1)
        p.flags.writeable = False
        object.__setattr__(self, "params", p)
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))

    @classmethod
    def builtin(cls, kind, params, signs, window, name="") -> "SmoothPiece":
        return cls(tuple(signs), window, kind=kind, params=np.asarray(params, float), name=name)

    @classmethod
    def from_function(cls, fn, signs, window=TimeWindow(), name="") -> "SmoothPiece":
        """Wrap ``fn(x, t) -> dx/dt`` as a piece."""
        return cls(tuple(signs), window, fn=fn, name=name)

    @property
    def compiled(self) -> bool:
        return self.kind >= 0

    def field(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.compiled:
            out = np.empty_like(x)
            kernels.eval_field(self.kind, float(t), x, self.params, out)
            return out
        return np.asarray(self.fn(x, t), dtype=float)

    def field_many(self, t, x) -> np.ndarray:
        """Evaluate at many points; ``t`` has shape (m,), ``x`` shape (m, n)."""
        t = np.ascontiguousarray(t, dtype=float)
        x = np.ascontiguousarray(x, dtype=float)
        if self.compiled:
            return kernels.eval_field_many(self.kind, self.params, t, x)
        return np.array([self.fn(xi, ti) for ti, xi in zip(t, x)], dtype=float).reshape(x.shape)

    def matches(self, signs, t: float) -> bool:
        if not self.window.contains(t):
            return False
        return all(s == 0 or s == v for s, v in zip(self.signs, signs))


@dataclass(frozen=True, eq=False)
class PiecewiseSystem:
    """Right-hand side given as smooth pieces on sign-vector regions."""

    dimension: int
    pieces: tuple
    surfaces: tuple = ()
    singular_times: SingularTimeSet = SingularTimeSet()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        if self.dimension < 1:
            raise ValueError("dimension must be positive")
        for p in self.pieces:
            if len(p.signs) != len(self.surfaces):
                raise ValueError(f"piece {p.name!r} has {len(p.signs)} signs for {len(self.surfaces)} surfaces")

    def sigma(self, x, t: float) -> np.ndarray:
        return np.array([float(s.sigma(x, t)) for s in self.surfaces])

    def relevant_surfaces(self, t: float) -> list:
        """Surfaces that separate pieces active at time ``t``."""
        active = [p for p in self.pieces if p.window.contains(t)]
        return [j for j in range(len(self.surfaces)) if any(p.signs[j] != 0 for p in active)]

    def sign_vector(self, x, t: float, radius: float = 0.0) -> tuple:
        """Sign of each surface at ``(x, t)``; 0 if within ``radius`` of it."""
        out = []
        for s in self.surfaces:
            v = float(s.sigma(x, t))
            g = np.linalg.norm(s.gradient(x, t))
            out.append(0 if abs(v) <= radius * g else (1 if v > 0 else -1))
        return tuple(out)

    def matching(self, signs, t: float) -> list:
        return [p for p in self.pieces if p.matches(signs, t)]

    def piece_at(self, x, t: float, surface_tol: float = 0.0) -> SmoothPiece:
        """The unique piece whose open region contains ``(x, t)``."""
        if self.singular_times.contains(t):
            raise SingularTime(f"t = {t!r} is a singular instant")
        signs = self.sign_vector(x, t, surface_tol)
        relevant = self.relevant_surfaces(t)
        on = [j for j in relevant if signs[j] == 0]
        if on:
            raise OnSurface(f"({x}, {t}) lies on surface(s) {on}")
        found = self.matching(signs, t)
        if not found:
            raise UndefinedPoint(f"no piece covers ({x}, {t})")
        return found[0]

    @property
    def linear_surfaces(self) -> bool:
        return all(s.coeffs is not None for s in self.surfaces)

    def guard_data(self):
        """Surface coefficients ``(G, b)`` for the compiled guard."""
        m = len(self.surfaces)
        if m == 0:
            return np.zeros((0, self.dimension)), np.zeros(0)
        G = np.array([s.coeffs[0] for s in self.surfaces], dtype=float).reshape(m, self.dimension)
        b = np.array([s.coeffs[1] for s in self.surfaces], dtype=float)
        return G, b


# ---------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    """Time-ordered samples produced in one integration mode.

    The segment spans ``[start, end]`` when its last sample sits at ``end``
    and ``[start, end)`` otherwise (e.g. when no limit exists at ``end``).
    """

    t: np.ndarray
    x: np.ndarray
    mode: str
    end: Optional[float] = None

    def __post_init__(self):
        t = np.array(self.t, dtype=float).reshape(-1)
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(t.shape[0], -1)
        if t.size == 0 or x.shape[0] != t.size:
            raise InvalidTrajectory("segment needs matching, nonempty t and x")
        if np.any(np.diff(t) <= 0):
            raise InvalidTrajectory("sample times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x))):
            raise InvalidTrajectory("non-finite sample")
        if self.mode not in MODES:
            raise InvalidTrajectory(f"unknown mode {self.mode!r}")
        end = float(t[-1]) if self.end is None else float(self.end)
        if end < t[-1]:
            raise InvalidTrajectory("samples beyond the segment end")
        t.flags.writeable = False
        x.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "end", end)

    @property
    def start(self) -> float:
        return float(self.t[0])

    @property
    def closed(self) -> bool:
        return self.t[-1] == self.end

    @property
    def dimension(self) -> int:
        return self.x.shape[1]


def trajectory_violations(segments: Sequence[TrajectorySegment], continuity_tol: float = 1e-6) -> list:
    """Reasons why ``segments`` do not form a valid trajectory (empty if valid)."""
    out = []
    if not segments:
        return ["no segments"]
    dims = {s.dimension for s in segments}
    if len(dims) != 1:
        out.append(f"mixed dimensions {sorted(dims)}")
    for i, (a, b) in enumerate(zip(segments[:-1], segments[1:])):
        if a.end != b.start:
            kind = "gap" if a.end < b.start else "overlap"
            out.append(f"{kind} between segments {i} and {i + 1}: {a.end!r} vs {b.start!r}")
            continue
        if not a.closed:
            out.append(f"segment {i} has no left limit at {a.end!r}")
            continue
        jump = float(np.linalg.norm(a.x[-1] - b.x[0])) if len(dims) == 1 else math.inf
        if jump > continuity_tol:
            out.append(f"discontinuity {jump:.3g} at t = {a.end!r}")
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A (generalized) solution on an interval, as abutting segments."""

    segments: tuple
    continuity_tol: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        bad = trajectory_violations(self.segments, self.continuity_tol)
        if bad:
            raise InvalidTrajectory("; ".join(bad))

    @property
    def dimension(self) -> int:
        return self.segments[0].dimension

    @property
    def domain(self) -> tuple:
        """``(inf, sup, sup_included)``."""
        last = self.segments[-1]
        return self.segments[0].start, last.end, last.closed

    def samples(self):
        """Concatenated ``(t, x, segment_index)``; interface times appear twice."""
        t = np.concatenate([s.t for s in self.segments])
        x = np.concatenate([s.x for s in self.segments])
        idx = np.concatenate([np.full(s.t.size, i) for i, s in enumerate(self.segments)])
        return t, x, idx

    def final_state(self) -> np.ndarray:
        return self.segments[-1].x[-1].copy()

    @property
    def modes(self) -> list:
        return [s.mode for s in self.segments]


# ---------------------------------------------------------------------------
# convex sets


def _affine_frame(V: np.ndarray, rtol: float = 1e-12):
    """Origin, orthonormal basis and coordinates of the affine hull of ``V``."""
    origin = V.mean(axis=0)
    D = V - origin
    scale = max(float(np.abs(V).max()), 1.0)
    if D.shape[0] == 1 or np.abs(D).max() <= rtol * scale:
        return origin, np.zeros((0, V.shape[1])), np.zeros((V.shape[0], 0))
    _, s, vt = np.linalg.svd(D, full_matrices=False)
    r = int(np.sum(s > rtol * scale * max(1.0, s[0])))
    basis = vt[:r]
    return origin, basis, D @ basis.T


def _hull_vertices(C: np.ndarray) -> np.ndarray:
    """Extreme points of a full-dimensional point cloud (ordered in 2-D)."""
    r = C.shape[1]
    if r == 0:
        return C[:1]
    if r == 1:
        return np.array([[C[:, 0].min()], [C[:, 0].max()]])
    if C.shape[0] <= r + 1:
        return C
    return C[ConvexHull(C).vertices]


def _dist_low_dim(c: np.ndarray, H: np.ndarray) -> float:
    """Distance from ``c`` to conv(H) where H is full-dimensional in its space."""
    r = H.shape[1]
    if r == 0:
        return 0.0
    if r == 1:
        lo, hi = H[:, 0].min(), H[:, 0].max()
        return float(max(lo - c[0], c[0] - hi, 0.0))
    if r == 2 and H.shape[0] >= 3:
        # counter-clockwise polygon from ConvexHull
        inside = True
        best = math.inf
        k = H.shape[0]
        for i in range(k):
            a, b = H[i], H[(i + 1) % k]
            e = b - a
            cross = e[0] * (c[1] - a[1]) - e[1] * (c[0] - a[0])
            if cross < 0:
                inside = False
            s = np.clip(np.dot(c - a, e) / np.dot(e, e), 0.0, 1.0)
            best = min(best, float(np.linalg.norm(a + s * e - c)))
        return 0.0 if inside else best
    # small QP: weighted NNLS enforcing the simplex constraint
    w = 1e6 * max(1.0, float(np.abs(H).max()))
    A = np.vstack([H.T, w * np.ones((1, H.shape[0]))])
    lam, _ = nnls(A, np.concatenate([c, [w]]))
    return float(np.linalg.norm(H.T @ lam - c))


def hull_distance(p, V) -> float:
    """Euclidean distance from point ``p`` to the convex hull of rows of ``V``."""
    p = np.asarray(p, dtype=float)
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] == 1:
        return float(np.linalg.norm(p - V[0]))
    if V.shape[0] == 2:
        a, b = V
        e = b - a
        ee = float(e @ e)
        s = 0.0 if ee == 0 else float(np.clip((p - a) @ e / ee, 0.0, 1.0))
        return float(np.linalg.norm(a + s * e - p))
    origin, basis, C = _affine_frame(V)
    d = p - origin
    c = basis @ d
    off = float(np.linalg.norm(d - basis.T @ c))
    return math.hypot(off, _dist_low_dim(c, _hull_vertices(C)))


@dataclass(frozen=True, eq=False)
class ConvexVertexSet:
    """Convex polytope given by a finite vertex list (one vertex per row)."""

    vertices: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.array(self.vertices, dtype=float))
        if V.size == 0:
            raise ValueError("a convex vertex set needs at least one vertex")
        if not np.all(np.isfinite(V)):
            raise ValueError("non-finite vertex")
        V = np.unique(V, axis=0)
        V.flags.writeable = False
        object.__setattr__(self, "vertices", V)

    @property
    def dimension(self) -> int:
        return self.vertices.shape[1]

    def distance(self, p) -> float:
        return hull_distance(p, self.vertices)

    def contains(self, p, tol: float = 1e-9) -> bool:
        p = np.asarray(p, dtype=float)
        V = self.vertices
        if V.shape[0] <= 2:
            return self.distance(p) <= tol
        k, n = V.shape
        # min s  s.t.  |V^T lam - p|_inf <= s, lam in simplex
        c = np.zeros(k + 1)
        c[-1] = 1.0
        A_ub = np.block([[V.T, -np.ones((n, 1))], [-V.T, -np.ones((n, 1))]])
        b_ub = np.concatenate([p, -p])
        A_eq = np.concatenate([np.ones(k), [0.0]])[None, :]
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0], bounds=[(0, None)] * (k + 1))
        s = res.fun if res.status == 0 else math.inf
        if s <= tol / math.sqrt(n):
            return True
        if s > tol:
            return False
        return self.distance(p) <= tol

    def hausdorff(self, other: "ConvexVertexSet") -> float:
        a = max(other.distance(v) for v in _extreme(self.vertices))
        b = max(self.distance(v) for v in _extreme(other.vertices))
        return max(a, b)


def _extreme(V: np.ndarray) -> np.ndarray:
    if V.shape[0] <= 2:
        return V
    origin, basis, C = _affine_frame(V)
    return origin + _hull_vertices(C) @ basis if basis.shape[0] else V[:1]


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class IntegratorSettings:
    rtol: float = 1e-9
    atol: float = 1e-9
    min_step_fraction: float = 0.25
    event_tol: float = 1e-10
    conv_radius: float = 1e-7
    max_steps: int = 20_000_000
    continuity_tol: float = 1e-6
    probe_radius: float = 1e-9
    # geometric samples 2^-k (T - t_ref), k = 0..limit_octaves, before a singular instant
    limit_octaves: int = 21
    # largest accepted tail contraction ratio in the Cauchy test
    ratio_max: float = 0.9
    max_step: float = math.inf
    zero_samples: int = 101

    def __post_init__(self):
        for name in ("rtol", "atol", "min_step_fraction", "event_tol", "conv_radius",
                     "continuity_tol", "probe_radius", "max_step"):
            if not getattr(self, name) > 0:
                raise InvalidConfig(f"{name} must be strictly positive")
        if not self.min_step_fraction < 1:
            raise InvalidConfig("min_step_fraction must be < 1")
        if self.max_steps < 1 or self.limit_octaves < 20:
            raise InvalidConfig("max_steps must be positive and limit_octaves >= 20")
        if not 0 < self.ratio_max < 1:
            raise InvalidConfig("ratio_max must lie in (0, 1)")


SYSTEMS_WITH_T = ("example1", "example2")


@dataclass(frozen=True)
class ScenarioConfig:
    """Declarative description of one simulation run."""

    system_id: str
    x0: tuple
    t0: float = 0.0
    T: float = 1.0
    t_end: float = 2.0
    k1: float = 1.5
    k2: float = 1.1
    rtol: float = 1e-9
    atol: float = 1e-9
    min_step_fraction: float = 0.25
    event_tol: float = 1e-10
    conv_radius: float = 1e-7
    continuity_tol: float = 1e-6
    output: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in np.ravel(self.x0)))
        problems = self.problems()
        if problems:
            raise InvalidConfig("; ".join(problems))

    def problems(self) -> list:
        out = []
        if not all(math.isfinite(v) for v in self.x0) or not self.x0:
            out.append("x0 must be a nonempty finite vector")
        if not (math.isfinite(self.t0) and self.t0 >= 0):
            out.append("t0 must be finite and nonnegative")
        if not self.t_end > self.t0:
            out.append("t_end must exceed t0")
        if self.system_id in SYSTEMS_WITH_T and not (self.t0 < self.T < self.t_end):
            out.append("need t0 < T < t_end")
        if not (self.T > 0 and self.k1 > 0 and self.k2 > 0):
            out.append("T, k1, k2 must be positive")
        for name in ("rtol", "atol", "min_step_fraction", "event_tol", "conv_radius", "continuity_tol"):
            if not getattr(self, name) > 0:
                out.append(f"{name} must be strictly positive")
        if not self.min_step_fraction < 1:
            out.append("min_step_fraction must be < 1")
        return out

    def settings(self, **overrides) -> IntegratorSettings:
        base = dict(rtol=self.rtol, atol=self.atol, min_step_fraction=self.min_step_fraction,
                    event_tol=self.event_tol, conv_radius=self.conv_radius,
                    continuity_tol=self.continuity_tol)
        base.update(overrides)
        return IntegratorSettings(**base)

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# system validation


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def validate_system(sys: PiecewiseSystem, n_probe: int = 400, seed: int = 0, box: float = 2.0,
                    t_max: Optional[float] = None) -> list:
    """Check region partition, surface gradients and the singular set.

    Probing is deterministic (fixed ``seed``).  Returns a list of
    :class:`Violation`; an empty list means every check passed.
    """
    out = []
    D = sys.singular_times
    if D.kind == "progression" and not D.period > 0:
        out.append(Violation("singular set", "progression without positive period"))
    if t_max is None:
        if D.kind == "finite":
            t_max = (max(D.elements) if D.elements else 0.0) + 1.0
        else:
            t_max = D.start + 2 * D.period
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-box, box, size=(n_probe, sys.dimension))
    ts = rng.uniform(0.0, t_max, size=n_probe)

    seen = set()
    for x, t in zip(xs, ts):
        if D.contains(float(t)):
            continue
        if not any(p.window.contains(t) for p in sys.pieces):
            continue  # past a terminal instant: the system is not defined there
        signs = sys.sign_vector(x, t)
        if any(signs[j] == 0 for j in sys.relevant_surfaces(t)):
            continue
        found = sys.matching(signs, t)
        if not found and "uncovered" not in seen:
            seen.add("uncovered")
            out.append(Violation("uncovered region", f"no piece at x={x}, t={t:.4g}"))
        if len(found) > 1:
            key = tuple(id(p) for p in found)
            if key not in seen:
                seen.add(key)
                names = ", ".join(p.name or "?" for p in found)
                out.append(Violation("overlapping regions", f"pieces {names} overlap at x={x}, t={t:.4g}"))
        for p in found:
            if not np.all(np.isfinite(p.field(x, t))) and ("nonfinite", id(p)) not in seen:
                seen.add(("nonfinite", id(p)))
                out.append(Violation("non-finite field", f"piece {p.name!r} at x={x}, t={t:.4g}"))

    for j, s in enumerate(sys.surfaces):
        for x, t in zip(xs[:64], ts[:64]):
            g = np.asarray(s.gradient(x, t), dtype=float)
            fd = np.empty(sys.dimension)
            for i in range(sys.dimension):
                h = 1e-6 * max(1.0, abs(x[i]))
                e = np.zeros(sys.dimension)
                e[i] = h
                fd[i] = (float(s.sigma(x + e, t)) - float(s.sigma(x - e, t))) / (2 * h)
            if np.linalg.norm(g - fd) > 1e-6 * max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12):
                out.append(Violation("gradient mismatch", f"surface {j} ({s.name}) at x={x}"))
                break
    return out
