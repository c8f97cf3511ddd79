"""Built-in systems with closed-form reference solutions.

``example1``
    Prescribed-time differentiator error dynamics: a linear time-varying
    phase with gains blowing up like ``(T - t)^-4`` on ``[0, T)``, switched
    to super-twisting dynamics on ``[T, inf)``.
``example2``
    A bounded linear time-varying system whose solutions oscillate in
    ``ln(T - t)`` and have no limit at ``T``; undefined beyond ``T``.
``example3``
    A period-2 system with singular instants at every even integer.
``supertwisting``
    The ``t >= T`` phase of ``example1`` as an autonomous system.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .core_types import (
    PiecewiseSystem,
    SingularTimeSet,
    SmoothPiece,
    SwitchingSurface,
    TimeWindow,
    Trajectory,
    TrajectorySegment,
)

SYSTEM_IDS = ("example1", "example2", "example3", "supertwisting")


@dataclass(frozen=True)
class GainSet:
    k1: float = 1.5
    k2: float = 1.1
    T: float = 1.0

    def __post_init__(self):
        if not (self.k1 > 0 and self.k2 > 0 and self.T > 0):
            raise ValueError("k1, k2 and T must be positive")


def fundamental_matrix_pt(tau):
    """Fundamental matrix of the prescribed-time differentiator phase, tau = T - t."""
    tau = np.asarray(tau, dtype=float)
    s, c = np.sin(1.0 / tau), np.cos(1.0 / tau)
    return np.stack([
        np.stack([tau**3 * s, tau**3 * c], axis=-1),
        np.stack([tau**2 * s + tau * c, tau**2 * c - tau * s], axis=-1),
    ], axis=-2)


def fundamental_matrix_log(tau):
    """Fundamental matrix of the log-oscillating system, tau = T - t."""
    tau = np.asarray(tau, dtype=float)
    s, c = np.sin(np.log(tau)), np.cos(np.log(tau))
    return np.stack([
        np.stack([tau * s, tau * c], axis=-1),
        np.stack([-c, s], axis=-1),
    ], axis=-2)


@dataclass(frozen=True)
class AnalyticOracle:
    """Closed-form solution ``x(t) = M(T - t) M(T - t0)^-1 x0`` on ``T - t in valid_tau``."""

    fundamental_matrix: Callable
    T: float
    valid_tau: tuple

    def coefficients(self, t0: float, x0) -> np.ndarray:
        return np.linalg.solve(self.fundamental_matrix(self.T - t0), np.asarray(x0, dtype=float))

    def solution(self, t0: float, x0, t):
        c = self.coefficients(t0, x0)
        tau = self.T - np.asarray(t, dtype=float)
        lo, hi = self.valid_tau
        if np.any(tau <= lo) or np.any(tau > hi):
            raise ValueError(f"T - t outside ({lo}, {hi}]")
        return self.fundamental_matrix(tau) @ c

    def trajectory(self, t0: float, x0, t) -> Trajectory:
        t = np.asarray(t, dtype=float)
        return Trajectory((TrajectorySegment(t, self.solution(t0, x0, t), "constructed"),))


@dataclass(frozen=True)
class GeneralizedSolutionOracle:
    """Periodic generalized solution of ``example3`` leaving the origin.

    ``x(t) = M(u) e1`` for ``u = t mod 2`` in ``(0, 1]``, ``M(2 - u) e1`` for
    ``u`` in ``(1, 2)`` and ``0`` at even integers, with ``M`` the
    differentiator's fundamental matrix.
    """

    period: float = 2.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.floor(t / self.period)
        u = t - k * self.period
        tau = np.where(u <= 1.0, u, self.period - u)
        safe = np.where(u == 0.0, 1.0, tau)
        x = fundamental_matrix_pt(safe)[..., :, 0]
        return np.where((u == 0.0)[..., None], 0.0, x)

    def trajectory(self, a: float, b: float, max_gap: float = 1e-4, phase_step: float = 0.1,
                   mode: str = "constructed") -> Trajectory:
        """Samples on ``[a, b]`` fine enough for central differences.

        Spacing is ``min(max_gap, phase_step * tau**2.5)`` with ``tau`` the
        distance to the nearest even integer.  The third derivative grows
        like ``tau**-5``, so the three-point derivative error stays near
        ``phase_step**2 / 6``.
        """
        if a < 0 or not b > a:
            raise ValueError("need 0 <= a < b")
        t = adaptive_grid(a, b, lambda s: min(max_gap, phase_step * max(_dist_even(s), 1e-3) ** 2.5))
        return Trajectory((TrajectorySegment(t, self(t), mode),))


def _dist_even(t: float) -> float:
    return abs(t - 2.0 * round(t / 2.0))


def adaptive_grid(a: float, b: float, spacing: Callable, max_points: int = 5_000_000) -> np.ndarray:
    """Increasing grid from ``a`` to ``b`` with local gap ``spacing(t)``."""
    pts = [a]
    t = a
    while t < b:
        h = float(spacing(t))
        if not h > 0:
            raise ValueError(f"non-positive spacing at t = {t!r}")
        t = min(t + h, b)
        pts.append(t)
        if len(pts) > max_points:
            raise ValueError("grid too fine")
    return np.array(pts)


def make_example1(g: GainSet = GainSet()):
    T = g.T
    surf = SwitchingSurface.linear([1.0, 0.0], name="x1")
    pieces = (
        SmoothPiece.builtin(kernels.PT_DIFFERENTIATOR, [T], (0,), TimeWindow(0.0, T), "linear-time-varying"),
        SmoothPiece.builtin(kernels.SUPERTWIST_PLUS, [g.k1, g.k2], (1,), TimeWindow(T), "super-twisting+"),
        SmoothPiece.builtin(kernels.SUPERTWIST_MINUS, [g.k1, g.k2], (-1,), TimeWindow(T), "super-twisting-"),
    )
    sys = PiecewiseSystem(2, pieces, (surf,), SingularTimeSet.finite(T), "example1")
    return sys, AnalyticOracle(fundamental_matrix_pt, T, (0.0, T))


def make_example2(T: float = 1.0):
    if not T > 0:
        raise ValueError("T must be positive")
    pieces = (SmoothPiece.builtin(kernels.PT_LOG_OSCILLATOR, [T], (), TimeWindow(0.0, T), "log-oscillator"),)
    sys = PiecewiseSystem(2, pieces, (), SingularTimeSet.finite(T), "example2")
    return sys, AnalyticOracle(fundamental_matrix_log, T, (0.0, T))


def make_example3():
    pieces = (
        SmoothPiece.builtin(kernels.PERIODIC_EVEN, [], (), TimeWindow(0.0, 1.0, 2.0), "even"),
        SmoothPiece.builtin(kernels.PERIODIC_ODD, [], (), TimeWindow(1.0, 2.0, 2.0), "odd"),
    )
    sys = PiecewiseSystem(2, pieces, (), SingularTimeSet.progression(0.0, 2.0), "example3")
    return sys, GeneralizedSolutionOracle()


def make_supertwisting(k1: float = 1.5, k2: float = 1.1):
    surf = SwitchingSurface.linear([1.0, 0.0], name="x1")
    pieces = (
        SmoothPiece.builtin(kernels.SUPERTWIST_PLUS, [k1, k2], (1,), TimeWindow(), "super-twisting+"),
        SmoothPiece.builtin(kernels.SUPERTWIST_MINUS, [k1, k2], (-1,), TimeWindow(), "super-twisting-"),
    )
    return PiecewiseSystem(2, pieces, (surf,), SingularTimeSet(), "supertwisting")


def build_system(system_id: str, T: float = 1.0, k1: float = 1.5, k2: float = 1.1):
    """Return ``(system, oracle_or_None)`` for a CLI identifier."""
    if system_id == "example1":
        return make_example1(GainSet(k1, k2, T))
    if system_id == "example2":
        return make_example2(T)
    if system_id == "example3":
        return make_example3()
    if system_id == "supertwisting":
        return make_supertwisting(k1, k2), None
    raise KeyError(f"unknown system {system_id!r}; choose from {', '.join(SYSTEM_IDS)}")


def eval_rhs(sys: PiecewiseSystem, x, t: float, surface_tol: float = 0.0) -> np.ndarray:
    """``f(x, t)`` at a point strictly inside one piece's region."""
    x = np.asarray(x, dtype=float)
    out = sys.piece_at(x, t, surface_tol).field(x, t)
    if not np.all(np.isfinite(out)):
        raise ArithmeticError(f"non-finite field value at x={x}, t={t!r}")
    return out
