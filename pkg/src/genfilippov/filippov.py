"""Filippov set-valued map of piecewise-smooth systems and sliding motion."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core_types import ConvexVertexSet, PiecewiseSystem
from .errors import Degenerate, NotAttractive, SingularTime, UndefinedPoint


@dataclass(frozen=True)
class FilippovProbe:
    """Numerical stand-in for the delta-ball of the Filippov construction.

    ``probe_radius`` decides which surfaces a point lies on and is the
    offset used when a piece cannot be evaluated on its boundary.
    """

    probe_radius: float = 1e-9
    samples_per_piece: int = 1

    def __post_init__(self):
        if not self.probe_radius > 0:
            raise ValueError("probe_radius must be positive")
        if self.samples_per_piece < 1:
            raise ValueError("samples_per_piece must be positive")


def adjacent_pieces(sys: PiecewiseSystem, x, t: float, radius: float):
    """Pieces whose region closure contains ``(x, t)``, plus the surfaces hit.

    Returns ``(pieces, on)`` where each entry of ``pieces`` is
    ``(piece, signs)`` for one sign assignment of the surfaces in ``on``.
    """
    signs = list(sys.sign_vector(x, t, radius))
    relevant = sys.relevant_surfaces(t)
    on = [j for j in relevant if signs[j] == 0]
    for j in range(len(signs)):
        if j not in relevant and signs[j] == 0:
            signs[j] = 1  # irrelevant at this time; any side will do
    found, seen = [], set()
    for choice in itertools.product((1, -1), repeat=len(on)):
        sv = list(signs)
        for j, s in zip(on, choice):
            sv[j] = s
        for p in sys.matching(sv, t):
            if id(p) not in seen:
                seen.add(id(p))
                found.append((p, tuple(sv)))
    return found, on


def _limit_value(sys, piece, sv, on, x, t, probe):
    v = piece.field(x, t)
    if np.all(np.isfinite(v)):
        return [v]
    # boundary evaluation failed: step off onto the piece's own side
    out = []
    normal = np.zeros(sys.dimension)
    for j in on:
        g = np.asarray(sys.surfaces[j].gradient(x, t), dtype=float)
        normal += sv[j] * g / np.linalg.norm(g)
    normal /= max(np.linalg.norm(normal), 1e-300)
    for k in range(probe.samples_per_piece):
        xo = x + probe.probe_radius * (1.0 + k) * normal
        out.append(piece.field(xo, t))
    return out


def filippov_set(sys: PiecewiseSystem, x, t: float, probe: FilippovProbe = FilippovProbe()) -> ConvexVertexSet:
    """Value ``F(x, t)`` of the Filippov map as a vertex set.

    At a continuity point this is the singleton ``{f(x, t)}``; on ``k``
    surfaces it is the hull of the (up to ``2**k``) one-sided limits of the
    adjacent pieces.  Each piece is evaluated on the boundary of its own
    region (pieces extend continuously there), which gives the one-sided
    limit exactly even for non-Lipschitz pieces such as ``sqrt|x1|``.
    """
    x = np.asarray(x, dtype=float)
    if sys.singular_times.contains(t):
        raise SingularTime(f"F is not defined at the singular instant t = {t!r}")
    found, on = adjacent_pieces(sys, x, t, probe.probe_radius)
    if not found:
        raise UndefinedPoint(f"no piece closure contains x={x}, t={t!r}")
    verts = []
    for piece, sv in found:
        verts.extend(_limit_value(sys, piece, sv, on, x, t, probe))
    verts = np.array(verts)
    if not np.all(np.isfinite(verts)):
        raise UndefinedPoint(f"non-finite limit value at x={x}, t={t!r}")
    return ConvexVertexSet(verts)


def contains_zero(fset: ConvexVertexSet, tol: float = 1e-9) -> bool:
    return fset.contains(np.zeros(fset.dimension), tol)


def sliding_vector_field(f_plus, f_minus, normal) -> np.ndarray:
    """Filippov convex combination of ``f_plus``/``f_minus`` tangent to the surface.

    ``normal`` points into the ``+`` side; attractivity requires
    ``<n, f_plus> < 0 < <n, f_minus>``.
    """
    f_plus = np.asarray(f_plus, dtype=float)
    f_minus = np.asarray(f_minus, dtype=float)
    normal = np.asarray(normal, dtype=float)
    if not np.any(normal):
        raise ValueError("normal must be nonzero")
    if np.array_equal(f_plus, f_minus) and float(normal @ f_plus) == 0.0:
        return f_plus.copy()
    a_plus = float(normal @ f_plus)
    a_minus = float(normal @ f_minus)
    scale = np.linalg.norm(normal) * max(np.linalg.norm(f_plus), np.linalg.norm(f_minus))
    if max(abs(a_plus), abs(a_minus)) <= 1e-14 * scale:
        raise Degenerate("both one-sided fields are tangential to the surface")
    if not (a_plus < 0.0 < a_minus):
        raise NotAttractive(f"<n, f+> = {a_plus:.3g}, <n, f-> = {a_minus:.3g}")
    alpha = a_minus / (a_minus - a_plus)
    return alpha * f_plus + (1.0 - alpha) * f_minus
