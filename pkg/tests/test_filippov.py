import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from genfilippov.acceptance import sampled_hull, sign_system
from genfilippov.core_types import ConvexVertexSet, PiecewiseSystem, SmoothPiece, SwitchingSurface
from genfilippov.errors import Degenerate, NotAttractive, SingularTime, UndefinedPoint
from genfilippov.filippov import (
    FilippovProbe,
    adjacent_pieces,
    contains_zero,
    filippov_set,
    sliding_vector_field,
)
from genfilippov.systems import eval_rhs, make_example1, make_example3, make_supertwisting


def test_probe_invariants():
    with pytest.raises(ValueError):
        FilippovProbe(probe_radius=0.0)
    with pytest.raises(ValueError):
        FilippovProbe(samples_per_piece=0)


def test_interior_point_is_singleton():
    sys1, _ = make_example1()
    F = filippov_set(sys1, [1.0, 0.0], 0.5)
    assert F.vertices.shape == (1, 2)
    # -4/0.5 * 1 = -8; -(2/0.25 + 1/0.0625) = -24
    np.testing.assert_allclose(F.vertices[0], [-8.0, -24.0])


def test_supertwisting_origin_is_vertical_segment():
    sys1, _ = make_example1()
    F = filippov_set(sys1, [0.0, 0.0], 1.5)
    assert F.hausdorff(ConvexVertexSet([[0.0, -1.1], [0.0, 1.1]])) <= 1e-12
    assert contains_zero(F)


def test_on_surface_off_origin():
    st_ = make_supertwisting(1.5, 1.1)
    F = filippov_set(st_, [0.0, 0.5], 0.0)
    # limits (0.5, -1.1) and (0.5, 1.1): both push x1 the same way
    np.testing.assert_allclose(F.vertices, [[0.5, -1.1], [0.5, 1.1]])
    assert not contains_zero(F)


def test_singular_instant_rejected():
    sys1, _ = make_example1()
    with pytest.raises(SingularTime):
        filippov_set(sys1, [1.0, 0.0], 1.0)
    sys3, _ = make_example3()
    with pytest.raises(SingularTime):
        filippov_set(sys3, [1.0, 0.0], 4.0)


def test_undefined_point():
    surf = SwitchingSurface.linear([1.0])
    sys = PiecewiseSystem(1, (SmoothPiece.from_function(lambda x, t: -x, (1,)),), (surf,))
    with pytest.raises(UndefinedPoint):
        filippov_set(sys, [-1.0], 0.0)


def test_two_surfaces_give_four_vertices():
    s1 = SwitchingSurface.linear([1.0, 0.0])
    s2 = SwitchingSurface.linear([0.0, 1.0])
    pieces = [SmoothPiece.from_function(lambda x, t, a=a, b=b: np.array([-a, -b], float), (a, b))
              for a in (1, -1) for b in (1, -1)]
    sys = PiecewiseSystem(2, pieces, (s1, s2))
    F = filippov_set(sys, [0.0, 0.0], 0.0)
    assert F.vertices.shape == (4, 2)
    assert contains_zero(F)
    found, on = adjacent_pieces(sys, [0.0, 0.0], 0.0, 1e-9)
    assert on == [0, 1] and len(found) == 4
    # on only one surface: two adjacent pieces
    assert filippov_set(sys, [0.0, 1.0], 0.0).vertices.shape == (2, 2)


def test_sqrt_piece_limit_is_exact():
    # sqrt|x1| has infinite slope at the surface; the limit must still be exact
    st_ = make_supertwisting(1.5, 1.1)
    F = filippov_set(st_, [0.0, -0.3], 0.0)
    np.testing.assert_array_equal(F.vertices, [[-0.3, -1.1], [-0.3, 1.1]])


def test_brute_force_sign_function():
    sgn = sign_system()
    F = filippov_set(sgn, [0.0], 0.0)
    np.testing.assert_array_equal(F.vertices, [[-1.0], [1.0]])
    assert F.hausdorff(sampled_hull(sgn, [0.0], 0.0, 1e-3, n=500)) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_brute_force_supertwisting_on_surface(x2):
    st_ = make_supertwisting(1.5, 1.1)
    x = np.array([0.0, x2])
    F = filippov_set(st_, x, 0.0)
    assert F.hausdorff(sampled_hull(st_, x, 0.0, 1e-14, n=200)) <= 1e-6


@settings(max_examples=60, deadline=None)
@given(st.permutations(range(4)), st.floats(-2, 2), st.floats(-2, 2))
def test_piece_order_does_not_matter(perm, x1, x2):
    s1 = SwitchingSurface.linear([1.0, 0.0])
    s2 = SwitchingSurface.linear([0.0, 1.0])
    pieces = [SmoothPiece.from_function(lambda x, t, a=a, b=b: np.array([a * x[1] - b, x[0] + a], float), (a, b))
              for a in (1, -1) for b in (1, -1)]
    base = PiecewiseSystem(2, pieces, (s1, s2))
    shuffled = PiecewiseSystem(2, [pieces[i] for i in perm], (s1, s2))
    for x in ([x1, x2], [0.0, x2], [x1, 0.0], [0.0, 0.0]):
        a, b = filippov_set(base, x, 0.0), filippov_set(shuffled, x, 0.0)
        np.testing.assert_array_equal(a.vertices, b.vertices)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 5.0), st.sampled_from([1.0, -1.0]), st.floats(-5.0, 5.0), st.floats(0.01, 5.0))
def test_continuity_points_give_singletons(x1, side, x2, t):
    sys1, _ = make_example1()
    assume(t != 1.0)
    x = np.array([side * x1, x2])
    F = filippov_set(sys1, x, t)
    assert F.vertices.shape[0] == 1
    np.testing.assert_array_equal(F.vertices[0], eval_rhs(sys1, x, t))


# ---------------------------------------------------------------------------
# sliding vector field


def test_sliding_field_examples():
    np.testing.assert_allclose(sliding_vector_field([-1, 2], [1, 1], [1, 0]), [0.0, 1.5])
    with pytest.raises(Degenerate):
        sliding_vector_field([0, -1.1], [0, 1.1], [1, 0])
    np.testing.assert_array_equal(sliding_vector_field([0, 3], [0, 3], [1, 0]), [0.0, 3.0])
    with pytest.raises(NotAttractive):
        sliding_vector_field([0.5, -1.1], [0.5, 1.1], [1, 0])
    with pytest.raises(ValueError):
        sliding_vector_field([1, 0], [-1, 0], [0, 0])


vec = st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))


@settings(max_examples=200, deadline=None)
@given(vec, vec, vec, st.floats(1e-3, 10), st.floats(1e-3, 10))
def test_sliding_field_is_tangent_convex_combination(n, gp, gm, a, b):
    n = np.array(n)
    assume(np.linalg.norm(n) > 1e-2)
    u = n / np.linalg.norm(n)
    # tangential parts plus normal components of opposite, attracting signs
    fp = np.array(gp) - (u @ np.array(gp)) * u - a * u
    fm = np.array(gm) - (u @ np.array(gm)) * u + b * u
    fs = sliding_vector_field(fp, fm, n)
    scale = np.linalg.norm(n) * max(np.linalg.norm(fp), np.linalg.norm(fm))
    assert abs(n @ fs) <= 1e-12 * scale
    alpha = (n @ fm) / (n @ fm - n @ fp)
    assert 0.0 < alpha < 1.0
    assert ConvexVertexSet([fp, fm]).distance(fs) <= 1e-9 * max(1.0, scale)
