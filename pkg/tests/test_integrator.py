import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genfilippov import kernels
from genfilippov.acceptance import example1_run, example2_run
from genfilippov.core_types import (
    IntegratorSettings,
    PiecewiseSystem,
    ScenarioConfig,
    SmoothPiece,
    SwitchingSurface,
    Trajectory,
    TrajectorySegment,
)
from genfilippov.errors import (
    GapInDomain,
    InsufficientSamples,
    LimitMismatch,
    NoSignChange,
    NotAttractive,
)
from genfilippov.integrator import (
    ContinuationReport,
    StepTail,
    concatenate,
    detect_limit,
    geometric_times,
    integrate,
    locate_event,
    solve,
    step_classical,
    step_sliding,
)
from genfilippov.systems import make_example1, make_example2, make_example3, make_supertwisting

ST = IntegratorSettings()


def _const_tail(t, x, h, f):
    K = np.tile(np.asarray(f, dtype=float), (kernels.RK_P.shape[0], 1))
    return StepTail(t, np.asarray(x, dtype=float), h, K)


def sliding_system(drift=1.0):
    """``x1' = -sign(x1)``, ``x2' = drift``: slides along x1 = 0 with speed ``drift``."""
    surf = SwitchingSurface.linear([1.0, 0.0], name="x1")
    pieces = (
        SmoothPiece.from_function(lambda x, t: np.array([-1.0, drift]), (1,), name="+"),
        SmoothPiece.from_function(lambda x, t: np.array([1.0, drift]), (-1,), name="-"),
    )
    return PiecewiseSystem(2, pieces, (surf,), name="sliding")


# ---------------------------------------------------------------------------
# single steps


def test_step_classical_matches_oracle():
    sys1, oracle = make_example1()
    x1, h_used, h_next = step_classical(sys1, [1.0, 0.0], 0.0, 1e-3, ST)
    assert 0 < h_used <= 1e-3 and h_next > 0
    ref = oracle.solution(0.0, [1.0, 0.0], h_used)
    assert np.linalg.norm(x1 - ref) <= ST.atol + ST.rtol * np.linalg.norm(x1)


def test_step_classical_zero_state_stays_zero():
    sys1, _ = make_example1()
    x1, _, _ = step_classical(sys1, [0.0, 0.0], 0.3, 1e-2, ST)
    assert not np.any(x1)


def test_step_classical_clamped_near_singularity():
    sys1, _ = make_example1()
    t = 1.0 - 1e-3
    _, h_used, _ = step_classical(sys1, [1e-9, 0.0], t, 1e-2, ST)
    assert h_used <= ST.min_step_fraction * 1e-3 * (1 + 1e-12)


def test_locate_event_linear_crossing():
    t0 = 0.3
    tail = _const_tail(t0, [1.0, 0.0], 1.5, [-1.0, 0.0])
    surf = SwitchingSurface.linear([1.0, 0.0])
    te = locate_event(tail, surf, 1e-10)
    assert abs(te - (t0 + 1.0)) <= 1e-10


def test_locate_event_no_crossing():
    tail = _const_tail(0.0, [1.0, 0.0], 0.5, [-1.0, 0.0])
    with pytest.raises(NoSignChange):
        locate_event(tail, SwitchingSurface.linear([1.0, 0.0]), 1e-10)
    on = _const_tail(0.0, [0.0, 0.0], 0.5, [-1.0, 0.0])
    with pytest.raises(NoSignChange):
        locate_event(on, SwitchingSurface.linear([1.0, 0.0]), 1e-10)


class _QuadraticTail(StepTail):
    def state(self, tq):
        s = np.asarray(tq, dtype=float) - self.t
        return np.stack([(1 - 4 * s) * (1 - 2 * s) * (1 - s / 0.55), np.zeros_like(s)], axis=-1)


def test_locate_event_takes_earliest_crossing():
    # x1 vanishes at s = 0.25, 0.5 and 0.55 and is negative at the end of the step
    tail = _QuadraticTail(0.0, np.array([1.0, 0.0]), 0.6, np.zeros((7, 2)))
    te = locate_event(tail, SwitchingSurface.linear([1.0, 0.0]), 1e-12)
    assert te == pytest.approx(0.25, abs=1e-12)


def test_supertwisting_crossings_resolved():
    traj, _ = solve(make_supertwisting(1.5, 1.1), ScenarioConfig("supertwisting", (0.1, 0.0), t0=1.0, t_end=1.5))
    t, x, _ = traj.samples()
    flips = np.nonzero(np.sign(x[:-1, 0]) * np.sign(x[1:, 0]) < 0)[0]
    assert flips.size == 0  # every crossing passes through a sample on the surface
    on = np.abs(x[:, 0]) <= 1e-9
    assert np.any(on & (t > 1.0))


def test_step_sliding_symmetric_field_is_stationary():
    sys_ = sliding_system(drift=0.0)
    step = step_sliding(sys_, [0.0, 0.5], 0.0, 0, 0.1, ST)
    np.testing.assert_array_equal(step.x, [0.0, 0.5])
    assert step.exit == "sliding" and step.t == pytest.approx(0.1)


def test_step_sliding_moves_along_surface():
    sys_ = sliding_system(drift=2.0)
    step = step_sliding(sys_, [0.0, 0.0], 0.0, 0, 0.25, ST)
    assert abs(step.x[0]) <= 10 * ST.event_tol
    assert step.x[1] == pytest.approx(2.0 * step.t, rel=1e-12)


def test_step_sliding_supertwisting():
    sys_ = make_supertwisting(1.5, 1.1)
    with pytest.raises(NotAttractive):
        step_sliding(sys_, [0.0, 0.5], 0.0, 0, 0.1, ST)
    step = step_sliding(sys_, [0.0, 0.0], 0.0, 0, 0.1, ST)
    assert step.exit == "equilibrium" and step.h_used == 0.0


# ---------------------------------------------------------------------------
# limits


def test_geometric_times():
    g = geometric_times(1.0, 0.0, 21)
    assert g.size == 22 and g[0] == 0.0
    np.testing.assert_array_equal(1.0 - g, np.exp2(-np.arange(22.0)))


def test_detect_limit_constant_samples():
    t = geometric_times(1.0, 0.0, 21)
    v = np.array([0.5, -2.0])
    rep = detect_limit((t, np.tile(v, (t.size, 1))), 1.0, ST)
    assert rep.outcome == "continued-with-limit"
    np.testing.assert_array_equal(rep.limit_estimate, v)


def test_detect_limit_converging_to_nonzero():
    t = geometric_times(2.0, 1.0, 24)
    v = np.array([1.0, 3.0])
    x = v + np.outer(2.0 - t, [1.0, -1.0])
    rep = detect_limit(list(zip(t, x)), 2.0, ST)
    assert rep.outcome == "continued-with-limit"
    assert np.linalg.norm(rep.limit_estimate - v) <= 1e-6


def test_detect_limit_oscillation_and_decay():
    t = geometric_times(1.0, 0.0, 21)
    tau = 1.0 - t
    osc = np.column_stack([np.cos(np.log(tau)), np.sin(np.log(tau))])
    assert detect_limit((t, osc), 1.0, ST).outcome == "no-limit-exists"
    decay = tau[:, None] * osc
    rep = detect_limit((t, decay), 1.0, ST)
    assert rep.outcome == "continued-with-zero" and not np.any(rep.limit_estimate)


def test_detect_limit_needs_samples():
    t = geometric_times(1.0, 0.0, 10)
    with pytest.raises(InsufficientSamples):
        detect_limit((t, np.zeros((t.size, 2))), 1.0, ST)
    t = np.linspace(0.0, 0.9, 22)
    with pytest.raises(InsufficientSamples):
        detect_limit((t, np.zeros((t.size, 2))), 1.0, ST)


def test_report_invariants():
    with pytest.raises(ValueError):
        ContinuationReport("continued-with-zero")
    with pytest.raises(ValueError):
        ContinuationReport("sideways")
    assert "no-limit-exists" in ContinuationReport("no-limit-exists", time=1.0).summary()


# ---------------------------------------------------------------------------
# solve


def test_solve_example1_continues_with_zero():
    _, _, traj, rep = example1_run()
    assert rep.outcome == "continued-with-zero" and rep.time == 1.0
    assert traj.domain == (0.0, 2.0, True)
    t, x, _ = traj.samples()
    assert np.max(np.linalg.norm(x[t >= 1.0], axis=1)) <= 1e-6
    assert traj.modes[-1] == "zero-continuation"


def test_solve_example2_stops_at_T():
    _, _, traj, rep = example2_run()
    assert rep.outcome == "no-limit-exists"
    lo, hi, closed = traj.domain
    assert (lo, hi, closed) == (0.0, 1.0, False)
    assert traj.segments[-1].t[-1] < 1.0


def test_solve_zero_initial_state():
    sys1, _ = make_example1()
    traj, rep = solve(sys1, ScenarioConfig("example1", (0.0, 0.0)))
    t, x, _ = traj.samples()
    assert traj.domain == (0.0, 2.0, True) and not np.any(x)
    assert rep.outcome == "continued-with-zero"
    sys2, _ = make_example2()
    traj, rep = solve(sys2, ScenarioConfig("example2", (0.0, 0.0)))
    assert rep.outcome == "horizon-reached" and traj.domain[1] == 1.0


def test_solve_example3_stays_at_origin():
    sys3, _ = make_example3()
    traj, _ = solve(sys3, ScenarioConfig("example3", (0.0, 0.0), t_end=10.0))
    assert traj.domain == (0.0, 10.0, True)
    assert not np.any(traj.samples()[1])
    assert set(traj.modes) == {"zero-continuation"}


def test_solve_supertwisting_reaches_origin():
    traj, rep = solve(make_supertwisting(), ScenarioConfig("supertwisting", (0.1, 0.0), t0=1.0, t_end=10.0))
    assert rep.outcome == "horizon-reached"
    assert traj.domain == (1.0, 10.0, True)
    assert not np.any(traj.final_state())
    assert traj.modes[-1] == "zero-continuation"


def test_solve_sliding_band():
    sys_ = sliding_system(drift=1.0)
    traj, _ = solve(sys_, ScenarioConfig("sliding", (0.5, 0.0), t_end=2.0))
    assert "sliding" in traj.modes
    for seg in traj.segments:
        if seg.mode == "sliding":
            assert np.max(np.abs(seg.x[:, 0])) <= 10 * ST.event_tol
    # reaches the surface at t = 0.5, then x2 = t
    np.testing.assert_allclose(traj.final_state(), [0.0, 2.0], atol=1e-8)


def test_solve_is_deterministic():
    sc = ScenarioConfig("supertwisting", (0.3, -0.2), t0=0.0, t_end=3.0)
    a, ra = solve(make_supertwisting(), sc)
    b, rb = solve(make_supertwisting(), sc)
    ta, xa, _ = a.samples()
    tb, xb, _ = b.samples()
    np.testing.assert_array_equal(ta, tb)
    np.testing.assert_array_equal(xa, xb)
    assert a.modes == b.modes and ra.outcome == rb.outcome


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(-1.0, 1.0), st.floats(0.5, 4.0))
def test_solve_domain_is_monotone(x1, x2, span):
    sc = ScenarioConfig("supertwisting", (x1, x2), t0=0.0, t_end=span)
    traj, _ = solve(make_supertwisting(), sc)
    lo, hi, _ = traj.domain
    assert lo == 0.0 and hi == span
    # every trajectory holds a classical or zero-continuation segment
    assert {"classical", "zero-continuation"} & set(traj.modes)


def test_integrate_is_classical_only():
    sys1, oracle = make_example1()
    traj = integrate(sys1, 0.0, [1.0, 0.0], 0.5)
    t, x, _ = traj.samples()
    assert np.max(np.linalg.norm(x - oracle.solution(0.0, [1.0, 0.0], t), axis=1)) <= 1e-6
    with pytest.raises(ValueError):
        integrate(sys1, 0.0, [1.0, 0.0], 1.0)


# ---------------------------------------------------------------------------
# concatenation


def _oracle_part(oracle, a, b):
    return oracle.trajectory(a, b, max_gap=1e-2, phase_step=1.0)


def test_concatenate_example3_pieces():
    _, oracle = make_example3()
    cuts = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0]
    parts = [_oracle_part(oracle, a, b) for a, b in zip(cuts[:-1], cuts[1:])]
    whole = concatenate(parts[::-1])
    assert whole.domain == (0.0, 4.0, True) and len(whole.segments) == 5
    t = np.array([0.25, 0.75, 1.5])
    np.testing.assert_array_equal(oracle(t + 2.0), oracle(t))
    a = whole.segments[3]
    np.testing.assert_array_equal(a.x[0], [0.0, 0.0])


def test_concatenate_errors_and_identity():
    one = Trajectory((TrajectorySegment([0.0, 1.0], [[0.0], [1.0]], "classical"),))
    assert concatenate([one]) is one
    jump = Trajectory((TrajectorySegment([1.0, 2.0], [[2.0], [2.0]], "classical"),))
    with pytest.raises(LimitMismatch):
        concatenate([one, jump])
    gap = Trajectory((TrajectorySegment([1.5, 2.0], [[1.0], [1.0]], "classical"),))
    with pytest.raises(GapInDomain):
        concatenate([one, gap])
    openend = Trajectory((TrajectorySegment([0.0, 0.5], [[0.0], [1.0]], "classical", end=1.0),))
    ok = Trajectory((TrajectorySegment([1.0, 2.0], [[1.0], [1.0]], "classical"),))
    with pytest.raises(LimitMismatch):
        concatenate([openend, ok])
    glued = concatenate([one, ok])
    assert glued.domain == (0.0, 2.0, True)
