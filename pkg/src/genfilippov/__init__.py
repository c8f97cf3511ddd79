"""Simulation of Filippov differential inclusions with singular time instants.

The main entry points are :func:`solve` (trajectories with continuation
across singular instants), :func:`filippov_set` (the set-valued map of a
piecewise-smooth system) and the built-in systems in :mod:`.systems`.
"""

from .core_types import (
    ConvexVertexSet,
    IntegratorSettings,
    PiecewiseSystem,
    ScenarioConfig,
    SingularTimeSet,
    SmoothPiece,
    SwitchingSurface,
    TimeWindow,
    Trajectory,
    TrajectorySegment,
    validate_system,
)
from .errors import FilippovError
from .filippov import FilippovProbe, contains_zero, filippov_set, sliding_vector_field
from .integrator import ContinuationReport, concatenate, detect_limit, integrate, solve
from .systems import (
    AnalyticOracle,
    GainSet,
    GeneralizedSolutionOracle,
    build_system,
    eval_rhs,
    make_example1,
    make_example2,
    make_example3,
    make_supertwisting,
)

__version__ = "0.1.0"
