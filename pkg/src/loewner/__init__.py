"""Numerical toolkit for the chordal Loewner equation.

Driving functions, downward/upward flows, trace computation by slit-map
composition, hull rasterization, swallow times, Loewner curvature, and
machine checks of quantitative hull geometry.
"""

from .analysis import (
    CheckReport,
    EnvelopeFit,
    approach_angle,
    capture_interval_endpoints,
    check_capture_interval,
    check_curvature_comparison,
    check_height_bound,
    check_proposition_hypotheses,
    check_simple_curve,
    fit_envelope,
    fit_tangential_exponent,
    locate_left_endpoint,
)
from .drivers import (
    Constant,
    DrivingFunction,
    Linear,
    PowerEnd,
    SqrtEnd,
    StaircaseDriver,
    TimeChangedSqrt,
    TransformSpec,
    Weierstrass,
    make_no_trace_driver,
    parse_driver_spec,
    transform,
    weierstrass_default_terms,
)
from .errors import (
    AmbiguousSwallowError,
    AnalyticDerivativeUnavailable,
    CoverageError,
    DomainError,
    InsufficientDataError,
    IntegrationError,
    LoewnerError,
    ParameterError,
    PreconditionError,
)
from .solver import (
    FlowTrajectory,
    HullRaster,
    SolverConfig,
    TracePath,
    compute_trace,
    downward_flow,
    downward_flow_batch,
    elementary_forward_slit,
    elementary_inverse_slit,
    hull_left_endpoint,
    hull_raster,
    real_hull_interval,
    recover_driver,
    swallow_time,
    swallow_times_real,
    upward_flow,
    upward_flow_batch,
)
from .stochastic import (
    InversePath,
    SubordinatorPath,
    invert_path,
    make_time_changed_driver,
    sample_one_sided_stable,
    sample_subordinator,
    time_changed_sqrt_driver,
)

__version__ = "0.1.0"
