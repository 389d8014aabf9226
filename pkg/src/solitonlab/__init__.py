"""Numerical laboratory for downward translating solitons of mean
curvature flow in Minkowski space: strictly spacelike convex graphs
solving a^ij u_ij = C sqrt(1 - |Du|^2) - 1."""

from .errors import (
    BadCurvatureBoundError,
    ConstructionFailureError,
    DiscretizationError,
    FlowBlowupError,
    IntegrationError,
    NonConvergenceError,
    NotConvexError,
    NotSpacelikeError,
    RangeError,
    SolitonLabError,
)
from .geometry import (
    EPS_SPACE,
    GeometryBundle,
    Grid2,
    OperatorSet,
    ScalarField,
    SolitonParams,
    build_operators,
    bundle,
    gradient,
    hessian_identity_check,
    load_field,
    residual,
    save_field,
    smooth_min,
    smooth_min_gradient,
)
from .radial import (
    AsymptoticFit,
    RadialProfile,
    asymptotic_fit,
    maximal_barrier_integral,
    solve_radial,
    translated_radial,
)
from .elliptic import (
    BoundarySpec,
    ComparisonReport,
    ConvexDomain,
    DirichletProblem,
    DiscreteProblem,
    SolveReport,
    comparison_check,
    discretize,
    gradient_bound_check,
    jacobian_consistency,
    newton_solve,
    problem_from_json,
    problem_to_json,
)
from .construct import (
    ConeSamples,
    Envelopes,
    ExhaustionResult,
    SphereFunction,
    SplitLift,
    angular_std,
    blowdown,
    deviation_from_radial,
    eikonal_check,
    envelopes,
    exhaustion_construct,
    sandwich_gap,
    split_lift,
    supporting_planes,
)
from .flow import FlowRun, FlowState, cfl_dt, initial_state, run_to, step

__version__ = "0.1.0"

__all__ = [
    "AsymptoticFit",
    "BadCurvatureBoundError",
    "BoundarySpec",
    "ComparisonReport",
    "ConeSamples",
    "ConstructionFailureError",
    "ConvexDomain",
    "DirichletProblem",
    "DiscreteProblem",
    "DiscretizationError",
    "Envelopes",
    "EPS_SPACE",
    "ExhaustionResult",
    "FlowBlowupError",
    "FlowRun",
    "FlowState",
    "GeometryBundle",
    "Grid2",
    "IntegrationError",
    "NonConvergenceError",
    "NotConvexError",
    "NotSpacelikeError",
    "OperatorSet",
    "RadialProfile",
    "RangeError",
    "ScalarField",
    "SolitonLabError",
    "SolitonParams",
    "SolveReport",
    "SphereFunction",
    "SplitLift",
    "angular_std",
    "asymptotic_fit",
    "blowdown",
    "build_operators",
    "bundle",
    "cfl_dt",
    "comparison_check",
    "deviation_from_radial",
    "discretize",
    "eikonal_check",
    "envelopes",
    "exhaustion_construct",
    "gradient",
    "gradient_bound_check",
    "hessian_identity_check",
    "initial_state",
    "jacobian_consistency",
    "load_field",
    "maximal_barrier_integral",
    "newton_solve",
    "problem_from_json",
    "problem_to_json",
    "residual",
    "run_to",
    "sandwich_gap",
    "save_field",
    "smooth_min",
    "smooth_min_gradient",
    "solve_radial",
    "split_lift",
    "step",
    "supporting_planes",
    "translated_radial",
]
