"""Event-driven hybrid dynamical systems: simulation, sensitivities, design.

The library simulates piecewise-smooth flows with guarded mode transitions,
differentiates them (saltation, fundamental, and monodromy matrices), pushes
uncertainty through events, runs trajectory-tracking LQR across jumps, and
ships a rigid-body contact front end plus independent numeric oracles for
every analytic quantity.
"""

from .errors import (
    AmbiguousEvent,
    DegenerateGuard,
    EventLocalizationError,
    EventOrderChanged,
    NonFiniteState,
    NotPeriodic,
    SaltlibError,
    SchemaError,
    SingularConstraint,
    SingularInputPenalty,
    SlidingSingularity,
    SplitDistribution,
    TangentialEvent,
    ZenoSuspected,
)
from .models import (
    AFFINE_FORMAT,
    BallDropParams,
    ball_drop,
    bouncing_ball,
    constant_flow_two_mode,
    load_affine,
    slide_impact_saltation,
    stick_impact_saltation,
)
from .oracles import (
    OracleReport,
    brute_force_cost,
    compare,
    matrix_rel_err,
    monte_carlo_covariance,
    numeric_saltation,
)
from .propagation import (
    CovarianceState,
    FundamentalMatrix,
    LqrSolution,
    MonodromyReport,
    ValueState,
    fundamental_matrix,
    hybrid_lqr_backward,
    monodromy,
    propagate_covariance,
    riccati_jump,
    variational_flow,
)
from .rigidbody import (
    ContactMode,
    DaggerBlocks,
    EigenReport,
    RigidBodyModel,
    build_hybrid_system,
    closed_form_saltation,
    constraint_forces,
    dagger_blocks,
    eigen_report,
    impact_impulse,
    impact_reset,
    mode_dynamics,
)
from .saltation import (
    SaltationResult,
    StructureReport,
    apply_saltation,
    classify_structure,
    saltation_matrix,
)
from .simulate import (
    GuardBracket,
    SimOptions,
    flow_to,
    integrate_segment,
    locate_event,
    rk4_step,
    simulate,
)
from .system import (
    GuardSpec,
    HybridSystem,
    ResetSpec,
    TransitionSpec,
    VectorFieldSpec,
    affine_field,
    affine_reset,
    identity_reset,
    linear_guard,
    validate_system,
)
from .trajectory import EventRecord, HybridTrajectory, Segment

__version__ = "0.1.0"

__all__ = [
    "AFFINE_FORMAT",
    "AmbiguousEvent",
    "BallDropParams",
    "ContactMode",
    "CovarianceState",
    "DaggerBlocks",
    "DegenerateGuard",
    "EigenReport",
    "EventLocalizationError",
    "EventOrderChanged",
    "EventRecord",
    "FundamentalMatrix",
    "GuardBracket",
    "GuardSpec",
    "HybridSystem",
    "HybridTrajectory",
    "LqrSolution",
    "MonodromyReport",
    "NonFiniteState",
    "NotPeriodic",
    "OracleReport",
    "ResetSpec",
    "RigidBodyModel",
    "SaltationResult",
    "SaltlibError",
    "SchemaError",
    "Segment",
    "SimOptions",
    "SingularConstraint",
    "SingularInputPenalty",
    "SlidingSingularity",
    "SplitDistribution",
    "StructureReport",
    "TangentialEvent",
    "TransitionSpec",
    "ValueState",
    "VectorFieldSpec",
    "ZenoSuspected",
    "apply_saltation",
    "affine_field",
    "affine_reset",
    "ball_drop",
    "bouncing_ball",
    "brute_force_cost",
    "build_hybrid_system",
    "classify_structure",
    "closed_form_saltation",
    "compare",
    "constant_flow_two_mode",
    "constraint_forces",
    "dagger_blocks",
    "eigen_report",
    "flow_to",
    "fundamental_matrix",
    "hybrid_lqr_backward",
    "identity_reset",
    "impact_impulse",
    "impact_reset",
    "integrate_segment",
    "linear_guard",
    "load_affine",
    "locate_event",
    "matrix_rel_err",
    "mode_dynamics",
    "monodromy",
    "monte_carlo_covariance",
    "numeric_saltation",
    "propagate_covariance",
    "riccati_jump",
    "rk4_step",
    "saltation_matrix",
    "simulate",
    "slide_impact_saltation",
    "stick_impact_saltation",
    "validate_system",
    "variational_flow",
]
