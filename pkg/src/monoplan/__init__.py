"""Geometry of monotone transport plans over a fixed first marginal."""

from .cone import (
    LambdaInterval,
    MonotonicityReport,
    Projection,
    atomize,
    is_monotone,
    lambda_max,
    lambda_max_bisection,
    pava,
    project_cone,
)
from .errors import (
    BaseMismatchError,
    DomainError,
    MonoplanError,
    NotMonotoneError,
    NumericError,
    SizeError,
    UnsupportedCombinationError,
)
from .measures import (
    PiecewiseAffineMap,
    QuantileVector,
    ScalarMeasure,
    dirac,
    discrete,
    mixture,
    pushforward,
    quantile,
    quantile_vector,
    uniform,
    wasserstein2,
    wasserstein2_squared,
)
from .oracle import oracle_project, oracle_w2
from .plans import (
    ConstFiber,
    FiberPlan,
    GluedPlan,
    MapFiber,
    add,
    fiber_affine_push,
    glue,
    graph_plan,
    oplus_add,
    scale,
    w_rho,
    w_rho_via_adm,
    zero_plan,
)
from .tangent import (
    TangentDecomposition,
    WitnessStep,
    assemble_witness,
    convexity_witness,
    decompose_monotone,
    tangent_membership,
    truncate_atoms,
    truncate_support,
    witness_atom,
    witness_function,
    witness_sequence,
)

__version__ = "0.1.0"
