"""CMV matrices, the unitary r-matrix Poisson structure, dressing orbits and
Ablowitz-Ladik Lax flows."""

from .cmv import (
    CMVFactors,
    CMVMatrix,
    ThetaBlock,
    ValidationReport,
    VerblunskyCoefficients,
    build_cmv,
    build_factors,
    extract_coefficients,
    free_cmv,
    theta_block,
    validate_cmv,
)
from .dressing import (
    OrbitTag,
    dress,
    dress_lower,
    free_even,
    free_odd,
    in_orbit,
    leaf_product_check,
    preimage_even,
    preimage_odd,
)
from .errors import (
    CMVLaxError,
    DiskExit,
    IllConditioned,
    InvalidParams,
    NoConvergence,
    NotCMV,
    NotInOrbit,
    OutOfDisk,
    SingularInput,
    StepRejected,
)
from .flows import (
    FlowState,
    Trajectory,
    integrate,
    solve_by_factorization,
    solve_pair_by_factorization,
    vector_field_cmv,
    vector_field_hk,
    vector_field_pair,
    verblunsky_trajectory,
)
from .linalg import IwasawaPair, group_factors, iwasawa, matrix_exp, spectrum, tol_lin
from .rmatrix import (
    HamiltonianFunction,
    dual_multiply,
    grad_trace_power,
    j_bracket,
    j_map,
    mybe_residual,
    numerical_gradient,
    pair_trace_power,
    pairing,
    project_b,
    project_k,
    sklyanin_bracket,
    trace_power,
)

__version__ = "0.1.0"
