"""Fano-type inequalities for list decoding.

Bounds on conditional information measures (Shannon, Arimoto and Hayashi
Renyi forms, and general concave functionals) given a list-decoding error
budget, together with the joints that attain them and numerical checks.
"""

from .errors import (
    BadZCardinality,
    BisectionFailure,
    ConditionsUnmet,
    DeltaOutOfRange,
    EpsOutOfRange,
    FanoError,
    Infeasible,
    KInfinite,
    MassSumMismatch,
    MeshTooLarge,
    NegativeMass,
    NonConcavePhi,
    NotMajorized,
    NumericalBreakdown,
    PhiInfinite,
    TailNotSummable,
    UnsortableTail,
    UnsupportedTail,
    YTooSmall,
    ZTooSmall,
)
from .pmf import (
    GeometricTail,
    LogPowerTail,
    MajorizationVerdict,
    Pmf,
    PoissonTail,
    decreasing_rearrangement,
    majorizes,
    truncate,
    validate,
    variational_distance,
)
from .measures import (
    JointDist,
    Measure,
    PhiFunctional,
    arimoto,
    bhattacharyya,
    binary_entropy,
    conditional_measure,
    dbar_value,
    hayashi,
    ktv,
    lp_norm,
    phi_eval,
    quadratic,
    renyi_entropy,
    shannon_entropy,
)
from .errprob import (
    SystemSpec,
    feasible_range,
    list_map_error,
    marginal_list_error,
    restricted_list_error,
    symbolwise_error,
)
from .fano import (
    BoundReport,
    FanoIndices,
    Truncation,
    bound,
    fano_type0,
    fano_type1,
    fano_type2,
    fano_type3,
    ho_yeung_truncation,
    phi_finiteness_guard,
    spade_min_y,
    spade_threshold,
)
from .extremal import (
    BirkhoffDecomp,
    Certificate,
    DoublyStochastic,
    birkhoff_decompose,
    endpoint_achievers,
    extremal_joint_type1,
    extremal_joint_type2,
    hlp_transfer,
    verify_extremal,
)
from .oracle import OracleConfig, brute_force_sup, exhaustive_small, tv_ball_min_entropy, tv_grid_slack
from .asymptotics import (
    SourceFamily,
    SymbolwiseReport,
    TraceRow,
    aep_defect,
    equivocation_trace,
    realize,
    symbolwise_trace,
    trace_to_csv,
)

__version__ = "0.1.0"
