"""Numerical compatibility of projective and Weyl structures on surfaces."""

from .charts import GNOMONIC, NORTH, PLANAR, SOUTH, Chart, chart_grid, get_chart, planar, transition
from .compat import (
    BetaSolution,
    CompatibilityReport,
    WeylStructureChart,
    compatibility_report,
    construct_beta,
    kappa_residual,
    normalize_representative,
    solve_beta_least_squares,
)
from .conics import (
    Conic,
    ConicWeylData,
    ProjPoint,
    conic_weyl_structure,
    decode_conformal,
    fiber_section,
    has_real_points,
    real_point_scan,
    rho,
    tau,
)
from .connections import (
    ConnectionCoeffs,
    EpsilonForm,
    ProjectiveData,
    epsilon_modification,
    levi_civita,
    projective_invariants,
    projectively_equivalent,
    recover_epsilon,
    weyl_connection,
)
from .fields import (
    ConformalMetric,
    MatrixMetric,
    MetricJet,
    OneFormField,
    OneFormJet,
    ScalarField,
    ScalarJet,
    eval_jet,
    field_from_config,
    flat_factor,
    hyperbolic_factor,
    poly_factor,
    poly_one_form,
    round_factor,
    zero_one_form,
)
from .finsler import (
    CoframeInvariants,
    CoframeSample,
    ConformalWeylData,
    UTBPoint,
    codifferential,
    coframe_invariants,
    finsler_coframe,
    gauss_curvature,
    positivity,
    riemannian_coframe,
    w1_flow_period,
)
from .geodesics import (
    ClosureResult,
    ConstantConnection,
    GeodesicState,
    PathSample,
    closure_test,
    great_circle_residual,
    integrate,
    unparametrized_deviation,
)
from .jets import Jet2, fd_oracle

__version__ = "0.1.0"
