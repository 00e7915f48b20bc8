"""crystalflow: anisotropic and crystalline mean curvature flow.

Simulates V = -psi(nu) (kappa_phi + g) by implicit time discretization:
each step solves an anisotropic total-variation problem
-h div z + u = f and takes the zero sublevel set of u as the next set.
A level-set driver evolves every sublevel of an initial function at once,
and a mobility-approximation driver realizes general mobilities as limits
of regularized ones.
"""

from .closedforms import (
    OracleParams,
    comparison_lower_bound,
    resolvent_closed_form,
    wulff_radius_law,
    wulff_step_radius,
)
from .errors import ConfigError, InputError, NumericalError
from .flow import (
    DiagnosticsRecord,
    FlowConfig,
    FlowTrace,
    ForcingTerm,
    StepDiagnostics,
    atw_step,
    diagnostics_report,
    forcing_increment,
    run_flow,
)
from .grids import (
    Grid,
    ScalarField,
    SetMask,
    anisotropic_perimeter,
    brute_force_distance,
    discrete_lipschitz,
    halfspace_mask,
    hausdorff_distance,
    mask_gauge_radii,
    signed_distance_field,
    stencil_chordal_bound,
    sublevel_mask,
    wulff_mask,
)
from .levelset import (
    ApproximationReport,
    LevelSetFunction,
    compare_levelset_functions,
    fattening_report,
    level_grid,
    modulus_check,
    run_levelset,
    solve_via_approximation,
)
from .norms import (
    CrystallineNorm,
    EuclideanNorm,
    Norm,
    PNorm,
    SumNorm,
    WulffShape,
    crystalline_l1,
    ellipticity_constants,
    eval_norm,
    hexagonal_norm,
    norm_from_spec,
    polar_eval,
    regularize_mobility,
    subgradient_select,
)
from .resolvent import (
    ResolventProblem,
    ResolventSolution,
    SolverParams,
    project_polar_ball,
    solve_resolvent,
)

__version__ = "0.1.0"
