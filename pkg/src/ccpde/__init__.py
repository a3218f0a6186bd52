"""Numerical laboratory for the subelliptic p-Poisson problem and its p->infinity limit.

The package solves the Dirichlet problem for the horizontal p-Laplacian on
box grids equipped with a smooth horizontal frame, computes
Carnot-Caratheodory distance fields by anisotropic fast sweeping, and
provides the verification harness for the large-p limit: energy
monotonicity, convergence to the distance field, horizontal Lipschitz
bounds, absolute-minimality spot checks, and viscosity-solution probes.
"""

from .differential import XDifferential, export_profile_csv, remainder_profile, x_differential
from .eikonal import (
    DistanceField,
    axis_pairs,
    default_controls,
    graph_distance,
    metric_equivalence_probe,
    ridge_flags,
    solve_eikonal,
)
from .errors import (
    CCPDEError,
    ConvergenceError,
    DomainError,
    ExpressionError,
    ParameterError,
    SingularFrameError,
    StencilError,
)
from .expressions import compile_expression
from .frames import (
    Frame,
    custom_frame,
    div_correction,
    euclidean,
    eval_coeff,
    eval_coeff_deriv,
    flat_phi,
    frame_by_name,
    grushin,
    heisenberg1,
    hormander_probe,
    left_inverse,
    lic_check,
    load_frame,
)
from .grid import (
    Grid,
    export_horizontal_csv,
    export_scalar_csv,
    integrate,
    lp_norm,
    pointwise_norm,
    sup_norm,
    x_divergence,
    x_gradient,
    x_hessian,
)
from .limits import (
    SweepReport,
    amle_spot_check,
    limit_compare,
    limit_system_residuals,
    lipschitz_bound_check,
    monotonicity_check,
    p_sweep,
)
from .ppoisson import (
    SolveConfig,
    SolveReport,
    comparison_check,
    dirichlet_flux_check,
    energy,
    ep_identities,
    solve_p_poisson,
)
from .viscosity import (
    ProbeVerdict,
    eikonal_residual,
    export_verdicts_csv,
    infinity_laplacian,
    p_operator_residual,
    probe_viscosity,
    x_laplacian,
)

__version__ = "0.1.0"

__all__ = [
    "CCPDEError",
    "ConvergenceError",
    "DistanceField",
    "DomainError",
    "ExpressionError",
    "Frame",
    "Grid",
    "ParameterError",
    "ProbeVerdict",
    "SingularFrameError",
    "SolveConfig",
    "SolveReport",
    "StencilError",
    "SweepReport",
    "XDifferential",
    "amle_spot_check",
    "axis_pairs",
    "comparison_check",
    "compile_expression",
    "custom_frame",
    "default_controls",
    "dirichlet_flux_check",
    "div_correction",
    "eikonal_residual",
    "energy",
    "ep_identities",
    "euclidean",
    "eval_coeff",
    "eval_coeff_deriv",
    "export_horizontal_csv",
    "export_profile_csv",
    "export_scalar_csv",
    "export_verdicts_csv",
    "flat_phi",
    "frame_by_name",
    "graph_distance",
    "grushin",
    "heisenberg1",
    "hormander_probe",
    "infinity_laplacian",
    "integrate",
    "left_inverse",
    "lic_check",
    "limit_compare",
    "limit_system_residuals",
    "lipschitz_bound_check",
    "load_frame",
    "lp_norm",
    "metric_equivalence_probe",
    "monotonicity_check",
    "p_operator_residual",
    "p_sweep",
    "pointwise_norm",
    "probe_viscosity",
    "remainder_profile",
    "ridge_flags",
    "solve_eikonal",
    "solve_p_poisson",
    "sup_norm",
    "x_differential",
    "x_divergence",
    "x_gradient",
    "x_hessian",
    "x_laplacian",
]
