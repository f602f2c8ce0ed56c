"""Structure-preserving spectral simulator for prescribed Q-curvature flow
of fourth-order conformal operators with non-trivial kernel, on sphere-torus
and torus-torus product manifolds."""

__version__ = "0.1.0"

from .spectral_geometry import (FactorGrid, ProductGrid, build_sphere_grid,
                                build_torus_grid)
from .conformal_operator import (EXPONENT_CAP, ConformalBackground,
                                 ExponentCapError, KernelProjection,
                                 SpectralOperator, apply_operator,
                                 conformal_weight, flat_t4_operator,
                                 make_background, model_s2xt2_operator,
                                 moment_basis, project_kernel, q_curvature,
                                 sphere_xyz_fields, total_q_curvature,
                                 zonal_harmonic_field)
from .flow_engine import (SCHEMES, FlowConfig, FlowRunResult, FlowState,
                          TerminationStatus, make_state, renormalize_volume,
                          rhs, run, stability_dt, step, step_ck54, step_ifrk4,
                          step_rk4)
from .diagnostics import (BlowupCertificate, DiagnosticRow,
                          MomentHypothesisError, apriori_monitors,
                          blowup_bound, dissipation_check, fit_moment_rate,
                          flow_energy, flow_residual, kernel_moment,
                          moment_law_max_error, moment_law_prediction)
from .hypothesis_checker import (PatternResult, SignPatternReport,
                                 check_sign_condition, nodal_margin,
                                 perturb_initial)

__all__ = [
    "__version__",
    "FactorGrid", "ProductGrid", "build_sphere_grid", "build_torus_grid",
    "EXPONENT_CAP", "ConformalBackground", "ExponentCapError",
    "KernelProjection", "SpectralOperator", "apply_operator",
    "conformal_weight", "flat_t4_operator", "make_background",
    "model_s2xt2_operator", "moment_basis", "project_kernel", "q_curvature",
    "sphere_xyz_fields", "total_q_curvature", "zonal_harmonic_field",
    "SCHEMES", "FlowConfig", "FlowRunResult", "FlowState",
    "TerminationStatus", "make_state", "renormalize_volume", "rhs", "run",
    "stability_dt", "step", "step_ck54", "step_ifrk4", "step_rk4",
    "BlowupCertificate", "DiagnosticRow", "MomentHypothesisError",
    "apriori_monitors", "blowup_bound", "dissipation_check",
    "fit_moment_rate", "flow_energy", "flow_residual", "kernel_moment",
    "moment_law_max_error", "moment_law_prediction",
    "PatternResult", "SignPatternReport", "check_sign_condition",
    "nodal_margin", "perturb_initial",
]
