"""Numerical toolkit for stratified capillary-gravity free-surface flows.

Computes laminar flows and their thresholds, per-mode dispersion symbols and
bifurcation values, flattened-domain semilinear solves, and small-amplitude
non-laminar wave branches, with physical-field reconstruction and assumption
auditing throughout.
"""

from .errors import (AssumptionError, BifurcationError, BracketError,
                     ConvergenceError, ProfileError, StratWaveError,
                     WindowEscapeError)
from .profiles import (AssumptionCheck, AssumptionReport, StratificationProfile,
                       check_assumptions, eval_f, load_profile, make_profile,
                       profile_to_dict, save_profile)
from .laminar import (LaminarFlow, SensitivityField, apriori_bound,
                      discretization_residual, dpsi_from_quadrature,
                      find_lambda_minus, find_threshold_lambda,
                      laminar_sensitivity, laminar_to_csv, solve_laminar)
from .dispersion import (LambdaStarResult, ModeRecord, MonotonicityReport,
                         find_min_wavenumber, lambda_star, modes_to_csv,
                         modes_to_json, sigma_star, solve_mode_bvp, symbol_mu,
                         verify_symbol_monotonicity)
from .elliptic import (A0Coefficients, FlattenedField, PsiEvaluation,
                       SurfaceShape, WaveGrid, assemble_A0, boundary_trace_B,
                       evaluate_Psi, field_to_csv, get_grid, residual_to_csv,
                       solve_semilinear)
from .continuation import (BranchCurve, BranchPoint, PhysicalSolution,
                           ValidationReport, branch_from_lambda,
                           branch_from_sigma, branch_to_json,
                           reconstruct_physical, validate_solution)

__version__ = "0.1.0"
