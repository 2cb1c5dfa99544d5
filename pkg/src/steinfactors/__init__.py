"""Stein factors and Wasserstein distances for Poisson approximation on Z+.

The package computes, for costs d(i, j) = |rho(i) - rho(j)| built from an
increasing profile rho on the non-negative integers:

* exact Stein factors (sup-norm, first- and second-difference) of the
  Poisson Stein equation, with certified suprema and boundary companions;
* closed-form factor caps with the universal smoothing constants, plus a
  grid scanner that enforces their envelopes;
* exact transport distances between laws on Z+ (closed cumulative formula,
  transportation-simplex oracle with primal plans and dual witnesses, and
  quantile couplings for power costs, including the quadratic mean);
* the underlying immigration-death semigroup: transition rows, resolvent
  integrals, generator solves, and a coupled path simulator;
* verified error certificates for Poisson approximation of sums of
  independent Bernoulli variables, with a growth-scan helper.

The command-line front end (``steinfactors``) exposes all of it with
reproducible CSV/JSON output.
"""

from .bounds import (
    FactorBounds,
    ScanReport,
    ScanRow,
    boundary_values,
    scan_constants,
    theorem_bounds,
    xi1,
    xi2,
)
from .certificates import (
    Certificate,
    ConjectureReport,
    FamilyFit,
    certificate,
    conjecture_scan,
    shifted_truncated_law,
)
from .costs import CostRho, lip_seminorm, make_cost
from .distributions import (
    Pmf,
    TailFunctionals,
    chernoff_lower_tail,
    pmf_from_probs,
    poisson_binomial_pmf,
    poisson_pmf,
    tail_functionals,
    truncated_poisson_pmf,
)
from .errors import (
    CertificationError,
    ConstantViolationError,
    InvalidArgumentError,
    NumericFailureError,
    SolverFailureError,
)
from .semigroup import (
    CoupledEstimates,
    PathSample,
    mode_majorant_integral,
    resolvent_diagonal_integral,
    resolvent_tridiagonal,
    sample_path,
    semigroup_row,
    simulate_coupled,
)
from .stein import (
    FactorExact,
    delta_h_rho,
    exact_factors,
    solve_stein,
    stein_identity_residual,
)
from .transport import (
    TransportResult,
    dual_witness_check,
    lp_transport_oracle,
    quantile_transport_cost,
    wasserstein_p,
    wasserstein_rho,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # distributions
    "Pmf", "TailFunctionals", "poisson_pmf", "truncated_poisson_pmf",
    "poisson_binomial_pmf", "pmf_from_probs", "tail_functionals",
    "chernoff_lower_tail",
    # costs
    "CostRho", "make_cost", "lip_seminorm",
    # stein
    "FactorExact", "exact_factors", "solve_stein", "delta_h_rho",
    "stein_identity_residual",
    # bounds
    "FactorBounds", "ScanRow", "ScanReport", "theorem_bounds",
    "boundary_values", "scan_constants", "xi1", "xi2",
    # transport
    "TransportResult", "wasserstein_rho", "lp_transport_oracle",
    "dual_witness_check", "wasserstein_p", "quantile_transport_cost",
    # semigroup
    "PathSample", "CoupledEstimates", "semigroup_row",
    "resolvent_diagonal_integral", "mode_majorant_integral",
    "resolvent_tridiagonal", "sample_path", "simulate_coupled",
    # certificates
    "Certificate", "FamilyFit", "ConjectureReport", "certificate",
    "shifted_truncated_law", "conjecture_scan",
    # errors
    "InvalidArgumentError", "CertificationError", "SolverFailureError",
    "NumericFailureError", "ConstantViolationError",
]
