"""Relative-shift regression for compositional predictors.

Regression on compositions without transformation, with structured penalties
that aggregate features: pairwise coefficient fusion, and three tree-guided
penalties on per-node coefficients.  Solved by a smoothing proximal gradient
method with acceleration.
"""

from .composition import (
    CompositionMatrix,
    add_noise_snr,
    sample_logistic_normal,
    truncate_renormalize,
    validate_closure,
)
from .model import FitResult, cluster_coefficients, fit, mspe, predict, truncate_and_aggregate
from .penalty import PenaltySpec, compile_dual, dual_spectral_norm, evaluate
from .rng import CounterRng
from .solver import (
    BACKEND,
    MuPolicy,
    SolverConfig,
    assemble,
    solve_fista,
    subgradient_reference,
)
from .taxonomy import (
    AggregatingSet,
    TaxTree,
    aggregate_columns,
    coarsest_aggregating_set,
    indicator_matrix,
    parse_newick,
)
from .tuning import CvPlan, CvResult, cross_validate, lambda_grid, lambda_max, make_folds

__version__ = "0.1.0"

__all__ = [
    "AggregatingSet",
    "BACKEND",
    "CompositionMatrix",
    "CounterRng",
    "CvPlan",
    "CvResult",
    "FitResult",
    "MuPolicy",
    "PenaltySpec",
    "SolverConfig",
    "TaxTree",
    "add_noise_snr",
    "aggregate_columns",
    "assemble",
    "cluster_coefficients",
    "coarsest_aggregating_set",
    "compile_dual",
    "cross_validate",
    "dual_spectral_norm",
    "evaluate",
    "fit",
    "indicator_matrix",
    "lambda_grid",
    "lambda_max",
    "make_folds",
    "mspe",
    "parse_newick",
    "predict",
    "sample_logistic_normal",
    "solve_fista",
    "subgradient_reference",
    "truncate_and_aggregate",
    "truncate_renormalize",
    "validate_closure",
]
