"""DEDACT-style decomposition of direct and associative feature importance."""

from .core import (
    CROSS_ENTROPY,
    SQUARED_ERROR,
    DataMatrix,
    FeatureIndexSet,
    ImportanceEstimate,
    LinearPredictor,
    LossFunction,
    Predictor,
    TargetVector,
    empirical_risk,
    fit_ols,
)
from .decompose import (
    CooperativeGame,
    DecompositionTable,
    ShapleyResult,
    fast_decompose_pfi,
    fast_decompose_pfi_ordered,
    fast_decompose_sage,
    shapley_decompose_pfi,
    shapley_decompose_sage,
    shapley_exact,
    shapley_sampled,
)
from .importance import ImportanceEvaluator, MeasureSpec, evaluation_count, reset_evaluation_count
from .runner import (
    ResultBundle,
    RunConfig,
    ingest_csv,
    run,
    run_biomarker_demo,
    run_census_demo,
    train_eval_split,
)
from .sampler import (
    GaussianModel,
    MarginalizedPredictor,
    PerturbationSampler,
    conditional_params,
    fit_gaussian,
    marginalize,
    perturb,
)
from .scm import LinearSCM, biomarker_scm, census_scm, d_separated, sample_scm

__all__ = [
    "CROSS_ENTROPY",
    "SQUARED_ERROR",
    "CooperativeGame",
    "DataMatrix",
    "DecompositionTable",
    "FeatureIndexSet",
    "GaussianModel",
    "ImportanceEstimate",
    "ImportanceEvaluator",
    "LinearPredictor",
    "LinearSCM",
    "LossFunction",
    "MarginalizedPredictor",
    "MeasureSpec",
    "PerturbationSampler",
    "Predictor",
    "ResultBundle",
    "RunConfig",
    "ShapleyResult",
    "TargetVector",
    "biomarker_scm",
    "census_scm",
    "conditional_params",
    "d_separated",
    "empirical_risk",
    "evaluation_count",
    "fast_decompose_pfi",
    "fast_decompose_pfi_ordered",
    "fast_decompose_sage",
    "fit_gaussian",
    "fit_ols",
    "ingest_csv",
    "marginalize",
    "perturb",
    "reset_evaluation_count",
    "run",
    "run_biomarker_demo",
    "run_census_demo",
    "sample_scm",
    "shapley_decompose_pfi",
    "shapley_decompose_sage",
    "shapley_exact",
    "shapley_sampled",
    "train_eval_split",
]

__version__ = "0.1.0"
