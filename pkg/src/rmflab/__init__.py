"""rmflab: desk-scale experiments on sign changes of random partial sums.

A simulation laboratory around the partial sums M(u) of a Rademacher
random multiplicative function and of general orthogonal step sequences:
exact number-theoretic baselines (squarefree counts, Mertens census),
closed-form grid sums and correlations, and deterministic parallel Monte
Carlo estimators with bootstrap confidence intervals.
"""

__version__ = "0.1.0"

from .analysis import (
    LambdaParams,
    SignChangeReport,
    chebyshev_tail_bound,
    count_sign_changes,
    event_indicators,
    exact_correlation,
    exact_cross_moment,
    harper_predictor,
    lambda_asymptotic,
    lambda_exact,
)
from .engine import PartialSumTrace, WalkResult, run_walks
from .errors import InternalError, ParameterError, ResourceError, RmflabError
from .models import (
    ModelSpec,
    SidonSet,
    collect_walks,
    mian_chowla,
    psi_predictor,
    psi_stability_check,
    sample_path,
)
from .montecarlo import (
    EstimateWithCI,
    ExperimentPlan,
    RunManifest,
    estimate_correlation,
    estimate_event_probs,
    estimate_expected_V,
    estimate_moment,
    estimate_sign_change_prob,
    expected_v_table,
    moment_table,
    x_ell_grid,
)
from .rmf import (
    CheckpointGrid,
    SignOracle,
    checkpoint_grid,
    f_value,
    rmf_trace,
    sign_of_prime,
)
from .sieve import (
    FactorSegment,
    PrimeTable,
    factor_segment,
    mertens_trace,
    primes_up_to,
    squarefree_count,
)

__all__ = [
    "__version__",
    # errors
    "RmflabError", "ParameterError", "ResourceError", "InternalError",
    # sieve
    "PrimeTable", "FactorSegment", "primes_up_to", "squarefree_count",
    "factor_segment", "mertens_trace",
    # walks
    "PartialSumTrace", "WalkResult", "run_walks",
    "SignOracle", "sign_of_prime", "f_value", "rmf_trace",
    "CheckpointGrid", "checkpoint_grid",
    # models
    "ModelSpec", "SidonSet", "mian_chowla", "sample_path", "collect_walks",
    "psi_predictor", "psi_stability_check",
    # analysis
    "LambdaParams", "lambda_exact", "lambda_asymptotic", "harper_predictor",
    "SignChangeReport", "count_sign_changes", "exact_cross_moment",
    "exact_correlation", "chebyshev_tail_bound", "event_indicators",
    # experiments
    "ExperimentPlan", "EstimateWithCI", "RunManifest",
    "estimate_moment", "moment_table", "estimate_expected_V",
    "expected_v_table", "estimate_sign_change_prob", "estimate_correlation",
    "estimate_event_probs", "x_ell_grid",
]
