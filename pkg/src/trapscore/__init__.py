"""trapscore: score surveillance trap sites by their historical ability to
predict nearby human cases, then estimate what drives the score.

Pipeline: ingest pools/sites/cases CSVs -> label responses -> annotate
pooled-prevalence risk -> cross-validate a spatial logistic mixed model ->
per-trap weighted scores -> backdoor-adjusted dose-response of the score on
site covariates.
"""

from .data_model import (
    Dataset,
    HumanCase,
    PoolObservation,
    TrapSite,
    label_responses,
    parse_dataset,
)
from .pooled import PoolGroup, annotate_risk, mle_prevalence, vector_index
from .glmm import (
    FitConfig,
    FittedGlmm,
    GlmmCoefficients,
    MaternParams,
    build_correlation_matrix,
    fit,
    matern_correlation,
    predict_prob,
)
from .evaluation import (
    RocCurve,
    TrapConfusion,
    cross_validate,
    make_folds,
    optimal_threshold,
    roc_curve,
)
from .scoring import TrapScorecard, score, score_report, select_tstar, specificity_score
from .causal import (
    AdrfEstimate,
    CausalDag,
    GpsModel,
    backdoor_adjustment_sets,
    bootstrap_adrf,
    estimate_adrf,
    fit_gps,
    load_dag,
    run_phase3,
)
from .synthdata import CovariateSpec, WorldConfig, generate_world, write_world

__version__ = "0.1.0"
