"""Selection-aware shrinkage estimates for experiment corpora.

Face Value, global (normal-normal) and hybrid (local-global) shrinkage
estimators, empirical-Bayes prior calibration, posterior predictive checks
and a simulation lab for selection and prior misspecification.
"""

__version__ = "0.1.0"

from .calibration import (
    CalibrationMethod,
    CalibrationReport,
    fit_marginal_mle,
    fit_method_of_moments,
    log_marginal_likelihood,
)
from .checks import (
    CoverageTarget,
    PredictiveCheckResult,
    ReplicationEvaluation,
    Statistic,
    posterior_predictive_draws,
    replication_evaluation,
    split_corpus,
    tail_area_check,
)
from .errors import (
    HybridShrinkError,
    InfeasibleSelectionError,
    InvalidInputError,
    NumericalError,
    ReportIOError,
    SingularDenominatorError,
)
from .estimators import EstimateBatch, estimate, estimate_arrays, estimate_corpus
from .local import (
    GibbsTrace,
    LambdaPosterior,
    full_posterior_arrays,
    gibbs_posterior_summary,
    gibbs_sample,
    hybrid_shrinkage_estimate,
    lambda_posterior_mode,
)
from .model import (
    ALL_METHODS,
    ExperimentSummary,
    HyperParams,
    Method,
    PosteriorSummary,
    UnitLevelData,
    conditional_posterior,
    face_value_estimate,
    face_value_posterior,
    global_shrinkage_estimate,
)
from .selection import (
    Direction,
    Regime,
    RegimeDraw,
    RegimeSample,
    RuleKind,
    SelectionRule,
    SigmaModel,
    is_selected,
    sample_selected_fixed,
    sample_selected_joint,
)
from .simlab import (
    MetricsRow,
    ScenarioConfig,
    ScenarioKind,
    generate_scenario,
    replication_corpus,
    run_sweep,
)
from .report import figure1_report, read_metrics
