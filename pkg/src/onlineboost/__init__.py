"""Boosted online linear regression with SGD and RLS weak learners."""

from .boosting import (
    EnsembleState,
    LearnerSlot,
    RoundLog,
    combiner_predict,
    combiner_update,
    compute_weight,
    compute_weight_known_sigma,
    run_round,
    run_stream,
    schedule_updates,
    update_delta,
    update_loss,
)
from .core import (
    BoostConfig,
    RngStream,
    Sample,
    clamp_unit,
    derive_trial_seed,
    sigma_m_from_target,
)
from .data import (
    Stream,
    StreamSpec,
    duffing_next,
    gen_duffing,
    gen_stationary,
    load_csv,
    normalize_minmax,
)
from .estimator import BoostedOnlineRegressor
from .learners import (
    NmState,
    NumericalError,
    SgdState,
    batch_ls_oracle,
    nm_forward_fit,
    nm_weighted_step,
    predict,
    sgd_step,
)
from .metrics import (
    RunReport,
    ase_curve,
    complexity_report,
    lemma1_certificate,
    lemma2_learner_bound,
    theorem2_lambda_bound,
    weighted_mse,
)

__all__ = [
    "BoostedOnlineRegressor",
    "ase_curve",
    "batch_ls_oracle",
    "BoostConfig",
    "clamp_unit",
    "combiner_predict",
    "combiner_update",
    "complexity_report",
    "compute_weight",
    "compute_weight_known_sigma",
    "derive_trial_seed",
    "duffing_next",
    "EnsembleState",
    "gen_duffing",
    "gen_stationary",
    "LearnerSlot",
    "lemma1_certificate",
    "lemma2_learner_bound",
    "load_csv",
    "nm_forward_fit",
    "nm_weighted_step",
    "NmState",
    "normalize_minmax",
    "NumericalError",
    "predict",
    "RngStream",
    "RoundLog",
    "run_round",
    "run_stream",
    "RunReport",
    "Sample",
    "schedule_updates",
    "sgd_step",
    "SgdState",
    "sigma_m_from_target",
    "Stream",
    "StreamSpec",
    "theorem2_lambda_bound",
    "update_delta",
    "update_loss",
    "weighted_mse",
]

__version__ = "0.1.0"
