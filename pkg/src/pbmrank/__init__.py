"""Contextual ranking bandits under the position-based click model.

Building blocks:

* :mod:`pbmrank.core` — domain types and the contextualization transform.
* :mod:`pbmrank.policies` — LinUCB / linear Thompson-sampling rankers, their
  bias-unaware variants, and the random baseline.
* :mod:`pbmrank.estimators` — fixed, CTR, Bayesian-probit and EM position-bias
  estimators.
* :mod:`pbmrank.env` — synthetic environments with position-censored feedback.
* :mod:`pbmrank.harness` — experiment grids, metrics, persistence.
* :mod:`pbmrank.serving` — request/response serving with durable state.
"""

from .core import (
    ActionVector,
    ClickLogEntry,
    ContextVector,
    ContextualizedAction,
    PositionBias,
    Slate,
    SlateFeedback,
    contextualize,
    contextualized_dim,
    expected_click_probability,
)
from .env import EnvConfig, SyntheticEnv, position_bias_true
from .estimators import (
    CtrEstimator,
    EmEstimator,
    FixedBias,
    ProbitEstimator,
    fallback_schedule,
    make_estimator,
)
from .harness import (
    ExperimentSpec,
    RunResult,
    run_experiment,
    run_grid,
    compare_bias_estimates,
    posterior_similarity,
    welch_p_one_sided,
)
from .policies import (
    ConfidenceConfig,
    LinTSRanker,
    LinUCBRanker,
    NIGState,
    RandomRanker,
    RidgeState,
    make_policy,
    rank_round,
    ridge_theta,
    select_top_l,
    ts_sample,
    ucb_score,
    update_lints,
    update_linucb,
)
from .serving import FeedbackEvent, RankingService, RankRequest

__version__ = "0.1.0"
