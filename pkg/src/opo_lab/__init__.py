"""Orthogonalized policy optimization on finite outcome spaces.

The OPO loss separates how training signal is weighted (``alpha``-reweighted
advantages) from how far the policy may move (a chi-square penalty of
stiffness ``mu`` on the centered likelihood ratio).
"""

from .core import (
    AdvantageField,
    CategoricalPolicy,
    LogRatioField,
    OutcomeSpace,
    PolicyLogits,
    RatioField,
    RunMetrics,
    WeightField,
    log_ratio_from_policies,
    policy_entropy,
    ratio_from_policies,
)
from .geometry import (
    MirrorKind,
    MirrorMap,
    TrustRegion,
    bregman,
    chi2_divergence,
    kl_divergence,
    potential,
    tv_chi2_bound_gap,
    tv_distance,
)
from .objectives import (
    CoordinateMode,
    DpoConfig,
    L2PgConfig,
    OpoConfig,
    dpo_local_curvature,
    dpo_logistic_loss,
    dpo_margin_grad,
    kl_reg_pg_loss,
    l2_pg_loss,
    lagrange_dual_solve,
    opo_closed_form,
    opo_grad_v,
    opo_loss_log,
    opo_loss_ratio,
)
from .sampling import RolloutBatch, alpha_weights, group_normalized_advantage, weight_diagnostics
from .environments import BanditEnv, SequenceEnv, Seed, enumerate_outcomes, make_env, reward_of, sample_rollouts
from .trainer import (
    Algo,
    AnchorMode,
    TrainConfig,
    TrainResult,
    build_preference_pairs,
    exact_expected_reward,
    run_training,
)
from .dynamics import (
    hessian_probe,
    l2_distance,
    log_approx_error_check,
    measure_contraction_rate,
    param_grad_check,
    recursion_residual,
    saturation_profile,
    steps_to_tolerance,
    v_space_descent,
)
from .harness import (
    SuiteFailure,
    compare_runs,
    run_bounds_suite,
    run_dynamics_suite,
    run_train_suite,
)

__version__ = "0.1.0"
