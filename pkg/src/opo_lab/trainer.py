"""Tabular softmax training: the OPO loop and four baselines.

Every algorithm shares the rollout, advantage and metrics pipeline and
takes one plain gradient step on the logits per rollout group.

The OPO loss used per step is the group-sum estimate

    -sum_i rho_i omega_i v(y_i) + n (mu/2) E_ref[v^2]

with rho_i = pi_ref(y_i) / pi_behavior(y_i). Both terms are n times an
unbiased estimate of the ratio objective; with on-policy anchoring rho = 1
and the linear term is the plain sum over the group. With
``ref_estimator="mc"`` the penalty is also estimated from the group.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (
    CategoricalPolicy,
    RunMetrics,
    policy_entropy,
    softmax,
)
from .environments import SplitMix64, Seed, enumerate_outcomes, sample_rollouts
from .geometry import chi2_divergence, kl_divergence, tv_distance
from .objectives import (
    CoordinateMode,
    L2PgConfig,
    dpo_logistic_loss,
    kl_reg_pg_loss,
    l2_pg_loss,
    opo_loss_log,
    opo_loss_ratio,
    softmax_backward,
    _sigmoid,
)
from .sampling import RolloutBatch, aggregate_weights, alpha_weights, group_normalized_advantage

log = logging.getLogger(__name__)


class Algo(enum.Enum):
    OPO = "opo"
    GRPO = "grpo"
    DPO = "dpo"
    KLPG = "klpg"
    L2PG = "l2pg"


class AnchorMode(enum.Enum):
    ON_POLICY = "onpolicy"
    FIXED = "fixed"


DEFAULT_ANCHOR = {
    Algo.OPO: AnchorMode.ON_POLICY,
    Algo.GRPO: AnchorMode.ON_POLICY,
    Algo.DPO: AnchorMode.FIXED,
    Algo.KLPG: AnchorMode.FIXED,
    Algo.L2PG: AnchorMode.FIXED,
}


def _enum(cls, value):
    return value if isinstance(value, cls) else cls(value)


@dataclass(frozen=True)
class TrainConfig:
    algo: Algo = Algo.OPO
    alpha: float = 0.6
    mu: float = 1.0
    eta: float = 0.05
    beta: float | None = None
    lam: float | None = None
    steps: int = 400
    rollouts_per_step: int = 6
    seed: Seed = Seed(7)
    coordinate_mode: CoordinateMode = CoordinateMode.EXACT_RATIO
    anchor_mode: AnchorMode | None = None
    ref_estimator: str = "exact"
    scale_adv_by_std: bool = False
    adv_clip: float | None = None
    init_logits: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "algo", _enum(Algo, self.algo))
        object.__setattr__(self, "coordinate_mode", _enum(CoordinateMode, self.coordinate_mode))
        if self.anchor_mode is None:
            object.__setattr__(self, "anchor_mode", DEFAULT_ANCHOR[self.algo])
        else:
            object.__setattr__(self, "anchor_mode", _enum(AnchorMode, self.anchor_mode))
        if not isinstance(self.seed, Seed):
            object.__setattr__(self, "seed", Seed(self.seed))
        if self.init_logits is not None:
            object.__setattr__(self, "init_logits", tuple(float(x) for x in self.init_logits))
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.rollouts_per_step < 1:
            raise ValueError("rollouts_per_step must be >= 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.ref_estimator not in ("exact", "mc"):
            raise ValueError("ref_estimator must be 'exact' or 'mc'")
        if self.algo is Algo.OPO and not self.mu > 0:
            raise ValueError("OPO needs mu > 0")
        if self.algo in (Algo.DPO, Algo.KLPG) and (self.beta is None or not self.beta > 0):
            raise ValueError(f"{self.algo.value} needs beta > 0")
        if self.algo is Algo.L2PG and (self.lam is None or self.lam < 0):
            raise ValueError("l2pg needs lambda >= 0")

    def with_(self, **changes) -> TrainConfig:
        return replace(self, **changes)


@dataclass
class TrainResult:
    metrics: list
    final_policy: CategoricalPolicy
    final_logits: np.ndarray = field(repr=False)
    step_delta_inf: list = field(default_factory=list, repr=False)


@dataclass
class StepOutput:
    grad: np.ndarray
    loss: float


def build_preference_pairs(batch: RolloutBatch) -> list:
    """Pair best with worst, moving inward, over batch positions; ties end the pairing."""
    r = batch.rewards
    order = np.argsort(-r, kind="stable")
    pairs = []
    i, j = 0, len(order) - 1
    while i < j:
        w, l = int(order[i]), int(order[j])
        if r[w] <= r[l]:
            break
        pairs.append((w, l))
        i += 1
        j -= 1
    return pairs


def exact_expected_reward(env, pi) -> float:
    p = np.asarray(pi, dtype=np.float64)
    return float(p @ env.rewards())


def _opo_step(theta, ref, batch, adv, cfg: TrainConfig) -> StepOutput:
    p = softmax(theta)
    ids = batch.outcome_ids
    n = len(batch)
    mu_n = n * cfg.mu
    omega = alpha_weights(adv, p[ids] / ref[ids] - 1.0, cfg.alpha).omega
    rho = ref[ids] / batch.behavior_probs
    lin = aggregate_weights(ids, omega * rho, p.size)
    mc = cfg.ref_estimator == "mc"
    rho_agg = aggregate_weights(ids, rho, p.size) if mc else None

    if cfg.coordinate_mode is CoordinateMode.EXACT_RATIO:
        v = p / ref - 1.0
        if mc:
            loss = -np.sum(lin * v) + 0.5 * cfg.mu * np.sum(rho_agg * v**2)
            dv = -lin + cfg.mu * rho_agg * v
        else:
            loss = n * opo_loss_ratio(v, lin / (n * ref), ref, cfg.mu)
            dv = ref * (-lin / ref + mu_n * v)
        dlogp = dv * (p / ref)
    else:
        delta = np.log(p) - np.log(ref)
        if mc:
            loss = -np.sum(lin * delta) + 0.5 * cfg.mu * np.sum(rho_agg * delta**2)
            dlogp = -lin + cfg.mu * rho_agg * delta
        else:
            loss = opo_loss_log(delta, lin, np.unique(ids), ref, mu_n)
            dlogp = -lin + mu_n * ref * delta
    return StepOutput(softmax_backward(p, dlogp), float(loss))


def _pg_dlogp(batch, adv, size):
    return -aggregate_weights(batch.outcome_ids, adv, size)


def _dpo_step(theta, ref, batch, beta) -> StepOutput:
    p = softmax(theta)
    delta = np.log(p) - np.log(ref)
    pairs = build_preference_pairs(batch)
    dlogp = np.zeros_like(p)
    loss = 0.0
    if not pairs:
        log.debug("all rewards tied; DPO step is a no-op")
    for w, l in pairs:
        yw, yl = batch.outcome_ids[w], batch.outcome_ids[l]
        m = delta[yw] - delta[yl]
        loss += dpo_logistic_loss(m, beta)
        dm = -beta * float(_sigmoid(-beta * m))
        dlogp[yw] += dm
        dlogp[yl] -= dm
    return StepOutput(softmax_backward(p, dlogp), float(loss))


def train_step(theta, ref, batch: RolloutBatch, cfg: TrainConfig, theta0=None) -> StepOutput:
    """Loss and logit gradient for one rollout group at parameters ``theta``."""
    theta = np.asarray(theta, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    p = softmax(theta)
    algo = cfg.algo
    if algo is Algo.DPO:
        return _dpo_step(theta, ref, batch, cfg.beta)
    adv = group_normalized_advantage(batch, cfg.scale_adv_by_std, cfg.adv_clip).a
    if algo is Algo.OPO:
        return _opo_step(theta, ref, batch, adv, cfg)
    ids = batch.outcome_ids
    if algo is Algo.GRPO:
        dlogp = _pg_dlogp(batch, adv, p.size)
        loss = float(np.sum(dlogp * np.log(p)))
        return StepOutput(softmax_backward(p, dlogp), loss)
    if algo is Algo.KLPG:
        loss = kl_reg_pg_loss(p, ref, adv, ids, cfg.beta)
        dlogp = _pg_dlogp(batch, adv, p.size) + cfg.beta * p * (np.log(p / ref) + 1.0)
        return StepOutput(softmax_backward(p, dlogp), loss)
    theta0 = np.zeros_like(theta) if theta0 is None else np.asarray(theta0, dtype=np.float64)
    loss = l2_pg_loss(theta, adv, ids, L2PgConfig(cfg.lam, theta0))
    grad = softmax_backward(p, _pg_dlogp(batch, adv, p.size)) + cfg.lam * (theta - theta0)
    return StepOutput(grad, loss)


def _warn_unused(cfg: TrainConfig):
    defaults = TrainConfig()
    if cfg.algo is not Algo.OPO and (cfg.alpha != defaults.alpha or cfg.mu != defaults.mu):
        log.warning("alpha/mu are ignored by %s", cfg.algo.value)
    if cfg.algo not in (Algo.DPO, Algo.KLPG) and cfg.beta is not None:
        log.warning("beta is ignored by %s", cfg.algo.value)
    if cfg.algo is not Algo.L2PG and cfg.lam is not None:
        log.warning("lambda is ignored by %s", cfg.algo.value)


def run_training(env, cfg: TrainConfig) -> TrainResult:
    size = enumerate_outcomes(env).size
    _warn_unused(cfg)
    if cfg.init_logits is None:
        theta = np.zeros(size)
    else:
        theta = np.array(cfg.init_logits, dtype=np.float64)
        if theta.size != size:
            raise ValueError("init_logits does not match the outcome space")
    theta0 = theta.copy()
    fixed_ref = softmax(theta0)
    rewards = env.rewards()
    stream = SplitMix64(cfg.seed.value)

    metrics, delta_inf = [], []
    for step in range(1, cfg.steps + 1):
        p = softmax(theta)
        ref = p if cfg.anchor_mode is AnchorMode.ON_POLICY else fixed_ref
        batch = sample_rollouts(env, p, cfg.rollouts_per_step, Seed(stream.next_u64()))
        out = train_step(theta, ref, batch, cfg, theta0)
        theta = theta - cfg.eta * out.grad
        p_new = softmax(theta)
        delta_inf.append(float(np.max(np.abs(np.log(p_new) - np.log(ref)))))
        metrics.append(RunMetrics(
            step=step,
            mean_reward=float(p_new @ rewards),
            grad_norm=float(np.linalg.norm(out.grad)),
            entropy=policy_entropy(p_new),
            chi2_to_ref=chi2_divergence(p_new, ref, ref),
            kl_to_ref=kl_divergence(p_new, ref),
            tv_to_ref=tv_distance(p_new, ref),
            loss=out.loss,
        ))
    return TrainResult(metrics, CategoricalPolicy(softmax(theta)), theta, delta_inf)
