"""OPO objective in ratio and log-ratio coordinates, plus baseline losses.

All objectives are losses (to be minimized). The alignment target of the
penalized problem, max E_ref[omega v] - (mu/2) E_ref[v^2], is negated here
and nowhere else.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import (
    PolicyLogits,
    RatioField,
    as_probs,
    as_reference,
    log_softmax,
    softmax,
    _check_same_space,
)
from .geometry import kl_divergence


class CoordinateMode(enum.Enum):
    EXACT_RATIO = "ratio"
    LOG_APPROX = "log"


@dataclass(frozen=True)
class OpoConfig:
    alpha: float = 0.6
    mu: float = 1.0
    coordinate_mode: CoordinateMode = CoordinateMode.EXACT_RATIO

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not np.isfinite(self.alpha):
            raise ValueError("alpha must be finite")


@dataclass(frozen=True)
class DpoConfig:
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


@dataclass(frozen=True)
class L2PgConfig:
    lam: float
    theta0: PolicyLogits = field(default=None)

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be non-negative")
        if self.theta0 is not None and not isinstance(self.theta0, PolicyLogits):
            object.__setattr__(self, "theta0", PolicyLogits(self.theta0))


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _check_mu(mu):
    if not mu > 0:
        raise ValueError("mu must be positive")


def _sample_indices(sample_set, size: int) -> np.ndarray:
    idx = np.unique(np.asarray(sample_set, dtype=np.int64).reshape(-1))
    if idx.size == 0:
        raise ValueError("sample set is empty")
    if idx[0] < 0 or idx[-1] >= size:
        raise IndexError("sample index out of range")
    return idx


# -- OPO ---------------------------------------------------------------------

def opo_loss_ratio(v, omega, ref, mu: float):
    """-E_ref[omega v] + (mu/2) E_ref[v^2].

    Works on complex ``v`` too, which the curvature probe relies on.
    """
    _check_mu(mu)
    q = as_reference(ref)
    v = np.asarray(v)
    w = _vec(omega)
    _check_same_space(q, w)
    if v.shape != q.shape:
        raise ValueError(f"dimension mismatch: {v.size} vs {q.size}")
    out = -np.sum(q * w * v) + 0.5 * mu * np.sum(q * v * v)
    return complex(out) if np.iscomplexobj(out) else float(out)


def opo_grad_v(v, omega, mu: float) -> RatioField:
    """Functional gradient in L2(pi_ref): -omega + mu v (no pi_ref factor)."""
    _check_mu(mu)
    v, w = _vec(v), _vec(omega)
    _check_same_space(v, w)
    return RatioField(-w + mu * v)


def opo_closed_form(omega, mu: float) -> RatioField:
    _check_mu(mu)
    return RatioField(_vec(omega) / mu)


def opo_loss_log(delta, omega, sample_set, ref, mu: float) -> float:
    """Log-ratio surrogate: -sum_{y in S} omega(y) delta(y) + (mu/2) E_ref[delta^2].

    The linear term is an unweighted sum over the distinct sampled outcomes;
    the penalty is the exact reference expectation.
    """
    _check_mu(mu)
    q = as_reference(ref)
    d, w = _vec(delta), _vec(omega)
    _check_same_space(q, d)
    _check_same_space(q, w)
    s = _sample_indices(sample_set, q.size)
    return float(-np.sum(w[s] * d[s]) + 0.5 * mu * np.sum(q * d**2))


def lagrange_dual_solve(omega, ref, epsilon: float) -> tuple[RatioField, float]:
    """Maximize E_ref[omega v] subject to E_ref[v^2] <= epsilon.

    Returns the maximizer and the multiplier mu at which the penalized
    closed form omega/mu coincides with it.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    q = as_reference(ref)
    w = _vec(omega)
    _check_same_space(q, w)
    second_moment = float(np.sum(q * w**2))
    if second_moment == 0.0:
        raise ValueError("omega is identically zero on the reference support; maximizer is not unique")
    mu = float(np.sqrt(second_moment / epsilon))
    return opo_closed_form(w, mu), mu


# -- DPO ---------------------------------------------------------------------

def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def _sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(_log_sigmoid(x))


def dpo_logistic_loss(margin, beta: float):
    """-log sigmoid(beta * margin); ``margin`` is the beta-free logit margin."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    out = -_log_sigmoid(beta * np.asarray(margin, dtype=np.float64))
    return float(out) if np.ndim(out) == 0 else out


def dpo_margin_grad(margin, beta: float):
    """Saturating gradient magnitude beta * sigmoid(m) * (1 - sigmoid(m)).

    ``margin`` is taken in the already-scaled units of the logistic argument,
    so the profile peaks at beta/4 for m = 0 whatever beta is, and beta only
    scales it.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    m = np.asarray(margin, dtype=np.float64)
    out = beta * _sigmoid(m) * _sigmoid(-m)
    return float(out) if np.ndim(out) == 0 else out


def dpo_local_curvature(margin, beta: float):
    m = np.asarray(margin, dtype=np.float64)
    out = beta**2 * _sigmoid(m) * _sigmoid(-m)
    return float(out) if np.ndim(out) == 0 else out


# -- policy-gradient baselines -------------------------------------------------

def _aggregate(advantages, sample_set, size: int) -> np.ndarray:
    """Per-outcome sum of advantages over a (possibly repeated) sample list."""
    ids = np.asarray(sample_set, dtype=np.int64).reshape(-1)
    a = _vec(advantages)
    if ids.size == 0:
        raise ValueError("sample set is empty")
    if a.shape != ids.shape:
        raise ValueError("advantages and sample set must align")
    if ids.min() < 0 or ids.max() >= size:
        raise IndexError("sample index out of range")
    out = np.zeros(size)
    np.add.at(out, ids, a)
    return out


def l2_pg_loss(logits, advantages, sample_set, cfg: L2PgConfig) -> float:
    """-sum_i A_i log pi(y_i) + (lambda/2) ||theta - theta0||^2.

    ``advantages[i]`` belongs to ``sample_set[i]``.
    """
    theta = _vec(logits)
    theta0 = np.zeros_like(theta) if cfg.theta0 is None else _vec(cfg.theta0)
    _check_same_space(theta, theta0)
    agg = _aggregate(advantages, sample_set, theta.size)
    pg = -np.sum(agg * log_softmax(theta))
    return float(pg + 0.5 * cfg.lam * np.sum((theta - theta0) ** 2))


def kl_reg_pg_loss(pi, pi_ref, advantages, sample_set, beta: float) -> float:
    if beta < 0:
        raise ValueError("beta must be non-negative")
    p = as_probs(pi)
    agg = _aggregate(advantages, sample_set, p.size)
    used = agg != 0
    if np.any(p[used] <= 0):
        return float("inf")
    pg = -np.sum(agg[used] * np.log(p[used]))
    return float(pg + (beta * kl_divergence(p, pi_ref) if beta else 0.0))


# -- parameter-space gradients for softmax policies ----------------------------

def softmax_backward(probs, dlogp) -> np.ndarray:
    """Map dL/dlog pi(y) to dL/dtheta for pi = softmax(theta)."""
    p = _vec(probs)
    c = _vec(dlogp)
    return c - p * np.sum(c)


def ratio_jacobian(logits, ref) -> np.ndarray:
    """J[y, j] = d v_theta(y) / d theta_j for v = softmax(theta)/ref - 1."""
    p = softmax(logits)
    q = as_reference(ref)
    return (p / q)[:, None] * (np.eye(p.size) - p[None, :])
