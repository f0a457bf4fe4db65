"""Shared value types: outcome spaces, policies and per-outcome fields.

Every type wraps a read-only float64 vector and supports ``np.asarray``,
so the numerical routines elsewhere in the package accept either these
types or plain array-likes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_SUM_TOL = 1e-12


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    arr.setflags(write=False)
    return arr


class _Field:
    """Mixin giving array-like behaviour to single-vector dataclasses."""

    __slots__ = ()
    _attr = ""

    def __array__(self, dtype=None, copy=None):
        arr = getattr(self, self._attr)
        return arr if dtype is None else arr.astype(dtype)

    def __len__(self):
        return len(getattr(self, self._attr))

    def __getitem__(self, idx):
        return getattr(self, self._attr)[idx]

    def __eq__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return np.array_equal(np.asarray(self), np.asarray(other))

    __hash__ = None


@dataclass(frozen=True)
class OutcomeSpace:
    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise ValueError(f"outcome space needs at least 2 outcomes, got {self.size}")


@dataclass(frozen=True, eq=False)
class CategoricalPolicy(_Field):
    """Normalized probability vector over a finite outcome space."""

    probs: np.ndarray
    _attr = "probs"

    def __post_init__(self):
        p = _frozen(self.probs, "probs")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {p.sum():.17g}, not 1")
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, size: int) -> CategoricalPolicy:
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def one_hot(cls, size: int, index: int) -> CategoricalPolicy:
        p = np.zeros(size)
        p[index] = 1.0
        return cls(p)

    @property
    def space(self) -> OutcomeSpace:
        return OutcomeSpace(self.probs.size)

    @property
    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0))


@dataclass(frozen=True, eq=False)
class PolicyLogits(_Field):
    logits: np.ndarray
    _attr = "logits"

    def __post_init__(self):
        z = _frozen(self.logits, "logits")
        if not np.all(np.isfinite(z)):
            raise ValueError("logits must be finite")
        object.__setattr__(self, "logits", z)

    def policy(self) -> CategoricalPolicy:
        return CategoricalPolicy(softmax(self.logits))


@dataclass(frozen=True, eq=False)
class RatioField(_Field):
    """Centered ratio v = pi/pi_ref - 1. Free-standing fields may be any finite vector."""

    v: np.ndarray
    _attr = "v"

    def __post_init__(self):
        object.__setattr__(self, "v", _frozen(self.v, "v"))

    @property
    def t(self) -> np.ndarray:
        return self.v + 1.0


@dataclass(frozen=True, eq=False)
class LogRatioField(_Field):
    delta: np.ndarray
    _attr = "delta"

    def __post_init__(self):
        d = _frozen(self.delta, "delta")
        if not np.all(np.isfinite(d)):
            raise ValueError("log-ratio must be finite")
        object.__setattr__(self, "delta", d)

    def to_ratio(self) -> RatioField:
        return RatioField(np.expm1(self.delta))


@dataclass(frozen=True, eq=False)
class AdvantageField(_Field):
    a: np.ndarray
    _attr = "a"

    def __post_init__(self):
        object.__setattr__(self, "a", _frozen(self.a, "a"))


@dataclass(frozen=True, eq=False)
class WeightField(_Field):
    omega: np.ndarray
    _attr = "omega"

    def __post_init__(self):
        w = _frozen(self.omega, "omega")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "omega", w)


@dataclass(frozen=True)
class RunMetrics:
    step: int
    mean_reward: float
    grad_norm: float
    entropy: float
    chi2_to_ref: float
    kl_to_ref: float
    tv_to_ref: float
    loss: float

    FIELDS = ("step", "mean_reward", "grad_norm", "entropy",
              "chi2_to_ref", "kl_to_ref", "tv_to_ref", "loss")

    def as_row(self) -> tuple:
        return tuple(getattr(self, f) for f in self.FIELDS)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


def as_probs(policy) -> np.ndarray:
    if isinstance(policy, CategoricalPolicy):
        return policy.probs
    return CategoricalPolicy(policy).probs


def as_reference(policy) -> np.ndarray:
    p = as_probs(policy)
    if np.any(p <= 0):
        raise ValueError("reference policy must be strictly positive")
    return p


def _check_same_space(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")


def ratio_from_policies(pi, pi_ref) -> RatioField:
    p, q = as_probs(pi), as_reference(pi_ref)
    _check_same_space(p, q)
    return RatioField(p / q - 1.0)


def log_ratio_from_policies(pi, pi_ref) -> LogRatioField:
    p, q = as_probs(pi), as_reference(pi_ref)
    _check_same_space(p, q)
    if np.any(p <= 0):
        raise ValueError("log-ratio needs a strictly positive policy")
    return LogRatioField(np.log(p) - np.log(q))


def policy_entropy(pi) -> float:
    """Shannon entropy in nats with 0 log 0 = 0."""
    p = as_probs(pi)
    nz = p[p > 0]
    return float(max(0.0, -np.sum(nz * np.log(nz))))
