"""Mirror maps, Bregman divergences and the divergence calculators.

The chi-square divergence carries a factor 1/2 throughout, so that the
Euclidean potential of a policy's ratio field equals its chi-square
divergence from the reference. Classical Pearson chi-square is twice this.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import CategoricalPolicy, as_probs, as_reference, _check_same_space


class MirrorKind(enum.Enum):
    EUCLIDEAN_RATIO = "euclidean_ratio"
    NEGATIVE_ENTROPY = "negative_entropy"


@dataclass(frozen=True)
class MirrorMap:
    kind: MirrorKind
    reference: CategoricalPolicy

    def __post_init__(self):
        ref = self.reference
        if not isinstance(ref, CategoricalPolicy):
            ref = CategoricalPolicy(ref)
            object.__setattr__(self, "reference", ref)
        if not ref.is_strictly_positive:
            raise ValueError("mirror map reference must be strictly positive")


@dataclass(frozen=True)
class TrustRegion:
    """Stiffness ``mu`` (= 1/eta) of the penalized form, or chi-square radius ``epsilon``."""

    mu: float | None = None
    epsilon: float | None = None

    def __post_init__(self):
        if (self.mu is None) == (self.epsilon is None):
            raise ValueError("exactly one of mu and epsilon must be given")
        value = self.mu if self.mu is not None else self.epsilon
        if not value > 0:
            raise ValueError("trust region parameter must be positive")

    @property
    def eta(self) -> float | None:
        return None if self.mu is None else 1.0 / self.mu


def potential(mirror: MirrorMap, v) -> float:
    ref = mirror.reference.probs
    v = np.asarray(v, dtype=np.float64)
    _check_same_space(ref, v)
    if mirror.kind is MirrorKind.EUCLIDEAN_RATIO:
        return float(0.5 * np.sum(ref * v**2))
    t = 1.0 + v
    if np.any(t <= 0):
        raise ValueError("negative-entropy potential needs v > -1")
    return float(np.sum(ref * t * np.log(t)))


def bregman(mirror: MirrorMap, pi, pi_k) -> float:
    """Bregman divergence D(pi || pi_k) of the mirror map, in ratio coordinates."""
    ref = mirror.reference.probs
    p, pk = as_probs(pi), as_probs(pi_k)
    _check_same_space(p, ref)
    _check_same_space(pk, ref)
    if mirror.kind is MirrorKind.EUCLIDEAN_RATIO:
        return chi2_divergence(p, pk, ref)
    # D(t, s) = E_ref[t log(t/s) - t + s]; with both normalized this is KL(pi || pi_k).
    mask = p > 0
    if np.any(pk[mask] <= 0):
        return float("inf")
    return float(np.sum(p[mask] * np.log(p[mask] / pk[mask])))


def chi2_divergence(pi, pi_k, ref) -> float:
    q = as_reference(ref)
    p, pk = as_probs(pi), as_probs(pi_k)
    _check_same_space(p, q)
    _check_same_space(pk, q)
    diff = (p - pk) / q
    return float(0.5 * np.sum(q * diff**2))


def kl_divergence(pi, pi_ref) -> float:
    p, q = as_probs(pi), as_reference(pi_ref)
    _check_same_space(p, q)
    mask = p > 0
    return float(max(0.0, np.sum(p[mask] * np.log(p[mask] / q[mask]))))


def tv_distance(pi, pi_ref) -> float:
    p, q = as_probs(pi), as_probs(pi_ref)
    _check_same_space(p, q)
    return float(min(1.0, 0.5 * np.sum(np.abs(p - q))))


def tv_chi2_bound_gap(pi, pi_ref) -> float:
    """Slack in TV(pi, pi_ref) <= sqrt(E_ref[v^2]) / 2; non-negative by Jensen."""
    p, q = as_probs(pi), as_reference(pi_ref)
    _check_same_space(p, q)
    v = p / q - 1.0
    tv = 0.5 * np.sum(q * np.abs(v))
    return float(0.5 * np.sqrt(np.sum(q * v**2)) - tv)
