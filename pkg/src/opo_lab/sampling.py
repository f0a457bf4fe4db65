"""Advantages and alpha-reweighted weight fields (the sampling-geometry axis)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AdvantageField, WeightField


@dataclass(frozen=True)
class RolloutBatch:
    outcome_ids: np.ndarray
    rewards: np.ndarray
    behavior_probs: np.ndarray

    def __post_init__(self):
        ids = np.array(self.outcome_ids, dtype=np.int64).reshape(-1)
        r = np.array(self.rewards, dtype=np.float64).reshape(-1)
        b = np.array(self.behavior_probs, dtype=np.float64).reshape(-1)
        if not (ids.size == r.size == b.size):
            raise ValueError("rollout batch fields must have equal length")
        if np.any(b <= 0) or np.any(b > 1):
            raise ValueError("behavior probabilities must lie in (0, 1]")
        for name, arr in (("outcome_ids", ids), ("rewards", r), ("behavior_probs", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.outcome_ids.size

    def to_bytes(self) -> bytes:
        return self.outcome_ids.tobytes() + self.rewards.tobytes() + self.behavior_probs.tobytes()


def group_normalized_advantage(batch: RolloutBatch, scale_by_std: bool = False,
                               clip: float | None = None) -> AdvantageField:
    """A_i = R_i - mean(R) over the group.

    ``scale_by_std`` additionally divides by the group standard deviation
    (left at zero when all rewards tie). ``clip`` bounds |A_i| symmetrically.
    """
    r = batch.rewards
    if r.size == 0:
        raise ValueError("empty rollout batch")
    a = r - r.mean()
    if scale_by_std:
        sd = r.std()
        a = a / sd if sd > 0 else np.zeros_like(a)
    if clip is not None:
        if clip <= 0:
            raise ValueError("clip must be positive")
        a = np.clip(a, -clip, clip)
    return AdvantageField(a)


def alpha_weights(advantages, ratios, alpha: float) -> WeightField:
    """omega = t**alpha * A with t = v + 1 the density ratio at each sample."""
    a = np.asarray(advantages, dtype=np.float64)
    t = np.asarray(ratios, dtype=np.float64) + 1.0
    if a.shape != t.shape:
        raise ValueError(f"dimension mismatch: {a.size} vs {t.size}")
    if alpha == 0:
        return WeightField(a.copy())
    if np.any(t <= 0) and float(alpha) != int(alpha):
        raise ValueError("non-positive ratio with non-integer alpha")
    return WeightField(np.power(t, alpha) * a)


def aggregate_weights(outcome_ids, omega, size: int) -> np.ndarray:
    """Per-outcome sum of sample weights; repeated outcomes add up."""
    out = np.zeros(size)
    np.add.at(out, np.asarray(outcome_ids, dtype=np.int64), np.asarray(omega, dtype=np.float64))
    return out


def weight_diagnostics(omega) -> dict:
    w = np.asarray(omega, dtype=np.float64)
    if w.size == 0:
        return {"min": 0.0, "max": 0.0, "mean": 0.0, "l2": 0.0}
    return {
        "min": float(w.min()),
        "max": float(w.max()),
        "mean": float(w.mean()),
        "l2": float(np.linalg.norm(w)),
    }
