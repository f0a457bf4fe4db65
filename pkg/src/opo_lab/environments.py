"""Synthetic tasks with enumerable outcomes and exact rewards.

Sequence outcomes are indexed row-major over tokens: the first token is the
most significant digit in base ``vocab``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import OutcomeSpace, as_probs
from .sampling import RolloutBatch

MAX_OUTCOMES = 4096

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """splitmix64 stream; output k is mix(seed + (k + 1) * gamma)."""

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK

    def next_u64(self, n: int | None = None):
        count = 1 if n is None else n
        offsets = np.arange(1, count + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        with np.errstate(over="ignore"):
            out = _mix(np.uint64(self.state) + offsets)
        self.state = (self.state + count * _GAMMA) & _MASK
        return int(out[0]) if n is None else out

    def uniform(self, n: int) -> np.ndarray:
        """Doubles in [0, 1) from the top 53 bits."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class Seed:
    value: int

    def __post_init__(self):
        if not 0 <= int(self.value) <= _MASK:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "value", int(self.value))


@dataclass(frozen=True)
class BanditEnv:
    arm_rewards: tuple

    def __post_init__(self):
        r = tuple(float(x) for x in self.arm_rewards)
        if len(r) < 2:
            raise ValueError("bandit needs at least 2 arms")
        if any(not 0.0 <= x <= 1.0 for x in r):
            raise ValueError("arm rewards must lie in [0, 1]")
        object.__setattr__(self, "arm_rewards", r)

    @property
    def n_arms(self) -> int:
        return len(self.arm_rewards)

    @property
    def size(self) -> int:
        return self.n_arms

    def rewards(self) -> np.ndarray:
        return np.array(self.arm_rewards)


@dataclass(frozen=True)
class SequenceEnv:
    vocab: int
    length: int
    target_sequence: tuple

    def __post_init__(self):
        if self.vocab < 2 or self.length < 1:
            raise ValueError("sequence env needs vocab >= 2 and length >= 1")
        tgt = tuple(int(x) for x in self.target_sequence)
        if len(tgt) != self.length or any(not 0 <= x < self.vocab for x in tgt):
            raise ValueError("target sequence does not fit vocab/length")
        object.__setattr__(self, "target_sequence", tgt)

    @property
    def size(self) -> int:
        return self.vocab**self.length

    def decode(self, outcome_id: int) -> tuple:
        if not 0 <= outcome_id < self.size:
            raise IndexError(f"outcome id {outcome_id} out of range")
        tokens = []
        for _ in range(self.length):
            outcome_id, tok = divmod(outcome_id, self.vocab)
            tokens.append(tok)
        return tuple(reversed(tokens))

    def encode(self, tokens) -> int:
        idx = 0
        for tok in tokens:
            idx = idx * self.vocab + int(tok)
        return idx

    def rewards(self) -> np.ndarray:
        enumerate_outcomes(self)
        ids = np.arange(self.size)
        digits = (ids[:, None] // self.vocab ** np.arange(self.length - 1, -1, -1)) % self.vocab
        match = digits == np.array(self.target_sequence)[None, :]
        prefix = np.cumprod(match, axis=1).sum(axis=1)
        return prefix / self.length


PRESETS = {
    "bandit10": lambda: BanditEnv(tuple(np.linspace(0.05, 0.95, 10))),
    "seq4x4": lambda: SequenceEnv(4, 4, (2, 0, 3, 1)),
}


def make_env(name: str):
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(PRESETS)}") from None


def enumerate_outcomes(env) -> OutcomeSpace:
    if env.size > MAX_OUTCOMES:
        raise ValueError(f"outcome space of {env.size} exceeds the cap of {MAX_OUTCOMES}")
    return OutcomeSpace(env.size)


def reward_of(env, outcome_id: int) -> float:
    if isinstance(env, BanditEnv):
        if not 0 <= outcome_id < env.n_arms:
            raise IndexError(f"arm {outcome_id} out of range")
        return env.arm_rewards[outcome_id]
    seq = env.decode(outcome_id)
    k = 0
    while k < env.length and seq[k] == env.target_sequence[k]:
        k += 1
    return k / env.length


def sample_rollouts(env, policy, n: int, seed) -> RolloutBatch:
    """Draw ``n`` i.i.d. outcomes by inverse CDF on splitmix64 uniforms."""
    if n < 1:
        raise ValueError("need at least one rollout")
    p = as_probs(policy)
    if p.size != enumerate_outcomes(env).size:
        raise ValueError("policy does not match the environment's outcome space")
    seed = seed.value if isinstance(seed, Seed) else int(seed)
    u = SplitMix64(seed).uniform(n)
    cdf = np.cumsum(p)
    ids = np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1)
    # guard against landing on a zero-probability tail after cdf rounding
    while np.any(p[ids] == 0):
        bad = p[ids] == 0
        ids[bad] = np.flatnonzero(p)[np.searchsorted(np.flatnonzero(p), ids[bad]) - 1]
    rewards = env.rewards()[ids]
    return RolloutBatch(ids, rewards, p[ids])
