"""Shared domain types: incentive vectors, greedy instances, and best responses.

An instance has N arms and K agent types. The principal posts an incentive
vector pi in [0,1]^N, the arriving agent of type j picks the arm maximizing
mu[j, i] + pi[i] (ties resolved by a per-agent priority permutation), and the
principal collects v[arm] - pi[arm].
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

# Two scores are considered tied when they agree within this absolute tolerance.
TIE_TOL = 1e-12

DIST_TOL = 1e-12


class IncentiveMode(str, Enum):
    SINGLE_ARM = "single"
    GENERAL = "general"


def _readonly(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class IncentiveVector:
    """A payment vector over arms.

    Coordinates live in [0, 1]. In single-arm mode at most one coordinate may
    be nonzero.
    """

    values: np.ndarray
    mode: IncentiveMode = IncentiveMode.GENERAL

    def __post_init__(self):
        vals = _readonly(self.values)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("incentive values must form a nonempty 1-d sequence")
        if np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValueError("incentive coordinates must lie in [0, 1]")
        if self.mode is IncentiveMode.SINGLE_ARM and np.count_nonzero(vals) > 1:
            raise ValueError("single-arm incentive must have at most one nonzero coordinate")

    @classmethod
    def zero(cls, n_arms: int, mode: IncentiveMode = IncentiveMode.SINGLE_ARM) -> "IncentiveVector":
        return cls(np.zeros(n_arms), mode)

    @classmethod
    def single(cls, n_arms: int, arm: int, value: float) -> "IncentiveVector":
        vals = np.zeros(n_arms)
        vals[arm] = value
        return cls(vals, IncentiveMode.SINGLE_ARM)

    @property
    def n_arms(self) -> int:
        return int(self.values.size)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    @property
    def support(self) -> int | None:
        """Index of the unique nonzero coordinate, or None for the zero vector."""
        nz = np.flatnonzero(self.values)
        if nz.size == 0:
            return None
        if nz.size > 1:
            raise ValueError("support is only defined for single-arm incentives")
        return int(nz[0])

    def __repr__(self):
        return f"IncentiveVector({self.values.tolist()}, mode={self.mode.value!r})"


@dataclass(eq=False)
class GreedyInstance:
    """Rewards, preferences, and tie priorities of a deterministic-response instance.

    principal_rewards : (N,) array, the principal's per-arm reward v.
    preferences       : (K, N) array, row j is agent type j's preference vector.
    tie_priority      : (K, N) int array; row j is a permutation of 1..N giving
                        agent j's rank for each arm. Among score-tied arms the
                        one with the highest rank is chosen.
    """

    principal_rewards: np.ndarray
    preferences: np.ndarray
    tie_priority: np.ndarray

    def __post_init__(self):
        v = _readonly(self.principal_rewards)
        mu = _readonly(self.preferences)
        prio = _readonly(self.tie_priority, dtype=np.int64)
        if v.ndim != 1 or mu.ndim != 2 or prio.ndim != 2:
            raise ValueError("expected v of shape (N,), mu and tie_priority of shape (K, N)")
        n = v.size
        k = mu.shape[0]
        if n < 1 or k < 1:
            raise ValueError("instance needs at least one arm and one agent type")
        if mu.shape != (k, n) or prio.shape != (k, n):
            raise ValueError("preference and tie_priority shapes must match (K, N)")
        if np.any(v < 0.0) or np.any(v > 1.0) or np.any(mu < 0.0) or np.any(mu > 1.0):
            raise ValueError("rewards and preferences must lie in [0, 1]")
        expected = np.arange(1, n + 1)
        for j in range(k):
            if not np.array_equal(np.sort(prio[j]), expected):
                raise ValueError(f"tie_priority row {j} is not a permutation of 1..{n}")
        self.principal_rewards = v
        self.preferences = mu
        self.tie_priority = prio

    @property
    def n_arms(self) -> int:
        return int(self.principal_rewards.size)

    @property
    def n_agents(self) -> int:
        return int(self.preferences.shape[0])


def _pi_values(pi, n_arms: int) -> np.ndarray:
    vals = pi.values if isinstance(pi, IncentiveVector) else np.asarray(pi, dtype=float)
    if vals.shape != (n_arms,):
        raise ValueError(f"incentive has {vals.size} coordinates, instance has {n_arms} arms")
    return vals


def greedy_best_response(instance: GreedyInstance, agent: int, pi) -> int:
    """Arm chosen by `agent` under incentive `pi`: argmax of mu + pi, ties by priority."""
    if not 0 <= agent < instance.n_agents:
        raise ValueError(f"agent index {agent} out of range")
    vals = _pi_values(pi, instance.n_arms)
    scores = instance.preferences[agent] + vals
    tied = np.flatnonzero(scores >= scores.max() - TIE_TOL)
    return int(tied[np.argmax(instance.tie_priority[agent, tied])])


def utility(instance: GreedyInstance, pi, chosen: int) -> float:
    """Principal's payoff v[chosen] - pi[chosen]; incentives on unchosen arms are not paid."""
    if not 0 <= chosen < instance.n_arms:
        raise ValueError(f"arm index {chosen} out of range")
    vals = _pi_values(pi, instance.n_arms)
    return float(instance.principal_rewards[chosen] - vals[chosen])


def response_row(instance: GreedyInstance, pi) -> np.ndarray:
    """Best-response arm per agent type, as a (K,) int array."""
    return np.array(
        [greedy_best_response(instance, j, pi) for j in range(instance.n_agents)],
        dtype=np.int64,
    )


def utility_row(instance: GreedyInstance, pi) -> np.ndarray:
    """Principal's utility per agent type, as a (K,) float array."""
    vals = _pi_values(pi, instance.n_arms)
    arms = response_row(instance, pi)
    return instance.principal_rewards[arms] - vals[arms]


def expected_greedy_utility(instance: GreedyInstance, pi, agent_distribution) -> float:
    """Expected payoff sum_j p[j] * U(pi, j) under a distribution over agent types."""
    p = np.asarray(agent_distribution, dtype=float)
    if p.shape != (instance.n_agents,):
        raise ValueError("agent distribution length must equal the number of agent types")
    if np.any(p < 0.0) or abs(p.sum() - 1.0) > DIST_TOL:
        raise ValueError("agent distribution must be nonnegative and sum to 1")
    return float(p @ utility_row(instance, pi))
