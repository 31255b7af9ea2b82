"""Benchmark instance generators and arrival processes.

The generators build the structured families used to stress the learners: the
three-arm linear-regret example, the sqrt(KT) family with one slightly better
zero incentive, the combinatorial block family, and the smooth bonus-interval
suite. Arrival processes produce the (hidden) agent type per round.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import DIST_TOL, GreedyInstance, IncentiveVector
from .greedy_single import Menu, MenuTag
from .smooth import (
    SmoothChoiceModel,
    SmoothHardInstanceParams,
    hard_instance_model,
)


class ArrivalProcess:
    """Produces the agent type for each round; the policy never sees it."""

    kind = "abstract"
    needs_history = False
    n_agents: int = 0
    seed: int | None = None

    def next_agent(self, t: int, history, rng: np.random.Generator) -> int:
        raise NotImplementedError


@dataclass(eq=False)
class FixedSequence(ArrivalProcess):
    """A fixed agent sequence, cycled when the horizon exceeds its length."""

    sequence: tuple[int, ...]
    n_agents: int = 0
    seed: int | None = None
    kind = "fixed"

    def __post_init__(self):
        self.sequence = tuple(int(j) for j in self.sequence)
        if not self.sequence:
            raise ValueError("sequence must be nonempty")
        if self.n_agents == 0:
            self.n_agents = max(self.sequence) + 1
        if any(not 0 <= j < self.n_agents for j in self.sequence):
            raise ValueError("agent index out of range")

    def next_agent(self, t, history, rng):
        return self.sequence[t % len(self.sequence)]


@dataclass(eq=False)
class IIDArrivals(ArrivalProcess):
    """Independent draws from a fixed distribution over agent types."""

    probs: np.ndarray
    seed: int | None = None
    kind = "iid"

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1.0) > DIST_TOL:
            raise ValueError("arrival probabilities must be nonnegative and sum to 1")
        self.probs = p
        self.n_agents = int(p.size)
        self._cum = np.cumsum(p)

    def next_agent(self, t, history, rng):
        return int(np.searchsorted(self._cum, rng.random(), side="right").clip(0, self.n_agents - 1))


@dataclass(eq=False)
class BlockSwitching(ArrivalProcess):
    """Deterministic blocks: (agent, length) entries replayed cyclically."""

    schedule: tuple[tuple[int, int], ...]
    seed: int | None = None
    kind = "block"

    def __post_init__(self):
        sched = tuple((int(a), int(n)) for a, n in self.schedule)
        if not sched or any(n < 1 for _, n in sched):
            raise ValueError("schedule must list (agent, positive length) blocks")
        self.schedule = sched
        self.n_agents = max(a for a, _ in sched) + 1
        seq = []
        for agent, length in sched:
            seq.extend([agent] * length)
        self._expanded = tuple(seq)

    def next_agent(self, t, history, rng):
        return self._expanded[t % len(self._expanded)]


@dataclass(eq=False)
class AdaptiveArrivals(ArrivalProcess):
    """Adversary scripted as a callback: history of (incentive values, arm) -> agent."""

    callback: Callable[[Sequence[tuple[np.ndarray, int]]], int]
    n_agents: int = 1
    seed: int | None = None
    kind = "adaptive"
    needs_history = True

    def next_agent(self, t, history, rng):
        agent = int(self.callback(history))
        if not 0 <= agent < self.n_agents:
            raise ValueError("adaptive callback returned an out-of-range agent")
        return agent


def example_3_2(delta: float) -> tuple[GreedyInstance, ArrivalProcess]:
    """Three arms, two agent types, a unique optimal incentive at exactly delta.

    Agent 1 ties between arms 1 and 3 at incentive delta on arm 1 and favors
    arm 1; agent 2 ties between arms 1 and 2 and favors arm 2. Arrivals are
    iid with probabilities (0.4, 0.6).
    """
    if not 0.7 <= delta <= 0.71:
        raise ValueError("delta must lie in [0.7, 0.71]")
    v = np.array([1.0, 0.5, 0.0])
    mu = np.array([
        [0.2, 0.0, 0.2 + delta],
        [0.2, 0.2 + delta, 0.0],
    ])
    tie = np.array([
        [3, 2, 1],  # agent 1 ranks arm 1 above arm 3
        [2, 3, 1],  # agent 2 ranks arm 2 above arm 1
    ])
    instance = GreedyInstance(v, mu, tie)
    return instance, IIDArrivals(np.array([0.4, 0.6]))


@dataclass(eq=False)
class HardB1:
    """K-1 near-indistinguishable menu incentives; the zero incentive wins by eps/6.

    perturbed_probs[z] shifts arrival mass so menu item z (0-based, z >= 1)
    gains exactly 2 * gap in expected utility while every other item keeps its
    base value.
    """

    instance: GreedyInstance
    menu: Menu
    base_probs: np.ndarray
    perturbed_probs: dict[int, np.ndarray]
    epsilon: float
    gap: float
    utilities: np.ndarray  # analytic expected utility per menu item under base_probs

    def perturbed_utilities(self, z: int) -> np.ndarray:
        out = self.utilities.copy()
        out[z] += 2.0 * self.gap
        return out


def hard_b1(n_agents: int, n_arms: int, horizon: int) -> HardB1:
    """Build the sqrt(KT)-style family for K agent types, N arms, horizon T."""
    k, n, t = n_agents, n_arms, horizon
    if k < 3 or n < 3:
        raise ValueError("need at least three agent types and three arms")
    if t <= max(4 * (k - 2) ** 3, 10 * (k - 2)):
        raise ValueError("horizon too small: need T > max(4(K-2)^3, 10(K-2))")
    eps = math.sqrt((k - 2) / (10.0 * t))
    # betas[i - 2] covers the 1-based agents i = 2..K-1.
    shares = np.array([5.0 / 6.0 - (i - 2) / (3.0 * (k - 2)) for i in range(2, k)])
    betas = 1.0 / (3.0 * shares) - 1.0 / 3.0

    v = np.zeros(n)
    v[0] = 2.0 / 3.0 + eps / 3.0
    v[1] = 1.0
    mu = np.zeros((k, n))
    mu[0, 0] = 1.0 / 3.0
    mu[k - 1, 2] = 1.0
    for idx, beta in enumerate(betas):
        mu[idx + 1, 1] = 1.0 / 3.0
        mu[idx + 1, 2] = 1.0 - beta
    tie = np.tile(np.arange(n, 0, -1), (k, 1))  # smallest arm index wins ties
    instance = GreedyInstance(v, mu, tie)

    items = [IncentiveVector.zero(n)]
    tags = [MenuTag()]
    for idx, beta in enumerate(betas):
        items.append(IncentiveVector.single(n, 1, 2.0 / 3.0 - beta))
        tags.append(MenuTag(arm=1, agent=idx + 1))
    menu = Menu.from_items(items, tags)

    p = np.zeros(k)
    p[0] = 0.5
    p[1:k - 1] = 1.0 / (3.0 * (k - 2))
    p[k - 1] = 1.0 / 6.0

    utilities = np.empty(k - 1)
    utilities[0] = v[0] * p[0]
    utilities[1:] = shares * (1.0 / 3.0 + betas)
    gap = eps / 6.0
    if abs(utilities[0] - (1.0 / 3.0 + eps / 6.0)) > 1e-12 or np.any(np.abs(utilities[1:] - 1.0 / 3.0) > 1e-12):
        raise AssertionError("analytic utilities deviate from their closed forms")

    perturbed: dict[int, np.ndarray] = {}
    for z in range(1, k - 1):  # menu item index; 1-based agent z + 1
        shift = eps * shares[z - 1]
        q = p.copy()
        if z >= 2:
            q[z - 1] -= shift
            q[z] += shift
        else:
            q[1] += shift
            q[k - 1] -= shift
        if np.any(q < 0) or abs(q.sum() - 1.0) > DIST_TOL:
            raise AssertionError("perturbed arrival distribution is invalid")
        perturbed[z] = q

    return HardB1(instance, menu, p, perturbed, eps, gap, utilities)


@dataclass(eq=False)
class HardB2:
    """Combinatorial family: arms indexed by one-hot block patterns.

    Agents 0..K0-1 correspond to pattern coordinates; the last two agents pin
    the shared fallback arm. agent_distribution(x) tilts coordinate j's mass
    up by eps/M exactly when x[j] = 1.
    """

    instance: GreedyInstance
    menu: Menu
    patterns: tuple[tuple[int, ...], ...]  # the set X, in arm order
    block_size: int
    n_blocks: int
    n_base_arms: int  # N0
    offsets: tuple[int, ...]
    epsilon: float

    @property
    def k0(self) -> int:
        return self.block_size * self.n_blocks

    def arm_of(self, pattern) -> int:
        """Radix index of a pattern: block 1 is the most significant digit."""
        choices = []
        for b in range(self.n_blocks):
            block = pattern[self.offsets[b]: self.offsets[b] + self.block_size]
            ones = [i for i, bit in enumerate(block) if bit]
            if len(ones) != 1:
                raise ValueError("pattern must have exactly one active bit per block")
            choices.append(ones[0])
        idx = 0
        for c in choices:
            idx = idx * self.block_size + c
        return idx

    def agent_distribution(self, pattern) -> np.ndarray:
        x = np.asarray(pattern)
        k = self.instance.n_agents
        m = self.n_blocks
        p = np.empty(k)
        p[: self.k0] = 1.0 / (2.0 * self.k0) + x * (self.epsilon / m)
        p[k - 2] = 0.25
        p[k - 1] = 0.25 - (self.epsilon / m) * x.sum()
        if np.any(p < 0) or abs(p.sum() - 1.0) > DIST_TOL:
            raise AssertionError("pattern distribution is invalid")
        return p

    def expected_utility(self, pattern, z_pattern) -> float:
        """Analytic value of playing the incentive of z against arrivals from x."""
        x = np.asarray(pattern)
        z = np.asarray(z_pattern)
        overlap = int(np.sum((x == 1) & (z == 1)))
        m, k0 = self.n_blocks, self.k0
        return 1.0 / 8.0 + m / (4.0 * k0) + self.epsilon / (2.0 * m) * overlap


def hard_b2(n_agents: int, n_arms: int, horizon: int, epsilon: float | None = None) -> HardB2:
    """Build the block family for K agents and N arms; requires N = (K-2)^M + 1."""
    k, n, t = n_agents, n_arms, horizon
    if k < 6:
        raise ValueError("need at least six agent types")
    k0 = k - 2
    if n < 3:
        raise ValueError("need at least three arms")
    m_real = math.log(n - 1) / math.log(k0)
    m = round(m_real)
    if m < 1 or k0 ** m != n - 1:
        raise ValueError("N - 1 must be an integral power of K - 2")
    if k0 % m != 0:
        raise ValueError("K - 2 must be divisible by the number of blocks")
    block = k0 // m
    n0 = block ** m + 1
    offsets = tuple(b * block for b in range(m))
    if epsilon is None:
        epsilon = math.sqrt(m * k0 / t) / 5.0
    if epsilon <= 0 or epsilon > 0.25:
        raise ValueError("epsilon must lie in (0, 0.25] for valid distributions")

    # X: one active bit per block, enumerated with block 1 most significant.
    patterns = []
    for choices in itertools.product(range(block), repeat=m):
        bits = [0] * k0
        for b, c in enumerate(choices):
            bits[offsets[b] + c] = 1
        patterns.append(tuple(bits))

    inv_t = 1.0 / t
    v = np.zeros(n)
    v[: n0 - 1] = 0.5 + inv_t
    mu = np.zeros((k, n))
    for arm, x in enumerate(patterns):
        for j in range(k0):
            if x[j]:
                mu[j, arm] = 1.0 - inv_t
    mu[:k0, n0 - 1] = 1.0
    mu[k - 2, n0 - 1] = inv_t
    mu[k - 1, n0 - 1] = 1.0
    tie = np.tile(np.arange(n, 0, -1), (k, 1))  # low arm index first, so base arms beat the fallback
    instance = GreedyInstance(v, mu, tie)

    items = []
    tags = []
    for arm in range(len(patterns)):
        items.append(IncentiveVector.single(n, arm, inv_t))
        tags.append(MenuTag(arm=arm))
    menu = Menu.from_items(items, tags)

    return HardB2(
        instance=instance,
        menu=menu,
        patterns=tuple(patterns),
        block_size=block,
        n_blocks=m,
        n_base_arms=n0,
        offsets=offsets,
        epsilon=float(epsilon),
    )


def smooth_hard_suite(
    n_arms: int, lipschitz: float, horizon: int
) -> list[tuple[SmoothChoiceModel, ArrivalProcess]]:
    """One bonus-interval model per (designated arm, interval), with constant arrivals."""
    if n_arms < 2 or lipschitz < 3 or horizon < 1:
        raise ValueError("need N >= 2, L >= 3, T >= 1")
    eps = (lipschitz - 1.0) ** (-2.0 / 3.0) * n_arms ** (1.0 / 3.0) * horizon ** (-1.0 / 3.0)
    n_intervals = int(math.floor(1.0 / (2.0 * eps) + 1e-12))
    if n_intervals < 1:
        raise ValueError("horizon too small: no interval fits inside [0, 1/2]")
    suite = []
    for arm in range(n_arms - 1):
        for j in range(n_intervals):
            params = SmoothHardInstanceParams(
                arm=arm, interval=j, eps=eps, lipschitz=lipschitz, n_arms=n_arms
            )
            suite.append((hard_instance_model(params), FixedSequence((0,), n_agents=1)))
    return suite


def random_instance(rng: np.random.Generator, n_arms: int, n_agents: int) -> GreedyInstance:
    """Uniformly random rewards, preferences, and tie priorities."""
    v = rng.uniform(0.0, 1.0, size=n_arms)
    mu = rng.uniform(0.0, 1.0, size=(n_agents, n_arms))
    tie = np.stack([rng.permutation(n_arms) + 1 for _ in range(n_agents)])
    return GreedyInstance(v, mu, tie)
