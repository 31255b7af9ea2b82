"""Finite single-arm incentive menus for the greedy choice model.

The raw menu contains, for every (arm, agent) pair, the cheapest incentive
that makes the agent switch to that arm, plus the zero vector. A tie-robust
variant shifts every menu value up by a small epsilon so that no agent is ever
exactly indifferent at a menu point. The response-signature reduction keeps
only the most profitable item per induced response pattern.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    GreedyInstance,
    IncentiveMode,
    IncentiveVector,
    greedy_best_response,
    utility,
)

DEDUP_TOL = 1e-15


def _dedup_keep_mask(rows) -> list[bool]:
    """Keep-first duplicate mask at DEDUP_TOL, linear-time via exact keys plus
    a lexicographic-neighbor pass for near-coincident values."""
    keep = [True] * len(rows)
    seen: dict[bytes, int] = {}
    for i, row in enumerate(rows):
        key = row.tobytes()
        if key in seen:
            keep[i] = False
        else:
            seen[key] = i
    survivors = [i for i, k in enumerate(keep) if k]
    if len(survivors) > 1:
        arrs = np.stack([rows[i] for i in survivors])
        order = np.lexsort(arrs.T[::-1])
        prev = order[0]
        for cur in order[1:]:
            if np.max(np.abs(arrs[cur] - arrs[prev])) <= DEDUP_TOL:
                late = max(cur, prev, key=lambda idx: survivors[idx])
                keep[survivors[late]] = False
                prev = min(cur, prev, key=lambda idx: survivors[idx])
            else:
                prev = cur
    return keep


@dataclass(frozen=True)
class MenuTag:
    """Traceability for a menu item: which (arm, agent) pair produced it.

    agent is None for the zero vector and for items not tied to a specific
    agent (shifted zero values, grid points). profile records the response
    profile for items produced by the general-incentive construction.
    """

    arm: int | None = None
    agent: int | None = None
    perturbed: bool = False
    profile: tuple[int, ...] | None = None


@dataclass(eq=False)
class Menu:
    """An ordered, duplicate-free set of incentive vectors with provenance tags."""

    items: list[IncentiveVector]
    tags: list[MenuTag] = field(default_factory=list)

    def __post_init__(self):
        if not self.tags:
            self.tags = [MenuTag() for _ in self.items]
        if len(self.tags) != len(self.items):
            raise ValueError("one tag per menu item required")
        if self.items:
            n = self.items[0].n_arms
            mode = self.items[0].mode
            for it in self.items:
                if it.n_arms != n or it.mode is not mode:
                    raise ValueError("menu items must share arm count and mode")
        if len(self.items) > 1:
            arrs = self.arrays()
            ordered = arrs[np.lexsort(arrs.T[::-1])]
            if np.min(np.max(np.abs(np.diff(ordered, axis=0)), axis=1)) <= DEDUP_TOL:
                raise ValueError("duplicate menu items (within 1e-15)")

    @classmethod
    def from_items(cls, items, tags) -> "Menu":
        """Build a menu, dropping items within DEDUP_TOL of an earlier item."""
        items = list(items)
        tags = list(tags)
        keep = _dedup_keep_mask([it.values for it in items])
        return cls(
            [it for it, k in zip(items, keep) if k],
            [tag for tag, k in zip(tags, keep) if k],
        )

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __getitem__(self, idx) -> IncentiveVector:
        return self.items[idx]

    @property
    def mode(self) -> IncentiveMode:
        return self.items[0].mode if self.items else IncentiveMode.SINGLE_ARM

    def arrays(self) -> np.ndarray:
        """Item values stacked into an (M, N) array."""
        if not self.items:
            return np.zeros((0, 0))
        return np.stack([it.values for it in self.items])


def _required_value(instance: GreedyInstance, arm: int, agent: int) -> float:
    """Minimum incentive on `arm` that lets `agent` reach its top preference score there."""
    mu = instance.preferences[agent]
    return float(mu.max() - mu[arm])


def build_raw_menu(instance: GreedyInstance) -> Menu:
    """All cheapest switch incentives, one per (arm, agent), plus the zero vector."""
    n, k = instance.n_arms, instance.n_agents
    items = [IncentiveVector.zero(n)]
    tags = [MenuTag()]
    for arm in range(n):
        for agent in range(k):
            val = _required_value(instance, arm, agent)
            items.append(IncentiveVector.single(n, arm, val))
            tags.append(MenuTag(arm=arm, agent=agent))
    menu = Menu.from_items(items, tags)
    assert len(menu) <= n * k + 1
    return menu


def tie_gap(instance: GreedyInstance) -> float:
    """Smallest gap between distinct per-arm menu values, inf when all values coincide."""
    gap = np.inf
    for arm in range(instance.n_arms):
        vals = sorted({_required_value(instance, arm, agent) for agent in range(instance.n_agents)})
        for lo, hi in zip(vals, vals[1:]):
            gap = min(gap, hi - lo)
    return gap


def perturbation_size(instance: GreedyInstance, horizon: int) -> float:
    """Shift epsilon_T = min(gap / 2, 1 / (2 T)) used by the tie-robust menu."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    return min(tie_gap(instance) / 2.0, 1.0 / (2.0 * horizon))


def perturb_menu(instance: GreedyInstance, menu: Menu, horizon: int) -> Menu:
    """Tie-robust menu: the input plus every menu value (and zero) shifted up by epsilon_T.

    Shifted values exceeding 1 are dropped; they can never improve utility.
    """
    n, k = instance.n_arms, instance.n_agents
    eps = perturbation_size(instance, horizon)
    items = list(menu.items)
    tags = list(menu.tags)
    for arm in range(n):
        for agent in range(k + 1):
            base = _required_value(instance, arm, agent) if agent < k else 0.0
            val = base + eps
            if val > 1.0:
                continue
            items.append(IncentiveVector.single(n, arm, val))
            tags.append(MenuTag(arm=arm, agent=agent if agent < k else None, perturbed=True))
    out = Menu.from_items(items, tags)
    assert len(out) <= 2 * n * (k + 1) + 1
    return out


def response_signature(instance: GreedyInstance, pi) -> np.ndarray:
    """Bit per agent: 1 when the agent's best response is the incentivized arm.

    Undefined (rejected) for the zero vector.
    """
    vec = pi if isinstance(pi, IncentiveVector) else IncentiveVector(
        np.asarray(pi, dtype=float), IncentiveMode.SINGLE_ARM
    )
    if vec.mode is not IncentiveMode.SINGLE_ARM:
        raise ValueError("response signatures are defined for single-arm incentives")
    arm = vec.support
    if arm is None:
        raise ValueError("response signature is undefined at the zero incentive")
    return np.array(
        [greedy_best_response(instance, j, vec) == arm for j in range(instance.n_agents)],
        dtype=bool,
    )


def reduce_menu(instance: GreedyInstance, menu: Menu) -> Menu:
    """Keep one item per response signature: the one maximizing v[arm] - pi[arm].

    Ties inside a group go to the lowest arm index, then the lowest value. The
    zero vector, whose signature is undefined, is kept as is. Every discarded
    item is weakly dominated per-agent by the kept one.
    """
    if menu.mode is not IncentiveMode.SINGLE_ARM:
        raise ValueError("only single-arm menus can be signature-reduced")
    groups: dict[bytes, list[int]] = {}
    zero_idx = None
    for idx, item in enumerate(menu.items):
        if item.is_zero:
            zero_idx = idx if zero_idx is None else zero_idx
            continue
        sig = response_signature(instance, item).tobytes()
        groups.setdefault(sig, []).append(idx)

    kept: list[int] = []
    for sig in groups:
        def sort_key(idx: int):
            item = menu.items[idx]
            arm = item.support
            val = float(item.values[arm])
            net = float(instance.principal_rewards[arm]) - val
            return (-net, arm, val)

        kept.append(min(groups[sig], key=sort_key))

    kept.sort(key=lambda idx: (menu.items[idx].support, float(menu.items[idx].values[menu.items[idx].support])))
    if zero_idx is not None:
        kept.insert(0, zero_idx)
    out = Menu([menu.items[i] for i in kept], [menu.tags[i] for i in kept])
    k = instance.n_agents
    assert len(out) <= min(2 * instance.n_arms * (k + 1), 2 ** k) + 1
    return out


def menu_utilities(instance: GreedyInstance, menu: Menu) -> np.ndarray:
    """(M, K) array of principal utilities, one row per menu item."""
    rows = []
    for item in menu.items:
        rows.append(
            [utility(instance, item, greedy_best_response(instance, j, item)) for j in range(instance.n_agents)]
        )
    return np.asarray(rows, dtype=float)
