"""Best-response polytopes and the general-incentive menu.

Each response profile sigma assigns one arm per agent type. The incentives
inducing sigma form a polytope cut out by the box [0,1]^N and the pairwise
preference inequalities; the menu collects a strictly-feasible point near each
vertex of every nonempty open polytope.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import GreedyInstance, IncentiveMode, IncentiveVector
from .greedy_single import Menu, MenuTag

log = logging.getLogger(__name__)

STRICT_SLACK = 1e-9
INTERIOR_SLACK = 1e-10
FEAS_TOL = 1e-9
VERTEX_DEDUP_TOL = 1e-7
COND_CAP = 1e10

DEFAULT_PROFILE_CAP = 10 ** 6
DEFAULT_DIM_CAP = 6


class CapExceededError(ValueError):
    """A combinatorial size cap was exceeded."""


@dataclass(frozen=True, eq=False)
class ResponsePolytope:
    """Halfspace description {x : normals @ x <= offsets} of a profile's closure.

    The first 2N rows are the box constraints; the remaining K(N-1) rows are
    the preference inequalities making profile[j] each agent j's best arm.
    """

    profile: tuple[int, ...]
    normals: np.ndarray
    offsets: np.ndarray
    n_box: int

    @property
    def n_dims(self) -> int:
        return self.normals.shape[1]

    def preference_rows(self) -> tuple[np.ndarray, np.ndarray]:
        return self.normals[self.n_box:], self.offsets[self.n_box:]

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        return bool(np.all(self.normals @ x <= self.offsets + tol))

    def preference_slack(self, x) -> float:
        """Smallest margin of the preference inequalities at x; +inf when there are none."""
        a, b = self.preference_rows()
        if a.shape[0] == 0:
            return np.inf
        return float(np.min(b - a @ x))


def build_polytope(instance: GreedyInstance, profile) -> ResponsePolytope:
    """Box plus preference halfspaces for the given response profile."""
    profile = tuple(int(s) for s in profile)
    n, k = instance.n_arms, instance.n_agents
    if len(profile) != k or any(not 0 <= s < n for s in profile):
        raise ValueError("profile must assign one arm per agent type")
    rows = []
    offs = []
    eye = np.eye(n)
    for i in range(n):
        rows.append(-eye[i])
        offs.append(0.0)
        rows.append(eye[i])
        offs.append(1.0)
    for j, sj in enumerate(profile):
        mu = instance.preferences[j]
        for i in range(n):
            if i == sj:
                continue
            # mu[sj] + x[sj] >= mu[i] + x[i]  <=>  x[i] - x[sj] <= mu[sj] - mu[i]
            normal = np.zeros(n)
            normal[i] = 1.0
            normal[sj] = -1.0
            rows.append(normal)
            offs.append(float(mu[sj] - mu[i]))
    return ResponsePolytope(profile, np.asarray(rows), np.asarray(offs), n_box=2 * n)


def max_slack_point(polytope: ResponsePolytope) -> tuple[np.ndarray | None, float]:
    """Point maximizing the minimum preference margin inside the box.

    Solves max s subject to (pref normal) @ x + s <= offset and 0 <= x <= 1,
    with s capped at 1 so the program stays bounded when there are no
    preference rows. Returns (None, -inf) when the closure is empty.
    """
    n = polytope.n_dims
    a_pref, b_pref = polytope.preference_rows()
    c = np.zeros(n + 1)
    c[-1] = -1.0
    if a_pref.shape[0] > 0:
        a_ub = np.hstack([a_pref, np.ones((a_pref.shape[0], 1))])
        b_ub = b_pref
    else:
        a_ub = None
        b_ub = None
    bounds = [(0.0, 1.0)] * n + [(None, 1.0)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        return None, -np.inf
    return res.x[:n], float(res.x[n])


def enumerate_profiles(instance: GreedyInstance, cap: int = DEFAULT_PROFILE_CAP) -> list[tuple[int, ...]]:
    """All profiles whose open polytope is nonempty, in lexicographic order.

    Strict feasibility is certified by a maximum preference margin above
    STRICT_SLACK; box constraints stay non-strict.
    """
    n, k = instance.n_arms, instance.n_agents
    if n ** k > cap:
        raise CapExceededError(f"N^K = {n ** k} exceeds the profile cap {cap}")
    feasible = []
    for profile in itertools.product(range(n), repeat=k):
        _, slack = max_slack_point(build_polytope(instance, profile))
        if slack > STRICT_SLACK:
            feasible.append(profile)
    return feasible


def polytope_vertices(polytope: ResponsePolytope, dim_cap: int = DEFAULT_DIM_CAP) -> np.ndarray:
    """All extreme points of the closure, via N-subsets of active constraints.

    Subsets with an ill-conditioned system (condition number above COND_CAP)
    are skipped; solutions are kept when they satisfy every halfspace within
    FEAS_TOL and deduplicated at VERTEX_DEDUP_TOL in max norm.
    """
    n = polytope.n_dims
    if n > dim_cap:
        raise CapExceededError(f"dimension {n} exceeds the vertex-enumeration cap {dim_cap}")
    m = polytope.normals.shape[0]
    found: list[np.ndarray] = []
    for subset in itertools.combinations(range(m), n):
        a = polytope.normals[list(subset)]
        b = polytope.offsets[list(subset)]
        try:
            with np.errstate(divide="ignore", invalid="ignore"):
                if not np.linalg.cond(a) <= COND_CAP:
                    log.debug("skipping ill-conditioned constraint subset %s", subset)
                    continue
            x = np.linalg.solve(a, b) + 0.0  # normalizes -0.0
        except np.linalg.LinAlgError:
            log.debug("skipping singular constraint subset %s", subset)
            continue
        if not polytope.contains(x):
            continue
        if any(np.max(np.abs(x - y)) <= VERTEX_DEDUP_TOL for y in found):
            continue
        found.append(x)
    if not found:
        return np.zeros((0, n))
    out = np.stack(found)
    return out[np.lexsort(out.T[::-1])]


def interior_shift(polytope: ResponsePolytope, vertex, eps: float) -> np.ndarray:
    """A strictly feasible point within eps (max norm) of the given vertex.

    Moves from the vertex toward the maximum-margin interior point just far
    enough to clear INTERIOR_SLACK on every preference inequality.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    vertex = np.asarray(vertex, dtype=float)
    center, slack = max_slack_point(polytope)
    if center is None or slack <= STRICT_SLACK:
        raise ValueError("open polytope is empty")
    if polytope.preference_slack(vertex) >= INTERIOR_SLACK and polytope.contains(vertex):
        return vertex.copy()
    dist = float(np.max(np.abs(center - vertex)))
    if dist == 0.0:
        return center.copy()
    t = min(1.0, eps / dist)
    point = vertex + t * (center - vertex)
    if polytope.preference_slack(point) < INTERIOR_SLACK or not polytope.contains(point):
        raise RuntimeError("interior shift failed to reach a strictly feasible point")
    return point


def build_general_menu(
    instance: GreedyInstance,
    horizon: int,
    profile_cap: int = DEFAULT_PROFILE_CAP,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> Menu:
    """Strictly feasible near-vertex representatives of every feasible profile.

    With eps = 1/horizon, the best fixed menu item trails the best incentive
    in [0,1]^N by at most 2 over any arrival sequence of length `horizon`.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    eps = 1.0 / horizon
    items: list[IncentiveVector] = []
    tags: list[MenuTag] = []
    for profile in enumerate_profiles(instance, cap=profile_cap):
        polytope = build_polytope(instance, profile)
        for vertex in polytope_vertices(polytope, dim_cap=dim_cap):
            point = interior_shift(polytope, vertex, eps)
            point = np.clip(point, 0.0, 1.0) + 0.0  # also normalizes -0.0
            items.append(IncentiveVector(point, IncentiveMode.GENERAL))
            tags.append(MenuTag(profile=profile))
    return Menu.from_items(items, tags)
