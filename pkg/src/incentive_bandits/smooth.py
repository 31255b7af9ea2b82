"""Stochastic (Lipschitz) choice models and grid discretizations.

A smooth model maps an incentive vector to a distribution over arms, with the
total-variation response bounded by L times the max-norm change in incentives.
Includes the piecewise hard-instance family with a triangular bonus on one
designated interval, the Gaussian-noise greedy model, and a logit convenience
model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtr

from .core import IncentiveMode, IncentiveVector
from .greedy_single import Menu, MenuTag

DIST_TOL = 1e-9
QUAD_TOL = 1e-9
RENORM_TOL = 1e-7
GRID_CAP = 10 ** 6


class CapExceededError(ValueError):
    """A grid size cap was exceeded."""


@dataclass(frozen=True, eq=False)
class SmoothChoiceModel:
    """A probabilistic response contract: incentive -> distribution over arms.

    lipschitz_constant certifies sum_i |Pr[i | pi] - Pr[i | pi']| <= L * max-norm
    distance; audit_boundaries lists coordinate values where the response rule
    changes branch, so audits can probe straddling pairs.
    """

    n_arms: int
    lipschitz_constant: float
    kind: str
    mode: IncentiveMode
    prob_fn: Callable[[np.ndarray], np.ndarray]
    audit_boundaries: tuple[float, ...] = ()

    def probabilities(self, pi) -> np.ndarray:
        vals = pi.values if isinstance(pi, IncentiveVector) else np.asarray(pi, dtype=float)
        if vals.shape != (self.n_arms,):
            raise ValueError("incentive length must match the number of arms")
        p = np.asarray(self.prob_fn(vals), dtype=float)
        if p.shape != (self.n_arms,) or p.min() < -DIST_TOL or abs(p.sum() - 1.0) > DIST_TOL:
            raise AssertionError("model returned an invalid distribution")
        return p


@dataclass(frozen=True)
class SmoothHardInstanceParams:
    """Parameters of one hard-instance type: a designated (arm, interval) pair.

    The response puts a triangular bonus on arm `arm` while its incentive lies
    in [interval * eps, (interval + 1) * eps]; the interval sits inside [0, 1/2].
    """

    arm: int
    interval: int
    eps: float
    lipschitz: float
    n_arms: int

    def __post_init__(self):
        if self.n_arms < 2:
            raise ValueError("need at least two arms")
        if not 0 <= self.arm < self.n_arms - 1:
            raise ValueError("designated arm must be one of the first N-1 arms")
        if self.lipschitz < 3:
            raise ValueError("Lipschitz constant must be at least 3")
        if self.eps <= 0 or self.interval < 0:
            raise ValueError("eps must be positive and the interval index nonnegative")
        if (self.interval + 1) * self.eps > 0.5 + 1e-12:
            raise ValueError("the designated interval must fit inside [0, 1/2]")
        peak = (self.lipschitz - 1.0) * self.eps / 8.0
        n = self.n_arms
        if (n - 2) / (16.0 * n) + 1.0 / (8.0 * n) + peak > 1.0:
            raise ValueError("bonus peak too large for a valid distribution")


def bonus(x: float, lipschitz: float, eps: float) -> float:
    """Triangular bump (L-1)/4 * min(x, eps - x) on [0, eps]; zero at both ends."""
    if not -1e-12 <= x <= eps + 1e-12:
        raise ValueError("bonus argument must lie in [0, eps]")
    return (lipschitz - 1.0) / 4.0 * min(max(x, 0.0), max(eps - x, 0.0))


def hard_instance_probabilities(params: SmoothHardInstanceParams, pi) -> np.ndarray:
    """Response distribution of the hard-instance type at a single-arm incentive.

    Arms below the last: 1/(16N(1-x)) at incentive x <= 1/2, 1/(8N) above 1/2,
    plus the bonus on the designated arm inside its interval (which takes
    precedence on the closed interval). The last arm absorbs the remainder.
    """
    vals = pi.values if isinstance(pi, IncentiveVector) else np.asarray(pi, dtype=float)
    if isinstance(pi, IncentiveVector) and pi.mode is not IncentiveMode.SINGLE_ARM:
        raise ValueError("the hard-instance family is defined for single-arm incentives")
    if vals.shape != (params.n_arms,):
        raise ValueError("incentive length must match the number of arms")
    support = np.flatnonzero(vals)
    if support.size > 1:
        raise ValueError("the hard-instance family is defined for single-arm incentives")
    n = params.n_arms
    # every unincentivized arm sits on the flat 1/(16N) level, including the
    # designated arm at x = 0 where the bonus vanishes
    p = np.full(n, 1.0 / (16.0 * n))
    if support.size == 1:
        arm = int(support[0])
        x = float(vals[arm])
        if x >= 1.0:
            raise ValueError("hard-instance incentives must stay below 1")
        if arm < n - 1:
            lo = params.interval * params.eps
            if arm == params.arm and lo - 1e-15 <= x <= lo + params.eps + 1e-15:
                p[arm] = 1.0 / (16.0 * n * (1.0 - x)) + bonus(
                    min(max(x - lo, 0.0), params.eps), params.lipschitz, params.eps
                )
            elif x <= 0.5:
                p[arm] = 1.0 / (16.0 * n * (1.0 - x))
            else:
                p[arm] = 1.0 / (8.0 * n)
    p[n - 1] = 1.0 - p[: n - 1].sum()
    return p


def hard_instance_model(params: SmoothHardInstanceParams) -> SmoothChoiceModel:
    lo = params.interval * params.eps
    model = SmoothChoiceModel(
        n_arms=params.n_arms,
        lipschitz_constant=params.lipschitz,
        kind="hard-instance",
        mode=IncentiveMode.SINGLE_ARM,
        prob_fn=lambda vals: hard_instance_probabilities(params, vals),
        audit_boundaries=(lo, lo + params.eps / 2.0, lo + params.eps, 0.5),
    )
    object.__setattr__(model, "params", params)
    return model


def hard_instance_rewards(n_arms: int) -> np.ndarray:
    """Principal rewards used with the hard-instance family: 1 everywhere but the last arm."""
    v = np.ones(n_arms)
    v[-1] = 0.0
    return v


def expected_smooth_utility(principal_rewards, model: SmoothChoiceModel, pi) -> float:
    """Expected principal payoff sum_i Pr[i] * (v[i] - pi[i])."""
    vals = pi.values if isinstance(pi, IncentiveVector) else np.asarray(pi, dtype=float)
    p = model.probabilities(vals)
    return float(p @ (np.asarray(principal_rewards, dtype=float) - vals))


def _adaptive_gauss_legendre(f, a: float, b: float, tol: float) -> float:
    """Panel-splitting Gauss-Legendre quadrature with an absolute error budget."""
    nodes, weights = leggauss(20)

    def panel(lo, hi):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        return half * float(weights @ f(mid + half * nodes))

    total = 0.0
    stack = [(a, b, panel(a, b), tol)]
    depth_limit = 48
    depth = {(a, b): 0}
    while stack:
        lo, hi, whole, budget = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = panel(lo, mid), panel(mid, hi)
        if abs(left + right - whole) <= budget:
            total += left + right
            continue
        d = depth.pop((lo, hi), 0)
        if d >= depth_limit:
            raise RuntimeError("adaptive quadrature did not converge")
        depth[(lo, mid)] = d + 1
        depth[(mid, hi)] = d + 1
        stack.append((lo, mid, left, budget / 2.0))
        stack.append((mid, hi, right, budget / 2.0))
    return total


def gaussian_choice_probabilities(preference, pi, tol: float = QUAD_TOL) -> np.ndarray:
    """Arm-choice distribution when the agent adds iid standard normal noise.

    With c = preference + pi, Pr[arm i] integrates the normal density at arm
    i's score against the CDF product of all other arms, over c's range padded
    by eight standard deviations.
    """
    pref = np.asarray(preference, dtype=float)
    vals = pi.values if isinstance(pi, IncentiveVector) else np.asarray(pi, dtype=float)
    if pref.shape != vals.shape:
        raise ValueError("preference and incentive lengths must match")
    c = pref + vals
    lo, hi = float(c.min()) - 8.0, float(c.max()) + 8.0
    inv_sqrt2pi = 1.0 / np.sqrt(2.0 * np.pi)
    p = np.empty(c.size)
    for i in range(c.size):
        others = np.delete(c, i)

        def integrand(y, ci=c[i], rest=others):
            dens = inv_sqrt2pi * np.exp(-0.5 * np.square(y - ci))
            return dens * np.prod(ndtr(y[:, None] - rest[None, :]), axis=1)

        p[i] = _adaptive_gauss_legendre(integrand, lo, hi, tol)
    mass = p.sum()
    if abs(mass - 1.0) > RENORM_TOL:
        raise RuntimeError(f"quadrature mass {mass} deviates from 1 beyond the renormalization budget")
    return p / mass


def gaussian_greedy_model(preference, lipschitz: float | None = None) -> SmoothChoiceModel:
    """Gaussian-noise greedy responder; the constant defaults to 1.05x an audit estimate."""
    pref = np.asarray(preference, dtype=float)
    model = SmoothChoiceModel(
        n_arms=int(pref.size),
        lipschitz_constant=np.inf,
        kind="gaussian-greedy",
        mode=IncentiveMode.GENERAL,
        prob_fn=lambda vals: gaussian_choice_probabilities(pref, vals),
    )
    if lipschitz is None:
        audited = lipschitz_audit(model, trials=60, rng=np.random.default_rng(0))
        lipschitz = max(1.0, 1.05 * audited)
    out = SmoothChoiceModel(
        n_arms=model.n_arms,
        lipschitz_constant=float(lipschitz),
        kind="gaussian-greedy",
        mode=IncentiveMode.GENERAL,
        prob_fn=model.prob_fn,
    )
    object.__setattr__(out, "preference", pref)
    return out


def logit_model(preference, temperature: float = 1.0, lipschitz: float | None = None) -> SmoothChoiceModel:
    """Softmax responder over preference + incentive; constant set by audit when omitted."""
    pref = np.asarray(preference, dtype=float)
    if temperature <= 0:
        raise ValueError("temperature must be positive")

    def fn(vals):
        s = (pref + vals) / temperature
        w = np.exp(s - s.max())
        return w / w.sum()

    model = SmoothChoiceModel(
        n_arms=int(pref.size),
        lipschitz_constant=np.inf,
        kind="logit",
        mode=IncentiveMode.GENERAL,
        prob_fn=fn,
    )
    if lipschitz is None:
        audited = lipschitz_audit(model, trials=400, rng=np.random.default_rng(0))
        lipschitz = max(1.0, 1.05 * audited)
    out = SmoothChoiceModel(
        n_arms=model.n_arms,
        lipschitz_constant=float(lipschitz),
        kind="logit",
        mode=IncentiveMode.GENERAL,
        prob_fn=fn,
    )
    object.__setattr__(out, "preference", pref)
    object.__setattr__(out, "temperature", float(temperature))
    return out


def build_single_arm_grid(n_arms: int, eps: float) -> Menu:
    """Single-arm incentives with values 0, eps, 2 eps, ... on every arm, plus zero."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    steps = int(np.floor(1.0 / eps + 1e-9)) + 1
    items = [IncentiveVector.zero(n_arms)]
    tags = [MenuTag()]
    for arm in range(n_arms):
        for j in range(steps):
            val = (j) * eps
            if val > 1.0:
                val = 1.0
            items.append(IncentiveVector.single(n_arms, arm, val))
            tags.append(MenuTag(arm=arm))
    menu = Menu.from_items(items, tags)
    assert len(menu) <= n_arms * steps + 1
    return menu


def choose_single_resolution(n_arms: int, lipschitz: float, horizon: int) -> float:
    """Grid step N^(1/3) (2L+1)^(-2/3) T^(-1/3), clamped into (0, 1]."""
    if n_arms < 1 or horizon < 1 or lipschitz < 1:
        raise ValueError("need N, T >= 1 and L >= 1")
    eps = n_arms ** (1.0 / 3.0) * (2.0 * lipschitz + 1.0) ** (-2.0 / 3.0) * horizon ** (-1.0 / 3.0)
    return float(min(eps, 1.0))


def build_hypercube_grid(n_arms: int, eps: float, cap: int = GRID_CAP) -> Menu:
    """Centers of the ceil(1/eps)^N equal cells partitioning [0, 1]^N."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    cells = int(np.ceil(1.0 / eps - 1e-12))
    if cells ** n_arms > cap:
        raise CapExceededError(f"{cells}^{n_arms} grid cells exceed the cap {cap}")
    centers_1d = (np.arange(cells) + 0.5) / cells
    grids = np.meshgrid(*([centers_1d] * n_arms), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=1)
    items = [IncentiveVector(row, IncentiveMode.GENERAL) for row in points]
    return Menu.from_items(items, [MenuTag() for _ in items])


def choose_general_resolution(n_arms: int, lipschitz: float, horizon: int) -> float:
    """Cell side (2L+1)^(-2/(N+2)) T^(-1/(N+2)), clamped into (0, 1]."""
    if n_arms < 1 or horizon < 1 or lipschitz < 1:
        raise ValueError("need N, T >= 1 and L >= 1")
    eps = (2.0 * lipschitz + 1.0) ** (-2.0 / (n_arms + 2.0)) * horizon ** (-1.0 / (n_arms + 2.0))
    return float(min(eps, 1.0))


def _sample_incentive(model: SmoothChoiceModel, rng: np.random.Generator) -> np.ndarray:
    high = 1.0 - 1e-9 if model.kind == "hard-instance" else 1.0
    if model.mode is IncentiveMode.SINGLE_ARM:
        vals = np.zeros(model.n_arms)
        vals[rng.integers(model.n_arms)] = rng.uniform(0.0, high)
        return vals
    return rng.uniform(0.0, high, size=model.n_arms)


def lipschitz_audit(model: SmoothChoiceModel, trials: int, rng: np.random.Generator) -> float:
    """Max observed ratio of total-variation change to max-norm incentive change.

    Probes independent random pairs, small local perturbations, and pairs
    straddling each declared boundary value; the declared constant passes the
    audit when the returned ratio is at most L * (1 + 1e-6).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    worst = 0.0
    boundary_probes = []
    for b in model.audit_boundaries:
        for arm in range(model.n_arms):
            boundary_probes.append((arm, b))
    for trial in range(trials):
        if boundary_probes and trial % 3 == 2:
            arm, b = boundary_probes[(trial // 3) % len(boundary_probes)]
            delta = rng.uniform(1e-6, 1e-3)
            x = np.zeros(model.n_arms)
            y = np.zeros(model.n_arms)
            x[arm] = min(max(b - delta, 0.0), 1.0 - 1e-9)
            y[arm] = min(max(b + delta, 0.0), 1.0 - 1e-9)
        elif trial % 3 == 1:
            x = _sample_incentive(model, rng)
            y = x.copy()
            nz = np.flatnonzero(x)
            if model.mode is IncentiveMode.SINGLE_ARM and nz.size:
                arm = int(nz[0])
            else:
                arm = int(rng.integers(model.n_arms))
            scale = 10.0 ** rng.uniform(-5, -1)
            if rng.random() < 0.5:
                scale = -scale
            y[arm] = min(max(y[arm] + scale, 0.0), 1.0 - 1e-9)
        else:
            x = _sample_incentive(model, rng)
            y = _sample_incentive(model, rng)
        dist = float(np.max(np.abs(x - y)))
        if dist == 0.0:
            continue
        tv = float(np.abs(model.probabilities(x) - model.probabilities(y)).sum())
        worst = max(worst, tv / dist)
    return worst
