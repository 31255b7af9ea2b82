"""Learning layer: utility embeddings, covering, EXP3 for linear bandits, Tsallis-INF.

A menu of M incentives embeds into R^K by listing the principal's utility
against each agent type; the round reward is then an inner product with the
arriving agent's indicator vector, which turns the interaction into an
adversarial linear bandit over M fixed vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GreedyInstance
from .greedy_single import Menu, menu_utilities

PROB_TOL = 1e-10
PINV_CUTOFF = 1e-10
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 100


@dataclass(eq=False)
class ArmEmbedding:
    """Utility vectors z of a menu: vectors[m, j] = U(menu item m, agent j)."""

    vectors: np.ndarray
    menu_indices: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        self.menu_indices = np.asarray(self.menu_indices, dtype=np.int64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != self.menu_indices.size:
            raise ValueError("vectors must be (M, K) with one menu index per row")
        if np.any(np.abs(self.vectors) > 1.0 + 1e-12):
            raise ValueError("embedded utilities must lie in [-1, 1]")

    @property
    def n_arms(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def n_dims(self) -> int:
        return int(self.vectors.shape[1])


def embed_menu(instance: GreedyInstance, menu: Menu) -> ArmEmbedding:
    """Per-item utility rows; the inner product with e_j reproduces U(item, j) exactly."""
    if len(menu) == 0:
        raise ValueError("cannot embed an empty menu")
    return ArmEmbedding(menu_utilities(instance, menu), np.arange(len(menu)))


def cover_embeddings(embedding: ArmEmbedding, tol: float) -> ArmEmbedding:
    """Greedy max-norm cover: keep a row iff it is farther than tol from all kept rows.

    Every input row then has a kept row within tol in max norm, which bounds
    the utility difference against any agent indicator by tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    kept: list[int] = []
    for m in range(embedding.n_arms):
        row = embedding.vectors[m]
        if all(np.max(np.abs(row - embedding.vectors[k])) > tol for k in kept):
            kept.append(m)
    return ArmEmbedding(embedding.vectors[kept], embedding.menu_indices[kept])


def reward_to_loss(reward: float) -> float:
    """Affine map from rewards in [-1, 1] to losses in [0, 1]."""
    return (1.0 - reward) / 2.0


def _sample_index(rng: np.random.Generator, probs: np.ndarray) -> int:
    return int(np.searchsorted(np.cumsum(probs), rng.random(), side="right").clip(0, probs.size - 1))


def _check_distribution(p: np.ndarray):
    if np.any(p < -PROB_TOL) or abs(p.sum() - 1.0) > PROB_TOL:
        raise AssertionError("sampling distribution is not a valid probability vector")


def g_optimal_design(vectors: np.ndarray, max_iter: int = 500) -> np.ndarray:
    """Frank-Wolfe design weights with max leverage at most twice the span dimension.

    Maximizes log det of the weighted second-moment matrix; falls back to the
    uniform distribution if anything goes numerically wrong.
    """
    vectors = np.asarray(vectors, dtype=float)
    m = vectors.shape[0]
    uniform = np.full(m, 1.0 / m)
    try:
        rank = np.linalg.matrix_rank(vectors, tol=PINV_CUTOFF)
        if rank < 1:
            return uniform
        lam = uniform.copy()
        for _ in range(max_iter):
            design = vectors.T @ (lam[:, None] * vectors)
            inv = np.linalg.pinv(design, hermitian=True, rcond=PINV_CUTOFF)
            leverage = np.einsum("mi,ij,mj->m", vectors, inv, vectors)
            top = int(np.argmax(leverage))
            g = leverage[top]
            if g <= 2.0 * rank or g <= 1.0:
                break
            step = (g / rank - 1.0) / (g - 1.0)
            lam *= 1.0 - step
            lam[top] += step
        if not np.all(np.isfinite(lam)) or lam.sum() <= 0:
            return uniform
        return lam / lam.sum()
    except np.linalg.LinAlgError:
        return uniform


class Exp3Linear:
    """Exponential weights over embedded arms with a least-squares reward estimator.

    Samples from (1 - gamma) * softmax(eta * S) + gamma * exploration, where S
    accumulates per-arm estimates z @ theta_hat, theta_hat being the
    pseudo-inverse solve of the round's design matrix applied to the observed
    reward. Estimates are clipped at clip (default 1/gamma) per round.
    """

    def __init__(
        self,
        embedding: ArmEmbedding,
        horizon: int,
        eta: float | None = None,
        gamma: float | None = None,
        exploration: str = "g-optimal",
        clip: float | None = None,
    ):
        if embedding.n_arms < 1:
            raise ValueError("embedding must contain at least one arm")
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        m, k = embedding.n_arms, embedding.n_dims
        self.vectors = embedding.vectors
        self.n_arms = m
        self.eta = eta if eta is not None else float(np.sqrt(2.0 * np.log(max(m, 1)) / (k * horizon)))
        self.gamma = gamma if gamma is not None else min(0.5, k * self.eta)
        if exploration == "g-optimal":
            self.exploration = g_optimal_design(self.vectors)
        elif exploration == "uniform":
            self.exploration = np.full(m, 1.0 / m)
        else:
            raise ValueError(f"unknown exploration kind {exploration!r}")
        self.clip = clip if clip is not None else (np.inf if self.gamma == 0.0 else 1.0 / self.gamma)
        self.cum_estimates = np.zeros(m)
        self._last_probs: np.ndarray | None = None

    def probabilities(self) -> np.ndarray:
        shifted = self.eta * (self.cum_estimates - self.cum_estimates.max())
        q = np.exp(shifted)
        q /= q.sum()
        p = (1.0 - self.gamma) * q + self.gamma * self.exploration
        _check_distribution(p)
        return p

    def select(self, rng: np.random.Generator) -> int:
        p = self.probabilities()
        self._last_probs = p
        return _sample_index(rng, p)

    def update(self, arm: int, reward: float):
        if not -1.0 - 1e-12 <= reward <= 1.0 + 1e-12:
            raise ValueError("reward must lie in [-1, 1]")
        p = self._last_probs if self._last_probs is not None else self.probabilities()
        design = self.vectors.T @ (p[:, None] * self.vectors)
        theta = np.linalg.pinv(design, hermitian=True, rcond=PINV_CUTOFF) @ self.vectors[arm] * reward
        estimates = np.clip(self.vectors @ theta, -self.clip, self.clip)
        self.cum_estimates += estimates
        self._last_probs = None

    def observe(self, index: int, arm: int, reward: float):
        """Harness adapter; the agent's chosen arm carries no extra signal here."""
        self.update(index, reward)


def _tsallis_weights(losses: np.ndarray, eta: float, z0: float | None = None):
    """Solve for the normalizer z with sum_m 4 / (eta (L_m - z))^2 = 1.

    Newton iteration from below with a bisection fallback; raises when the
    residual cannot be brought under NEWTON_TOL.
    """
    lmin = float(losses.min())
    m = losses.size
    z = z0 if z0 is not None and z0 < lmin else lmin - 2.0 * np.sqrt(m) / eta

    def weights(x):
        return 4.0 / np.square(eta * (losses - x))

    for _ in range(NEWTON_MAX_ITER):
        w = weights(z)
        resid = w.sum() - 1.0
        if abs(resid) < NEWTON_TOL:
            return z, w
        z_next = z - resid / (eta * np.sum(w ** 1.5))
        if not np.isfinite(z_next) or z_next >= lmin:
            break
        z = z_next

    # Bisection fallback on the increasing residual function.
    lo = lmin - 2.0 * np.sqrt(m) / eta
    while weights(lo).sum() > 1.0:
        lo = lmin - 2.0 * (lmin - lo)
    hi = lmin - (lmin - lo) * 1e-18
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        w = weights(mid)
        resid = w.sum() - 1.0
        if abs(resid) < NEWTON_TOL:
            return mid, w
        if resid > 0:
            hi = mid
        else:
            lo = mid
    raise RuntimeError("Tsallis normalizer solve did not converge")


class TsallisInf:
    """Tsallis-entropy mirror descent over finite arms with importance-weighted losses.

    Round t samples from weights 4 / (eta_t (L_m - z))^2 with eta_t = 1/sqrt(t)
    and z the Newton-solved normalizer; the played arm's cumulative loss grows
    by loss / probability.
    """

    def __init__(self, n_arms: int):
        if n_arms < 1:
            raise ValueError("need at least one arm")
        self.n_arms = n_arms
        self.cum_losses = np.zeros(n_arms)
        self.round = 0
        self._normalizer: float | None = None
        self._last_probs: np.ndarray | None = None

    def probabilities(self) -> np.ndarray:
        eta = 1.0 / np.sqrt(max(self.round, 1))
        z, w = _tsallis_weights(self.cum_losses, eta, self._normalizer)
        self._normalizer = z
        p = w / w.sum()
        _check_distribution(p)
        if np.any(p <= 0.0):
            raise AssertionError("Tsallis weights must be strictly positive")
        return p

    def select(self, rng: np.random.Generator) -> int:
        self.round += 1
        p = self.probabilities()
        self._last_probs = p
        return _sample_index(rng, p)

    def update(self, arm: int, loss: float):
        if not -1e-12 <= loss <= 1.0 + 1e-12:
            raise ValueError("loss must lie in [0, 1]")
        p = self._last_probs if self._last_probs is not None else self.probabilities()
        self.cum_losses[arm] += loss / p[arm]
        self._last_probs = None

    def observe(self, index: int, arm: int, reward: float):
        """Harness adapter: utilities in [-1, 1] become losses in [0, 1]."""
        self.update(index, reward_to_loss(reward))
