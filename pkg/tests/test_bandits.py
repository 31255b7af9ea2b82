import numpy as np
import pytest

from incentive_bandits.bandits import (
    ArmEmbedding,
    Exp3Linear,
    TsallisInf,
    cover_embeddings,
    embed_menu,
    g_optimal_design,
    reward_to_loss,
)
from incentive_bandits.core import IncentiveVector, greedy_best_response, utility
from incentive_bandits.greedy_single import build_raw_menu, perturb_menu, reduce_menu
from incentive_bandits.instances import example_3_2

from conftest import make_instances


class TestEmbedMenu:
    def test_zero_row_lists_zero_incentive_rewards(self):
        inst, _ = example_3_2(0.7)
        menu = build_raw_menu(inst)
        emb = embed_menu(inst, menu)
        zero_idx = next(i for i, it in enumerate(menu.items) if it.is_zero)
        expected = [
            inst.principal_rewards[greedy_best_response(inst, j, IncentiveVector.zero(3))]
            for j in range(2)
        ]
        assert emb.vectors[zero_idx].tolist() == expected

    def test_example_delta_row(self):
        # hand-evaluated: both agents tie at (0.7,0,0); agent 1 takes arm 1
        # (utility 0.3), agent 2 takes arm 2 (utility 0.5)
        inst, _ = example_3_2(0.7)
        menu = build_raw_menu(inst)
        idx = next(i for i, it in enumerate(menu.items) if np.allclose(it.values, [0.7, 0, 0]))
        emb = embed_menu(inst, menu)
        assert emb.vectors[idx] == pytest.approx([0.3, 0.5], abs=1e-15)

    def test_reduction_exactness_bitwise(self):
        # inner product with a basis vector reproduces the utility with zero tolerance
        for inst in make_instances(seed=101, count=25):
            menu = reduce_menu(inst, perturb_menu(inst, build_raw_menu(inst), 128))
            emb = embed_menu(inst, menu)
            eye = np.eye(inst.n_agents)
            for m, item in enumerate(menu.items):
                for j in range(inst.n_agents):
                    u = utility(inst, item, greedy_best_response(inst, j, item))
                    assert float(emb.vectors[m] @ eye[j]) == u


class TestCoverEmbeddings:
    def test_duplicates_collapse(self):
        emb = ArmEmbedding(np.array([[0.5, 0.2], [0.5, 0.2], [0.5, 0.2]]), np.arange(3))
        out = cover_embeddings(emb, tol=1e-6)
        assert out.n_arms == 1

    def test_spread_rows_survive(self):
        emb = ArmEmbedding(np.array([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]), np.arange(3))
        out = cover_embeddings(emb, tol=0.1)
        assert out.n_arms == 3

    def test_random_rows_covering_inequality(self, rng):
        vectors = rng.uniform(0, 1, size=(1000, 2))
        emb = ArmEmbedding(vectors, np.arange(1000))
        tol = 0.1
        out = cover_embeddings(emb, tol)
        assert out.n_arms <= emb.n_arms
        # exhaustive post-check of max-min covering distance
        for row in vectors:
            assert np.min(np.max(np.abs(out.vectors - row[None, :]), axis=1)) <= tol


class TestGOptimalDesign:
    def test_orthonormal_rows_uniform(self):
        design = g_optimal_design(np.eye(4))
        assert design == pytest.approx(np.full(4, 0.25), abs=1e-9)

    def test_duplicated_rows_meet_leverage(self):
        vectors = np.vstack([np.eye(3), np.eye(3)])
        design = g_optimal_design(vectors)
        v = vectors.T @ (design[:, None] * vectors)
        lev = np.einsum("mi,ij,mj->m", vectors, np.linalg.pinv(v), vectors)
        assert lev.max() <= 2 * 3 + 1e-6

    def test_random_embedding_leverage_bound(self, rng):
        vectors = rng.uniform(-1, 1, size=(10, 3))
        design = g_optimal_design(vectors)
        assert design.sum() == pytest.approx(1.0, abs=1e-12)
        v = vectors.T @ (design[:, None] * vectors)
        lev = np.einsum("mi,ij,mj->m", vectors, np.linalg.pinv(v), vectors)
        assert lev.max() <= 6 + 1e-6


class TestExp3Linear:
    def test_eta_formula(self):
        emb = ArmEmbedding(np.array([[1.0, 0.0], [0.0, 1.0]]), np.arange(2))
        policy = Exp3Linear(emb, horizon=100)
        assert policy.eta == pytest.approx(np.sqrt(2 * np.log(2) / 200))
        assert policy.gamma == pytest.approx(min(0.5, 2 * policy.eta))

    def test_initial_distribution_is_valid_mixture(self):
        emb = ArmEmbedding(np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]), np.arange(3))
        policy = Exp3Linear(emb, horizon=50)
        p = policy.probabilities()
        uniform = np.full(3, 1 / 3)
        expected = (1 - policy.gamma) * uniform + policy.gamma * policy.exploration
        assert p == pytest.approx(expected, abs=1e-12)

    def test_single_arm_estimator_exact(self, rng):
        emb = ArmEmbedding(np.array([[0.5, 0.25]]), np.arange(1))
        policy = Exp3Linear(emb, horizon=10)
        assert policy.select(rng) == 0
        policy.update(0, 0.75)
        # theta = pinv(z z^T) z r recovers r on the one-dimensional span
        assert policy.cum_estimates[0] == pytest.approx(0.75, abs=1e-9)

    def test_zero_rewards_keep_distribution_fixed(self, rng):
        emb = ArmEmbedding(np.array([[1.0, 0.0], [0.0, 1.0], [0.3, 0.3]]), np.arange(3))
        policy = Exp3Linear(emb, horizon=100)
        first = policy.probabilities().copy()
        for _ in range(20):
            arm = policy.select(rng)
            policy.update(arm, 0.0)
        assert policy.probabilities() == pytest.approx(first, abs=1e-12)

    def test_valid_distribution_every_round(self, rng):
        emb = ArmEmbedding(rng.uniform(-1, 1, size=(5, 3)), np.arange(5))
        policy = Exp3Linear(emb, horizon=200)
        for _ in range(200):
            arm = policy.select(rng)
            p = policy._last_probs
            assert abs(p.sum() - 1.0) <= 1e-10 and np.all(p >= 0)
            policy.update(arm, float(rng.uniform(-1, 1)))

    def test_reward_range_enforced(self, rng):
        emb = ArmEmbedding(np.eye(2), np.arange(2))
        policy = Exp3Linear(emb, horizon=10)
        policy.select(rng)
        with pytest.raises(ValueError):
            policy.update(0, 1.5)

    def test_estimator_unbiased_on_span(self, rng):
        # E_{A ~ p}[pinv(Q) z_A z_A^T theta] equals the span projection of theta
        vectors = rng.uniform(-1, 1, size=(6, 4))
        vectors[5] = vectors[0]  # make it interesting but keep rank <= 4
        p = rng.dirichlet(np.ones(6))
        q = vectors.T @ (p[:, None] * vectors)
        q_pinv = np.linalg.pinv(q, hermitian=True, rcond=1e-10)
        theta = rng.uniform(-1, 1, size=4)
        avg = sum(p[m] * np.outer(q_pinv @ vectors[m], vectors[m]) @ theta for m in range(6))
        # projection onto the row span of the vectors
        u, s, vt = np.linalg.svd(vectors, full_matrices=False)
        basis = vt[s > 1e-10]
        proj = basis.T @ (basis @ theta)
        assert avg == pytest.approx(proj, abs=1e-8)

    def test_two_arms_deterministic_rewards_monte_carlo(self):
        # arm 1 pays 1, arm 2 pays 0: pooled play rate of arm 1 over 20 seeds
        horizon = 10_000
        emb = ArmEmbedding(np.eye(2), np.arange(2))
        plays = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            policy = Exp3Linear(emb, horizon)
            for _ in range(horizon):
                arm = policy.select(rng)
                policy.update(arm, 1.0 if arm == 0 else 0.0)
                plays += arm == 0
        assert plays / (20 * horizon) >= 0.9


class TestTsallisInf:
    def test_first_round_uniform(self, rng):
        policy = TsallisInf(5)
        policy.select(rng)
        assert policy._last_probs == pytest.approx(np.full(5, 0.2), abs=1e-9)

    def test_distribution_valid_and_positive(self, rng):
        policy = TsallisInf(4)
        for _ in range(300):
            arm = policy.select(rng)
            p = policy._last_probs
            assert abs(p.sum() - 1.0) <= 1e-10 and np.all(p > 0)
            policy.update(arm, float(rng.uniform(0, 1)))

    def test_loss_range_enforced(self, rng):
        policy = TsallisInf(2)
        policy.select(rng)
        with pytest.raises(ValueError):
            policy.update(0, 1.5)

    def test_two_arms_deterministic_losses_monte_carlo(self):
        horizon = 10_000
        plays = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            policy = TsallisInf(2)
            for _ in range(horizon):
                arm = policy.select(rng)
                policy.update(arm, 0.0 if arm == 0 else 1.0)
                plays += arm == 0
        assert plays / (20 * horizon) >= 0.9


class TestRegretSanity:
    @pytest.mark.parametrize("policy_name", ["exp3linear", "tsallis"])
    def test_stochastic_gap_instance(self, policy_name):
        # two arms with Bernoulli rewards, means 0.6 and 0.5
        horizon = 10_000
        means = np.array([0.6, 0.5])
        total_regret = 0.0
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            if policy_name == "exp3linear":
                policy = Exp3Linear(ArmEmbedding(np.eye(2), np.arange(2)), horizon)
            else:
                policy = TsallisInf(2)
            pulled = np.zeros(2)
            for _ in range(horizon):
                arm = policy.select(rng)
                reward = float(rng.random() < means[arm])
                if policy_name == "exp3linear":
                    policy.update(arm, reward)
                else:
                    policy.update(arm, 1.0 - reward)
                pulled[arm] += 1
            total_regret += pulled[1] * (means[0] - means[1])
        assert total_regret / 20 <= 0.1 * horizon


def test_reward_loss_map():
    assert reward_to_loss(1.0) == 0.0
    assert reward_to_loss(-1.0) == 1.0
    assert reward_to_loss(0.0) == 0.5
