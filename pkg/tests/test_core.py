import numpy as np
import pytest

from incentive_bandits.core import (
    GreedyInstance,
    IncentiveMode,
    IncentiveVector,
    expected_greedy_utility,
    greedy_best_response,
    utility,
    utility_row,
)
from incentive_bandits.instances import example_3_2

from conftest import make_instances


def oracle_best_response(instance, agent, values):
    """Independent argmax: scan arms, track best (score, priority) lexicographically."""
    best = None
    for arm in range(instance.n_arms):
        score = instance.preferences[agent, arm] + values[arm]
        rank = instance.tie_priority[agent, arm]
        if best is None:
            best = (arm, score, rank)
            continue
        _, bscore, brank = best
        if score > bscore + 1e-12 or (abs(score - bscore) <= 1e-12 and rank > brank):
            best = (arm, score, rank)
    return best[0]


class TestIncentiveVector:
    def test_bounds_validated(self):
        with pytest.raises(ValueError):
            IncentiveVector(np.array([0.5, 1.2]))
        with pytest.raises(ValueError):
            IncentiveVector(np.array([-0.1, 0.0]))

    def test_single_arm_support_constraint(self):
        with pytest.raises(ValueError):
            IncentiveVector(np.array([0.5, 0.5]), IncentiveMode.SINGLE_ARM)
        vec = IncentiveVector.single(3, 1, 0.4)
        assert vec.support == 1
        assert IncentiveVector.zero(3).support is None

    def test_values_are_immutable(self):
        vec = IncentiveVector.single(2, 0, 0.3)
        with pytest.raises(ValueError):
            vec.values[0] = 0.9


class TestGreedyInstance:
    def test_rejects_bad_priority(self):
        with pytest.raises(ValueError):
            GreedyInstance([0.5], [[0.5, 0.5]], [[1, 1]])

    def test_rejects_out_of_range_entries(self):
        with pytest.raises(ValueError):
            GreedyInstance([1.5, 0.0], [[0.1, 0.2]], [[1, 2]])


class TestBestResponse:
    def test_unique_maximum_zero_incentive(self):
        inst = GreedyInstance([1.0, 1.0, 1.0], [[0.2, 0.0, 0.9]], [[1, 2, 3]])
        assert greedy_best_response(inst, 0, IncentiveVector.zero(3)) == 2

    def test_example_tie_breaks(self):
        inst, _ = example_3_2(0.7)
        pi = IncentiveVector.single(3, 0, 0.7)
        # agent 1 favors arm 1 on the tie, agent 2 favors arm 2
        assert greedy_best_response(inst, 0, pi) == 0
        assert greedy_best_response(inst, 1, pi) == 1

    def test_matches_oracle_on_random_instances(self, rng):
        for inst in make_instances(seed=3, count=30):
            for _ in range(20):
                vals = rng.uniform(0, 1, size=inst.n_arms)
                for j in range(inst.n_agents):
                    assert greedy_best_response(inst, j, vals) == oracle_best_response(inst, j, vals)

    def test_monotone_in_own_incentive(self, rng):
        # once an arm is the response, raising its incentive never loses it
        for inst in make_instances(seed=11, count=20):
            arm = int(rng.integers(inst.n_arms))
            agent = int(rng.integers(inst.n_agents))
            won = False
            for val in np.linspace(0, 1, 101):
                vals = np.zeros(inst.n_arms)
                vals[arm] = val
                hit = greedy_best_response(inst, agent, vals) == arm
                if won:
                    assert hit
                won = won or hit

    def test_deterministic(self, rng):
        inst = make_instances(seed=5, count=1)[0]
        vals = rng.uniform(0, 1, size=inst.n_arms)
        first = [greedy_best_response(inst, j, vals) for j in range(inst.n_agents)]
        for _ in range(5):
            assert [greedy_best_response(inst, j, vals) for j in range(inst.n_agents)] == first


class TestUtility:
    def test_direct_arithmetic(self):
        inst, _ = example_3_2(0.7)
        pi = IncentiveVector.single(3, 0, 0.7)
        assert utility(inst, pi, 0) == pytest.approx(0.3, abs=1e-15)
        assert utility(inst, IncentiveVector.zero(3), 1) == 0.5
        # incentive on an unchosen arm is not paid
        assert utility(inst, pi, 1) == 0.5

    def test_within_unit_interval(self, rng):
        for inst in make_instances(seed=7, count=20):
            vals = rng.uniform(0, 1, size=inst.n_arms)
            for j in range(inst.n_agents):
                u = utility(inst, vals, greedy_best_response(inst, j, vals))
                assert -1.0 <= u <= 1.0


class TestExpectedGreedyUtility:
    def test_example_analytic_values(self):
        inst, _ = example_3_2(0.7)
        p = [0.4, 0.6]
        at_delta = expected_greedy_utility(inst, IncentiveVector.single(3, 0, 0.7), p)
        assert at_delta == pytest.approx(0.6 * 0.5 + 0.4 * (1 - 0.7), abs=1e-15)
        assert at_delta >= 0.416
        below = expected_greedy_utility(inst, IncentiveVector.single(3, 0, 0.69), p)
        assert below == pytest.approx(0.3, abs=1e-15)

    def test_uniform_zero_incentive(self, rng):
        for inst in make_instances(seed=13, count=10):
            p = np.full(inst.n_agents, 1.0 / inst.n_agents)
            zero = IncentiveVector.zero(inst.n_arms)
            manual = np.mean(
                [inst.principal_rewards[greedy_best_response(inst, j, zero)] for j in range(inst.n_agents)]
            )
            assert expected_greedy_utility(inst, zero, p) == pytest.approx(manual, abs=1e-12)

    def test_rejects_bad_distribution(self):
        inst, _ = example_3_2(0.7)
        with pytest.raises(ValueError):
            expected_greedy_utility(inst, IncentiveVector.zero(3), [0.5, 0.6])


def test_utility_row_matches_scalar_path(rng):
    for inst in make_instances(seed=17, count=10):
        vals = rng.uniform(0, 1, size=inst.n_arms)
        row = utility_row(inst, vals)
        for j in range(inst.n_agents):
            assert row[j] == utility(inst, vals, greedy_best_response(inst, j, vals))
