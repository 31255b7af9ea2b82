"""Episode execution, hindsight benchmarks, regret curves, and run records.

The round protocol keeps the arriving agent hidden from the policy: the policy
picks a menu index, the environment resolves the agent's arm, and the policy
observes only (menu index, chosen arm, realized utility). Master seeds split
into independent named streams so swapping the policy never perturbs arrivals.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .core import GreedyInstance, IncentiveVector, greedy_best_response
from .greedy_single import Menu, menu_utilities
from .instances import ArrivalProcess
from .smooth import SmoothChoiceModel, expected_smooth_utility

REGRET_SAMPLE_BASE = 2


def split_rng(master_seed: int, stream: str, index: int = 0) -> np.random.Generator:
    """Independent counter-based generator for a named stream of a master seed."""
    digest = hashlib.sha256(f"{master_seed}:{stream}:{index}".encode()).digest()
    key = int.from_bytes(digest[:16], "little")
    return np.random.Generator(np.random.Philox(key=key))


class GreedyEnvironment:
    """Deterministic responses: per (menu item, agent) the arm and utility are fixed."""

    def __init__(self, instance: GreedyInstance, menu: Menu):
        if len(menu) == 0:
            raise ValueError("menu must be nonempty")
        if menu.items[0].n_arms != instance.n_arms:
            raise ValueError("menu arm count must match the instance")
        self.instance = instance
        self.menu = menu
        self.response_table = np.array(
            [
                [greedy_best_response(instance, j, item) for j in range(instance.n_agents)]
                for item in menu.items
            ],
            dtype=np.int64,
        )
        self.utility_table = menu_utilities(instance, menu)
        self.benchmark_kind = "realized-utility"
        self.benchmark_slack = 0.0

    @property
    def n_agents(self) -> int:
        return self.instance.n_agents

    @property
    def n_items(self) -> int:
        return len(self.menu)

    def step(self, item: int, agent: int, rng: np.random.Generator) -> tuple[int, float]:
        return int(self.response_table[item, agent]), float(self.utility_table[item, agent])

    def expected_utility_table(self) -> np.ndarray:
        return self.utility_table


class SmoothEnvironment:
    """Stochastic responses: one choice model per agent type, shared reward vector."""

    def __init__(self, principal_rewards, models, menu: Menu):
        models = tuple(models) if not isinstance(models, SmoothChoiceModel) else (models,)
        if len(menu) == 0 or not models:
            raise ValueError("menu and model list must be nonempty")
        v = np.asarray(principal_rewards, dtype=float)
        n = models[0].n_arms
        if v.shape != (n,) or menu.items[0].n_arms != n:
            raise ValueError("reward vector, models, and menu must agree on the arm count")
        self.principal_rewards = v
        self.models = models
        self.menu = menu
        m, k = len(menu), len(models)
        self._cum = np.empty((m, k, n))
        self._net = np.empty((m, n))
        self._expected = np.empty((m, k))
        for mi, item in enumerate(menu.items):
            self._net[mi] = v - item.values
            for j, model in enumerate(models):
                p = model.probabilities(item)
                self._cum[mi, j] = np.cumsum(p)
                self._expected[mi, j] = p @ self._net[mi]
        self.benchmark_kind = "expected-utility"
        self.benchmark_slack = 0.0

    @property
    def n_agents(self) -> int:
        return len(self.models)

    @property
    def n_items(self) -> int:
        return len(self.menu)

    def step(self, item: int, agent: int, rng: np.random.Generator) -> tuple[int, float]:
        cum = self._cum[item, agent]
        arm = int(np.searchsorted(cum, rng.random(), side="right").clip(0, cum.size - 1))
        return arm, float(self._net[item, arm])

    def expected_utility_table(self) -> np.ndarray:
        return self._expected


class FixedPolicy:
    """Always plays one menu index; useful as a benchmark probe."""

    def __init__(self, index: int):
        self.index = index

    def select(self, rng):
        return self.index

    def observe(self, index, arm, reward):
        pass


def regret_sample_times(horizon: int) -> list[int]:
    """Powers of two up to the horizon, always including the horizon itself."""
    ts = []
    t = 1
    while t < horizon:
        ts.append(t)
        t *= REGRET_SAMPLE_BASE
    ts.append(horizon)
    return ts


@dataclass(eq=False)
class RunRecord:
    """One episode: per-round data, sampled regret curve, and bookkeeping."""

    config_hash: str
    seed: int
    items: np.ndarray
    arms: np.ndarray
    utilities: np.ndarray
    agents: np.ndarray
    regret_ts: list[int] = field(default_factory=list)
    regret_values: list[float] = field(default_factory=list)
    benchmark_kind: str = "realized-utility"
    benchmark_slack: float = 0.0
    duration: float = 0.0

    @property
    def horizon(self) -> int:
        return int(self.utilities.size)

    @property
    def total_utility(self) -> float:
        return float(self.utilities.sum())

    @property
    def final_regret(self) -> float:
        return self.regret_values[-1] if self.regret_values else float("nan")


def run_episode(
    env,
    policy,
    arrivals: ArrivalProcess,
    horizon: int,
    seed: int,
    config_hash: str = "",
    benchmark_candidates: Menu | None = None,
) -> RunRecord:
    """Play one episode and attach the sampled regret curve.

    The regret baseline is the best fixed candidate (default: the policy's own
    menu) against the realized arrival prefix, maximizing realized utility for
    deterministic responses and expected utility for stochastic ones.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if getattr(policy, "n_arms", env.n_items) != env.n_items:
        raise ValueError("policy arm count does not match the menu")
    if arrivals.n_agents != env.n_agents:
        raise ValueError("arrival process and environment disagree on agent count")
    rng_arrivals = split_rng(seed, "arrivals", arrivals.seed or 0)
    rng_policy = split_rng(seed, "policy")
    rng_model = split_rng(seed, "model")

    items = np.empty(horizon, dtype=np.int64)
    arms = np.empty(horizon, dtype=np.int64)
    utils = np.empty(horizon)
    agents = np.empty(horizon, dtype=np.int64)
    history: list[tuple[np.ndarray, int]] = []
    started = time.perf_counter()
    for t in range(horizon):
        agent = arrivals.next_agent(t, history if arrivals.needs_history else None, rng_arrivals)
        item = policy.select(rng_policy)
        arm, value = env.step(item, agent, rng_model)
        policy.observe(item, arm, value)
        items[t] = item
        arms[t] = arm
        utils[t] = value
        agents[t] = agent
        if arrivals.needs_history:
            history.append((env.menu.items[item].values, arm))
    duration = time.perf_counter() - started

    record = RunRecord(
        config_hash=config_hash,
        seed=seed,
        items=items,
        arms=arms,
        utilities=utils,
        agents=agents,
        benchmark_kind=env.benchmark_kind,
        benchmark_slack=env.benchmark_slack,
        duration=duration,
    )
    ts = regret_sample_times(horizon)
    bench = benchmark_curve(env, agents, ts, candidates=benchmark_candidates)
    record.regret_ts = ts
    record.regret_values = compute_regret(record, bench).tolist()
    return record


def _candidate_table(env, candidates: Menu | None) -> np.ndarray:
    """(M, K) utility table of the benchmark candidate set."""
    if candidates is None or candidates is env.menu:
        return env.expected_utility_table()
    if isinstance(env, GreedyEnvironment):
        return menu_utilities(env.instance, candidates)
    table = np.empty((len(candidates), env.n_agents))
    for mi, item in enumerate(candidates.items):
        for j, model in enumerate(env.models):
            table[mi, j] = expected_smooth_utility(env.principal_rewards, model, item)
    return table


def best_fixed_in_hindsight(
    env,
    arrivals,
    candidates: Menu | None = None,
    horizon: int | None = None,
) -> tuple[IncentiveVector, float]:
    """Best fixed candidate incentive against realized arrivals or a distribution.

    `arrivals` is either a sequence of agent indices (a realization) or a
    probability vector over agent types, in which case `horizon` scales the
    per-round expectation.
    """
    table = _candidate_table(env, candidates)
    menu = candidates if candidates is not None else env.menu
    arr = np.asarray(arrivals)
    if arr.dtype.kind in "iu":
        counts = np.bincount(arr, minlength=env.n_agents).astype(float)
    else:
        if horizon is None:
            raise ValueError("a distribution benchmark needs an explicit horizon")
        if abs(arr.sum() - 1.0) > 1e-9:
            raise ValueError("arrival distribution must sum to 1")
        counts = arr * horizon
    totals = table @ counts
    best = int(np.argmax(totals))
    return menu.items[best], float(totals[best])


def benchmark_curve(env, agents: np.ndarray, ts, candidates: Menu | None = None) -> np.ndarray:
    """Best fixed cumulative value at each sampled prefix of the realized arrivals."""
    table = _candidate_table(env, candidates)
    out = np.empty(len(ts))
    counts = np.zeros(env.n_agents)
    prev = 0
    for i, t in enumerate(ts):
        counts += np.bincount(agents[prev:t], minlength=env.n_agents)
        prev = t
        out[i] = float(np.max(table @ counts))
    return out


def compute_regret(record: RunRecord, benchmark_per_prefix) -> np.ndarray:
    """Regret at each sampled time: benchmark value minus accumulated utility."""
    bench = np.asarray(benchmark_per_prefix, dtype=float)
    ts = record.regret_ts if record.regret_ts else regret_sample_times(record.horizon)
    if bench.shape != (len(ts),):
        raise ValueError("benchmark curve length must match the sample schedule")
    cums = np.cumsum(record.utilities)
    played = np.array([cums[t - 1] for t in ts])
    return bench - played


def fit_slope(horizons, final_regrets) -> float:
    """Least-squares slope of log mean regret against log horizon."""
    hs = np.asarray(horizons, dtype=float)
    rs = np.asarray(final_regrets, dtype=float)
    if hs.size != rs.size or hs.size < 2:
        raise ValueError("need at least two (horizon, regret) pairs")
    if np.any(rs <= 0):
        raise ValueError("regrets must be positive to fit a log-log slope")
    return float(np.polyfit(np.log(hs), np.log(rs), 1)[0])


def record_to_doc(record: RunRecord, include_rounds: bool = False) -> dict:
    """Deterministic JSON form of a record; wall-clock time is deliberately excluded."""
    doc = {
        "format": "run-record",
        "config_hash": record.config_hash,
        "seed": record.seed,
        "horizon": record.horizon,
        "total_utility": record.total_utility,
        "arrival_counts": np.bincount(record.agents).tolist(),
        "benchmark": {"kind": record.benchmark_kind, "slack": record.benchmark_slack},
        "regret": [[int(t), float(r)] for t, r in zip(record.regret_ts, record.regret_values)],
    }
    if include_rounds:
        doc["rounds"] = [
            [int(t), int(record.items[t]), int(record.arms[t]), float(record.utilities[t])]
            for t in range(record.horizon)
        ]
    return doc


def write_record(path, record: RunRecord, include_rounds: bool = False):
    with open(path, "w") as fh:
        json.dump(record_to_doc(record, include_rounds), fh, indent=1, sort_keys=True)
        fh.write("\n")


def config_hash(doc: dict) -> str:
    """Stable short hash of a canonical-JSON configuration document."""
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


@dataclass(eq=False)
class ExperimentConfig:
    """A runnable experiment: subject, policy, menu construction, horizon, seeds."""

    instance_path: str
    policy: str
    horizon: int
    seeds: list[int]
    out_dir: str = "results"
    policy_params: dict = field(default_factory=dict)
    menu_kind: str = "reduced"
    menu_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def to_doc(self) -> dict:
        return {
            "format": "experiment",
            "instance": self.instance_path,
            "policy": {"name": self.policy, **self.policy_params},
            "menu": {"kind": self.menu_kind, **self.menu_params},
            "T": self.horizon,
            "seeds": list(self.seeds),
            "out": self.out_dir,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ExperimentConfig":
        if doc.get("format") != "experiment":
            raise ValueError("not an experiment document")
        policy = dict(doc["policy"])
        menu = dict(doc.get("menu", {"kind": "reduced"}))
        return cls(
            instance_path=doc["instance"],
            policy=policy.pop("name"),
            horizon=int(doc["T"]),
            seeds=[int(s) for s in doc["seeds"]],
            out_dir=doc.get("out", "results"),
            policy_params=policy,
            menu_kind=menu.pop("kind"),
            menu_params=menu,
        )

    @property
    def hash(self) -> str:
        doc = self.to_doc()
        doc.pop("out", None)  # output location is not part of the experiment identity
        return config_hash(doc)
