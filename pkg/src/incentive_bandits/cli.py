"""Command-line harness: generate instances, run experiments, verify, plot, bench.

Exit code 0 on success. Invariant failures print a single machine-readable
JSON line starting with VERIFY-FAIL or RUN-FAIL and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bandits, greedy_general, greedy_single, harness, instances, serialize, smooth
from .core import GreedyInstance, IncentiveMode
from .core import utility_row as core_utility_row

CSV_COLUMNS = ["run_id", "t", "regret_mean", "regret_stderr", "policy", "instance", "seed_count"]


def _parse_seeds(text: str) -> list[int]:
    if "," in text:
        return [int(s) for s in text.split(",") if s]
    return list(range(int(text)))


def _parse_horizons(text: str) -> list[int]:
    if ".." in text:
        lo, hi = (int(x) for x in text.split(".."))
        out = []
        t = lo
        while t <= hi:
            out.append(t)
            t *= 2
        return out
    return [int(x) for x in text.split(",") if x]


def make_policy(name: str, env, horizon: int, params: dict):
    if name == "exp3linear":
        if not isinstance(env, harness.GreedyEnvironment):
            raise ValueError("exp3linear needs known utility embeddings (greedy instances only)")
        embedding = bandits.embed_menu(env.instance, env.menu)
        return bandits.Exp3Linear(
            embedding,
            horizon,
            eta=params.get("eta"),
            gamma=params.get("gamma"),
            exploration=params.get("exploration", "g-optimal"),
            clip=params.get("clip"),
        )
    if name == "tsallis":
        return bandits.TsallisInf(env.n_items)
    if name.startswith("fixed:"):
        return harness.FixedPolicy(int(name.split(":", 1)[1]))
    if name == "adversarial-zooming":
        raise NotImplementedError("adversarial zooming is a pluggable slot, not implemented")
    raise ValueError(f"unknown policy {name!r}")


def build_environment(document: serialize.InstanceDocument, menu_kind: str, horizon: int, menu_params: dict):
    """Environment plus benchmark candidates and slack for one experiment."""
    eps = menu_params.get("eps")
    cap = menu_params.get("cap")
    if document.is_smooth:
        n = document.smooth_models[0].n_arms
        lipschitz = max(m.lipschitz_constant for m in document.smooth_models)
        if menu_kind in ("grid", "reduced"):
            step = eps if eps else smooth.choose_single_resolution(n, lipschitz, horizon)
            menu = smooth.build_single_arm_grid(n, step)
        elif menu_kind == "hypercube":
            step = eps if eps else smooth.choose_general_resolution(n, lipschitz, horizon)
            menu = smooth.build_hypercube_grid(n, step, cap=cap or smooth.GRID_CAP)
        else:
            raise ValueError(f"menu kind {menu_kind!r} is not available for smooth models")
        env = harness.SmoothEnvironment(document.smooth_rewards, document.smooth_models, menu)
        oracle_step = step / 10.0
        if menu_kind == "hypercube":
            oracle = smooth.build_hypercube_grid(n, oracle_step, cap=(cap or smooth.GRID_CAP) * 20)
        else:
            oracle = smooth.build_single_arm_grid(n, oracle_step)
        env.benchmark_slack = (lipschitz + 1.0) * oracle_step * horizon
        return env, oracle

    instance = document.instance
    if instance is None:
        raise ValueError("document contains neither a greedy instance nor smooth models")
    if menu_kind == "reduced":
        menu = greedy_single.reduce_menu(
            instance, greedy_single.perturb_menu(instance, greedy_single.build_raw_menu(instance), horizon)
        )
        bench_menu, slack = menu, 1.0
    elif menu_kind == "raw":
        menu = greedy_single.build_raw_menu(instance)
        bench_menu, slack = _reduced_menu(instance, horizon), 1.0
    elif menu_kind == "grid":
        if not eps:
            raise ValueError("grid menus need --eps")
        menu = smooth.build_single_arm_grid(instance.n_arms, eps)
        bench_menu, slack = _reduced_menu(instance, horizon), 1.0
    elif menu_kind == "general":
        menu = greedy_general.build_general_menu(
            instance,
            horizon,
            profile_cap=cap or greedy_general.DEFAULT_PROFILE_CAP,
        )
        bench_menu, slack = menu, 2.0
    else:
        raise ValueError(f"unknown menu kind {menu_kind!r}")
    env = harness.GreedyEnvironment(instance, menu)
    env.benchmark_slack = slack
    return env, bench_menu


def _reduced_menu(instance: GreedyInstance, horizon: int):
    return greedy_single.reduce_menu(
        instance, greedy_single.perturb_menu(instance, greedy_single.build_raw_menu(instance), horizon)
    )


def execute_config(cfg: harness.ExperimentConfig, quiet: bool = False) -> list[harness.RunRecord]:
    document = serialize.document_from_doc(serialize.load_json(cfg.instance_path))
    if document.arrival is None:
        raise ValueError("instance document lacks an arrival block")
    env, bench_menu = build_environment(document, cfg.menu_kind, cfg.horizon, cfg.menu_params)
    records = []
    for seed in cfg.seeds:
        policy = make_policy(cfg.policy, env, cfg.horizon, cfg.policy_params)
        record = harness.run_episode(
            env,
            policy,
            document.arrival,
            cfg.horizon,
            seed,
            config_hash=cfg.hash,
            benchmark_candidates=bench_menu,
        )
        records.append(record)
        if not quiet:
            print(f"run {cfg.hash} seed {seed}: regret {record.final_regret:.3f} in {record.duration:.2f}s")
    return records


def write_summary_csv(path, run_id: str, records: list[harness.RunRecord], policy: str, instance: str):
    """Aggregate regret curves across seeds into the fixed-column CSV."""
    ts = records[0].regret_ts
    values = np.array([r.regret_values for r in records])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i, t in enumerate(ts):
            col = values[:, i]
            stderr = col.std(ddof=1) / np.sqrt(col.size) if col.size > 1 else 0.0
            writer.writerow([run_id, t, f"{col.mean():.10g}", f"{stderr:.10g}", policy, instance, len(records)])


def cmd_gen(args) -> int:
    kind = args.kind
    if kind == "example32":
        instance, arrival = instances.example_3_2(args.delta)
        doc = serialize.document_to_doc(
            serialize.InstanceDocument(
                mode=IncentiveMode.SINGLE_ARM,
                instance=instance,
                arrival=arrival,
                generator={"kind": "example32", "delta": args.delta},
            )
        )
    elif kind == "hard_b1":
        built = instances.hard_b1(args.agents, args.arms, args.T)
        doc = serialize.document_to_doc(
            serialize.InstanceDocument(
                mode=IncentiveMode.SINGLE_ARM,
                instance=built.instance,
                arrival=instances.IIDArrivals(built.base_probs),
                generator={"kind": "hard_b1", "agents": args.agents, "arms": args.arms, "T": args.T},
            )
        )
    elif kind == "hard_b2":
        built = instances.hard_b2(args.agents, args.arms, args.T, epsilon=args.eps)
        doc = serialize.document_to_doc(
            serialize.InstanceDocument(
                mode=IncentiveMode.SINGLE_ARM,
                instance=built.instance,
                arrival=instances.IIDArrivals(built.agent_distribution(built.patterns[0])),
                generator={
                    "kind": "hard_b2",
                    "agents": args.agents,
                    "arms": args.arms,
                    "T": args.T,
                    "eps": built.epsilon,
                },
            )
        )
    elif kind == "smooth_hard":
        suite = instances.smooth_hard_suite(args.arms, args.L, args.T)
        model, arrival = suite[args.member]
        doc = serialize.document_to_doc(
            serialize.InstanceDocument(
                mode=IncentiveMode.SINGLE_ARM,
                arrival=arrival,
                smooth_rewards=smooth.hard_instance_rewards(args.arms),
                smooth_models=(model,),
                generator={
                    "kind": "smooth_hard",
                    "arms": args.arms,
                    "L": args.L,
                    "T": args.T,
                    "member": args.member,
                },
            )
        )
    elif kind == "random":
        rng = np.random.default_rng(args.seed)
        instance = instances.random_instance(rng, args.arms, args.agents)
        arrival = instances.IIDArrivals(np.full(args.agents, 1.0 / args.agents))
        doc = serialize.document_to_doc(
            serialize.InstanceDocument(
                mode=IncentiveMode.SINGLE_ARM,
                instance=instance,
                arrival=arrival,
                generator={"kind": "random", "seed": args.seed},
            )
        )
    else:
        raise ValueError(f"unknown generator kind {kind!r}")
    out = Path(args.out or f"{kind}.json")
    serialize.save_json(out, doc)
    print(f"wrote {out}")
    return 0


def cmd_run(args) -> int:
    if args.config:
        cfg = harness.ExperimentConfig.from_doc(serialize.load_json(args.config))
    else:
        if not (args.instance and args.policy and args.T):
            raise ValueError("run needs --config or --instance, --policy, and --T")
        menu_params = {}
        if args.eps:
            menu_params["eps"] = args.eps
        if args.cap:
            menu_params["cap"] = args.cap
        cfg = harness.ExperimentConfig(
            instance_path=args.instance,
            policy=args.policy,
            horizon=args.T,
            seeds=_parse_seeds(args.seeds),
            out_dir=args.out,
            menu_kind=args.menu,
            menu_params=menu_params,
        )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = execute_config(cfg)
    for record in records:
        harness.write_record(out_dir / f"record-{cfg.hash}-seed{record.seed}.json", record)
    write_summary_csv(
        out_dir / f"summary-{cfg.hash}.csv",
        run_id=cfg.hash,
        records=records,
        policy=cfg.policy,
        instance=Path(cfg.instance_path).stem,
    )
    meta = {
        "config": cfg.to_doc(),
        "benchmark": {"kind": records[0].benchmark_kind, "slack": records[0].benchmark_slack},
    }
    serialize.save_json(out_dir / f"meta-{cfg.hash}.json", meta)
    print(f"wrote {len(records)} records to {out_dir}")
    return 0


def cmd_bench(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    horizons = _parse_horizons(args.Ts)
    seeds = _parse_seeds(args.seeds)
    rows = []
    finals = []
    shared_path = None
    if not Path(args.instance).exists() and args.instance != "smooth_hard":
        # greedy builtin families are built once, at the largest horizon; only
        # the smooth family is horizon-coupled
        shared_path = _materialize_instance(args, max(horizons), out_dir)
    for horizon in horizons:
        instance_path = shared_path or _materialize_instance(args, horizon, out_dir)
        cfg = harness.ExperimentConfig(
            instance_path=str(instance_path),
            policy=args.policy,
            horizon=horizon,
            seeds=seeds,
            out_dir=str(out_dir),
            menu_kind=args.menu,
            menu_params={"eps": args.eps} if args.eps else {},
        )
        records = execute_config(cfg, quiet=True)
        vals = np.array([r.final_regret for r in records])
        stderr = vals.std(ddof=1) / np.sqrt(vals.size) if vals.size > 1 else 0.0
        rows.append(
            {
                "run_id": cfg.hash,
                "t": horizon,
                "regret_mean": vals.mean(),
                "regret_stderr": stderr,
                "policy": args.policy,
                "instance": args.instance,
                "seed_count": len(seeds),
                "slack": records[0].benchmark_slack,
            }
        )
        finals.append(vals.mean())
        print(f"T={horizon}: regret {vals.mean():.2f} +- {stderr:.2f}")
    slope = harness.fit_slope(horizons, finals) if len(horizons) > 1 and min(finals) > 0 else float("nan")
    csv_path = out_dir / "bench.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([row[c] for c in CSV_COLUMNS])
    serialize.save_json(
        out_dir / "bench_meta.json",
        {
            "slope": slope,
            "policy": args.policy,
            "instance": args.instance,
            "horizons": horizons,
            "slacks": [row["slack"] for row in rows],
        },
    )
    print(f"fitted log-log slope: {slope:.4f}")
    return 0


def _materialize_instance(args, horizon: int, out_dir: Path) -> Path:
    """Resolve --instance: a document path, or a builtin generator regenerated per T."""
    if Path(args.instance).exists():
        return Path(args.instance)
    gen_args = argparse.Namespace(
        kind=args.instance,
        delta=args.delta,
        agents=args.agents,
        arms=args.arms,
        T=horizon,
        L=args.L,
        eps=None,
        member=0,
        seed=0,
        out=str(out_dir / f"instance-{args.instance}-T{horizon}.json"),
    )
    cmd_gen(gen_args)
    return Path(gen_args.out)


def _verify_checks(doc_path: str):
    """Yield (name, ok, detail) tuples for one instance document."""
    document = serialize.document_from_doc(serialize.load_json(doc_path))
    rng = np.random.default_rng(7)
    if document.is_smooth:
        for i, model in enumerate(document.smooth_models):
            ratio = smooth.lipschitz_audit(model, trials=2000, rng=rng)
            ok = ratio <= model.lipschitz_constant * (1.0 + 1e-6)
            yield f"lipschitz-audit[{i}]", ok, f"ratio {ratio:.4f} vs declared {model.lipschitz_constant}"
        return

    instance = document.instance
    horizon = 1000
    menu = _reduced_menu(instance, horizon)
    embedding = bandits.embed_menu(instance, menu)
    util_table = greedy_single.menu_utilities(instance, menu)
    basis = np.eye(instance.n_agents)
    exact = all(
        embedding.vectors[m] @ basis[j] == util_table[m, j]
        for m in range(len(menu))
        for j in range(instance.n_agents)
    )
    yield "reduction-exactness", exact, "embedded utilities reproduce U(pi, j) bit for bit"

    eps_t = greedy_single.perturbation_size(instance, horizon)
    uncovered = None
    for arm in range(instance.n_arms):
        for val in np.linspace(0.0, 1.0, 101):
            pi = np.zeros(instance.n_arms)
            pi[arm] = val
            target = core_utility_row(instance, pi)
            if not np.any(np.all(util_table >= target[None, :] - 2 * eps_t - 1e-9, axis=1)):
                uncovered = (arm, val)
                break
        if uncovered:
            break
    yield (
        "menu-dominance",
        uncovered is None,
        "grid points dominated within 2 eps_T" if uncovered is None else f"uncovered point {uncovered}",
    )

    cover = bandits.cover_embeddings(embedding, tol=1.0 / horizon)
    ok = cover.n_arms <= embedding.n_arms and all(
        np.min(np.max(np.abs(cover.vectors - row[None, :]), axis=1)) <= 1.0 / horizon
        for row in embedding.vectors
    )
    yield "covering", ok, f"{cover.n_arms} of {embedding.n_arms} rows kept"

    gen = document.generator or {}
    if gen.get("kind") == "hard_b1":
        built = instances.hard_b1(gen["agents"], gen["arms"], gen["T"])
        errs = [
            abs(
                float(built.base_probs @ core_utility_row(built.instance, item.values))
                - built.utilities[m]
            )
            for m, item in enumerate(built.menu.items)
        ]
        yield "hard-b1-identities", max(errs) <= 1e-12, f"max utility deviation {max(errs):.2e}"
    if gen.get("kind") == "example32":
        delta = gen["delta"]
        value = harness.best_fixed_in_hindsight(
            harness.GreedyEnvironment(instance, menu),
            np.array([0.4, 0.6]),
            horizon=1,
        )[1]
        expected = 0.6 * 0.5 + 0.4 * (1.0 - delta)
        ok = value >= expected - 2 * eps_t - 1e-9
        yield "example32-value", ok, f"menu benchmark {value:.4f} vs analytic {expected:.4f}"


def cmd_verify(args) -> int:
    paths = args.instance or []
    tmp = None
    if not paths:
        import tempfile

        tmp = tempfile.mkdtemp(prefix="verify-golden-")
        golden = []
        for kind, extra in (
            ("example32", {"delta": 0.705}),
            ("hard_b1", {"agents": 4, "arms": 3, "T": 20000}),
            ("smooth_hard", {"arms": 3, "L": 4, "T": 4000}),
        ):
            ns = argparse.Namespace(
                kind=kind,
                delta=extra.get("delta", 0.705),
                agents=extra.get("agents", 4),
                arms=extra.get("arms", 3),
                T=extra.get("T", 20000),
                L=extra.get("L", 4.0),
                eps=None,
                member=0,
                seed=0,
                out=f"{tmp}/{kind}.json",
            )
            cmd_gen(ns)
            golden.append(ns.out)
        paths = golden
    failures = []
    for path in paths:
        for name, ok, detail in _verify_checks(path):
            status = "PASS" if ok else "FAIL"
            print(f"{status} {Path(path).stem}:{name} ({detail})")
            if not ok:
                failures.append({"instance": path, "check": name, "detail": detail})
    if failures:
        print("VERIFY-FAIL " + json.dumps({"failures": failures}))
        return 1
    return 0


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[str, list[tuple[float, float, float]]] = {}
    for path in args.input:
        with open(path) as fh:
            for row in csv.DictReader(fh):
                series.setdefault(row["policy"], []).append(
                    (float(row["t"]), float(row["regret_mean"]), float(row["regret_stderr"]))
                )
    fig, ax = plt.subplots(figsize=(6, 4))
    for policy, points in sorted(series.items()):
        points.sort()
        ts = [p[0] for p in points]
        means = [p[1] for p in points]
        errs = [p[2] for p in points]
        ax.errorbar(ts, means, yerr=errs, marker="o", capsize=3, label=policy)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("rounds T")
    ax.set_ylabel("regret")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, format="svg")
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incentive-bandits")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="emit an instance document")
    p.add_argument("--kind", required=True, choices=["example32", "hard_b1", "hard_b2", "smooth_hard", "random"])
    p.add_argument("--delta", type=float, default=0.705)
    p.add_argument("--agents", type=int, default=4)
    p.add_argument("--arms", type=int, default=3)
    p.add_argument("--T", type=int, default=20000)
    p.add_argument("--L", type=float, default=4.0)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--member", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="execute an experiment configuration")
    p.add_argument("--config", default=None)
    p.add_argument("--instance", default=None)
    p.add_argument("--policy", default=None)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--seeds", default="1")
    p.add_argument("--menu", default="reduced", choices=["reduced", "raw", "grid", "general", "hypercube"])
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--instance", nargs="*", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="emit a log-log regret SVG from bench CSVs")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("bench", help="multi-horizon slope study")
    p.add_argument("--instance", required=True, help="document path or builtin kind")
    p.add_argument("--policy", required=True)
    p.add_argument("--Ts", required=True, help="e.g. 1024..65536 (powers of two) or comma list")
    p.add_argument("--seeds", default="20")
    p.add_argument("--menu", default="reduced", choices=["reduced", "raw", "grid", "general", "hypercube"])
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--delta", type=float, default=0.705)
    p.add_argument("--agents", type=int, default=10)
    p.add_argument("--arms", type=int, default=3)
    p.add_argument("--L", type=float, default=8.0)
    p.add_argument("--out", default="bench-results")
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, NotImplementedError, FileNotFoundError, RuntimeError) as exc:
        print("RUN-FAIL " + json.dumps({"error": type(exc).__name__, "detail": str(exc)}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
