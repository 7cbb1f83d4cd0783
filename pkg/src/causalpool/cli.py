"""Command-line interface.

Subcommands: discover (observational baseline), candoit (pooled
observational + interventional discovery), ci (single conditional-
independence query), gen (random system + data), metrics (score estimated
vs truth), bench (strategy harness), robot (camera scenario generator).
"""

from __future__ import annotations

import argparse
import json
import pathlib
import sys

from . import bench as bench_mod
from . import data as data_mod
from . import modelgen
from . import robotsim
from .ci import CiQuery, make_tester
from .data import (
    Dataset,
    InterventionRun,
    default_intervention_value,
    load_csv,
    pool,
    write_csv,
)
from .engine import EngineConfig
from .errors import CausalPoolError, SchemaError
from .graph import graph_from_json, graph_to_json, to_dot
from .metrics import bootstrap_ci, score
from .pooled import discover_obs, run as pooled_run


def _read_dataset(path: str) -> Dataset:
    text = pathlib.Path(path).read_text()
    if path.endswith(".json"):
        return data_mod.from_json(text)
    return load_csv(text)


def _write_graph(graph, out: str | None, fmt: str):
    text = to_dot(graph) if fmt == "dot" else graph_to_json(graph) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        pathlib.Path(out).write_text(text)


def _engine_config(args) -> EngineConfig:
    return EngineConfig(
        alpha=args.alpha,
        tau_min=args.tau_min,
        tau_max=args.tau_max,
        max_cond_size=args.max_cond_size,
        max_prelim_iters=args.max_prelim_iters,
    )


def _add_engine_flags(p):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--tau-min", type=int, default=0)
    p.add_argument("--tau-max", type=int, default=1)
    p.add_argument("--max-cond-size", type=int, default=3)
    p.add_argument("--max-prelim-iters", type=int, default=1)
    p.add_argument("--ci-test", choices=("parcorr", "rank"), default="parcorr")
    p.add_argument("--no-standardize", action="store_true",
                   help="skip z-scoring of system columns")
    p.add_argument("--out", default=None, help="output path ('-' for stdout)")
    p.add_argument("--format", choices=("json", "dot"), default="json")


def cmd_discover(args) -> int:
    obs = _read_dataset(args.obs)
    graph = discover_obs(
        obs, _engine_config(args), tester=args.ci_test,
        standardize=not args.no_standardize,
    )
    _write_graph(graph, args.out, args.format)
    return 0


def cmd_candoit(args) -> int:
    obs = _read_dataset(args.obs)
    if len(args.int) != len(args.target):
        raise SchemaError("each --int file needs a matching --target")
    runs = []
    for path, target in zip(args.int, args.target):
        block = _read_dataset(path)
        col = block.column(target)
        xi = float(col[0])
        runs.append(InterventionRun(target, xi, block))
    graph = pooled_run(
        obs, runs, _engine_config(args), tester=args.ci_test,
        standardize=not args.no_standardize,
    )
    _write_graph(graph, args.out, args.format)
    return 0


def cmd_ci(args) -> int:
    dataset = _read_dataset(args.data)
    obs_rows = dataset.regime == data_mod.OBS
    if obs_rows.all():
        pooled = pool(dataset, [])
    else:
        pooled = _pool_from_regimes(dataset)
    cond = frozenset(_parse_cond(args.cond))
    query = CiQuery(
        x=(args.x, args.lag), y=(args.y, 0), cond=cond, alpha=args.alpha
    )
    tester = make_tester(args.test)
    result = tester.test(pooled, query)
    json.dump(
        {
            "statistic": result.statistic,
            "pvalue": result.pvalue,
            "dependent": result.dependent,
            "effective_samples": result.effective_samples,
        },
        sys.stdout,
        indent=2,
        sort_keys=True,
    )
    sys.stdout.write("\n")
    return 0


def _pool_from_regimes(dataset: Dataset):
    """Split a regime-labelled CSV back into obs + runs and pool them.

    The intervention target of each block is inferred as its first exactly
    constant column.
    """
    blocks = dataset.blocks()
    obs_rows = [sl for label, sl in blocks if label == data_mod.OBS]
    if len(obs_rows) != 1 or blocks[0][0] != data_mod.OBS:
        raise SchemaError("pooled CSV must start with a single obs block")
    obs = Dataset(dataset.names, dataset.values[obs_rows[0]])
    runs = []
    for label, sl in blocks:
        if label == data_mod.OBS:
            continue
        block = dataset.values[sl]
        target, xi = _constant_column(dataset, block, label)
        runs.append(
            InterventionRun(target, xi, Dataset(dataset.names, block, [label] * block.shape[0]))
        )
    return pool(obs, runs)


def _constant_column(dataset, block, label):
    for j, name in enumerate(dataset.names):
        col = block[:, j]
        if (col == col[0]).all():
            return name, float(col[0])
    raise SchemaError(f"regime {label!r} has no constant column to infer its target")


def _parse_cond(spec):
    if not spec:
        return []
    out = []
    for item in spec.split(","):
        name, _, lag = item.partition(":")
        out.append((name.strip(), int(lag) if lag else 0))
    return out


def cmd_gen(args) -> int:
    if args.config:
        cfg = modelgen.config_from_json(pathlib.Path(args.config).read_text())
        if args.seed is not None:
            from dataclasses import replace

            cfg = replace(cfg, seed=args.seed)
    else:
        cfg = modelgen.GeneratorConfig(
            n_obs_vars=args.n_vars, seed=args.seed or 0, tau_max=args.tau_max
        )
    t_obs = args.t_obs or cfg.ts_length
    scm = modelgen.simulable_scm(cfg, T=t_obs, seed=cfg.seed)
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    obs = modelgen.simulate_obs(scm, t_obs, cfg.seed)
    (out / "obs.csv").write_text(write_csv(obs))
    (out / "scm.json").write_text(scm.to_json() + "\n")
    (out / "truth.json").write_text(
        graph_to_json(modelgen.true_pag(scm, cfg.tau_max)) + "\n"
    )
    for k, target in enumerate(args.int_target or []):
        if args.int_value and k < len(args.int_value):
            xi = args.int_value[k]
        else:
            xi = default_intervention_value(obs, target)
        run = modelgen.simulate_intervention(
            scm, target, xi, args.t_int, seed=cfg.seed + 1 + k
        )
        block = run.data.with_regime([data_mod.int_label(k)] * run.data.n_rows)
        (out / f"int_{k}.csv").write_text(write_csv(block))
    return 0


def cmd_metrics(args) -> int:
    est = graph_from_json(pathlib.Path(args.est).read_text())
    truth = graph_from_json(pathlib.Path(args.truth).read_text())
    report = score(est, truth, verbose=args.verbose)
    if args.bootstrap_of:
        values = [float(x) for x in args.bootstrap_of.split(",")]
        report.bootstrap = {"values": bootstrap_ci(values, args.n_boot, args.level)}
    sys.stdout.write(report.to_json() + "\n")
    return 0


def cmd_bench(args) -> int:
    if args.config:
        cfg = bench_mod.config_from_json(pathlib.Path(args.config).read_text())
    else:
        cfg = bench_mod.preset(args.preset)
    result = bench_mod.run_strategy(cfg, out_dir=args.out, jobs=args.jobs)
    failed = sum(1 for r in result.rows if r["error"])
    sys.stdout.write(
        f"{cfg.name}: {len(result.rows)} runs, {failed} failed, "
        f"outputs in {args.out}\n"
    )
    return 0


def cmd_robot(args) -> int:
    out = pathlib.Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    obs, run = robotsim.scenario_dataset(
        T_obs=args.t_obs,
        T_int=args.t_int,
        hide_h=args.hide_h,
        intervene_fc=args.intervene_fc,
        seed=args.seed,
    )
    (out / "obs.csv").write_text(write_csv(obs))
    (out / "truth.json").write_text(
        graph_to_json(robotsim.scenario_truth(hide_h=args.hide_h)) + "\n"
    )
    if run is not None:
        (out / "int_0.csv").write_text(write_csv(run.data))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalpool",
        description="Time-series causal discovery from pooled observational "
        "and interventional data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("discover", help="observational-only discovery")
    p.add_argument("--obs", required=True, help="observational CSV or JSON")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("candoit", help="pooled obs + interventional discovery")
    p.add_argument("--obs", required=True)
    p.add_argument("--int", action="append", default=[],
                   help="interventional CSV (repeatable)")
    p.add_argument("--target", action="append", default=[],
                   help="target variable of the matching --int file")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_candoit)

    p = sub.add_parser("ci", help="run a single conditional-independence query")
    p.add_argument("--data", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--lag", type=int, default=0, help="lag of x relative to y")
    p.add_argument("--cond", default="", help="comma list of name:lag items")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--test", choices=("parcorr", "rank", "perm"), default="parcorr")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("gen", help="generate a random system and its data")
    p.add_argument("--config", default=None, help="GeneratorConfig JSON path")
    p.add_argument("--n-vars", type=int, default=5)
    p.add_argument("--tau-max", type=int, default=3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--t-obs", type=int, default=None)
    p.add_argument("--t-int", type=int, default=300)
    p.add_argument("--int-target", action="append", default=[])
    p.add_argument("--int-value", action="append", type=float, default=[])
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("metrics", help="score an estimated graph against truth")
    p.add_argument("--est", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--verbose", action="store_true", help="emit the slot trace")
    p.add_argument("--bootstrap-of", default=None,
                   help="comma list of values to bootstrap alongside")
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--level", type=float, default=0.95)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", help="run a benchmark strategy")
    p.add_argument("--config", default=None, help="StrategyConfig JSON path")
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("robot", help="generate the robot-camera scenario")
    p.add_argument("--hide-h", action="store_true")
    p.add_argument("--intervene-fc", type=float, default=None)
    p.add_argument("--t-obs", type=int, default=600)
    p.add_argument("--t-int", type=int, default=125)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_robot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CausalPoolError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
