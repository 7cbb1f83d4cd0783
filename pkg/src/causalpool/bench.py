"""Config-driven benchmark harness.

Each run draws a random system, scores an observational-only baseline on
the full data budget, picks intervention targets from the ambiguous links
of the baseline graph, re-runs discovery on the reduced observational
budget pooled with interventional blocks, and scores every arm against the
generated ground truth. Runs are independent jobs with per-run seeds
derived from the strategy seed, so results reproduce bit-for-bit.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .data import Dataset, default_intervention_value
from .engine import EngineConfig
from .errors import CausalPoolError, ConfigError, NoAmbiguity
from .graph import TsPAG, ambiguous_edges, graph_to_json, to_dot
from .metrics import bootstrap_ci, score
from .modelgen import GeneratorConfig, simulable_scm, simulate_intervention, simulate_obs, true_pag
from .pooled import discover_obs, run as pooled_run

METRICS = ("fpr", "shd", "f1", "uncertainty", "pag_size")
ARMS = ("baseline", "candoit_mean", "candoit_best")

#: columns whose values legitimately differ between re-runs
VOLATILE_COLUMNS = (
    "timestamp",
    "baseline_time_s",
    "candoit_mean_time_s",
    "candoit_best_time_s",
)


@dataclass(frozen=True)
class StrategyConfig:
    """One benchmark strategy: generator template, budgets and sweep."""

    name: str
    generator: GeneratorConfig
    n_runs: int = 25
    obs_budget_baseline: int = 1300
    obs_budget_candoit: int = 1000
    int_budget_total: int = 300
    n_interventions: int | tuple = 1
    var_sweep: tuple | None = None
    alpha: float = 0.05
    tau_min: int = 0
    tau_max: int = 3
    max_cond_size: int = 3
    max_prelim_iters: int = 1
    ci_test: str = "parcorr"
    n_boot: int = 200
    ci_level: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.obs_budget_candoit + self.int_budget_total != self.obs_budget_baseline:
            raise ConfigError(
                "budget mismatch: baseline must equal candoit obs + interventional "
                f"({self.obs_budget_baseline} != {self.obs_budget_candoit} + "
                f"{self.int_budget_total})"
            )
        if self.var_sweep is not None:
            object.__setattr__(self, "var_sweep", tuple(self.var_sweep))
        if isinstance(self.n_interventions, (tuple, list)):
            object.__setattr__(self, "n_interventions", tuple(self.n_interventions))
        if self.n_runs < 1:
            raise ConfigError("n_runs must be positive")

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            alpha=self.alpha,
            tau_min=self.tau_min,
            tau_max=self.tau_max,
            max_cond_size=self.max_cond_size,
            max_prelim_iters=self.max_prelim_iters,
        )


def split_budget(total: int, n: int):
    """Equal split of interventional samples, leftovers to the first blocks."""
    if n < 1:
        raise ConfigError("need at least one intervention to split the budget")
    base = total // n
    extra = total % n
    return [base + (1 if i < extra else 0) for i in range(n)]


def ambiguity_origins(g: TsPAG):
    """Variables ranked by how many ambiguous edges they originate.

    The origin of a lagged edge is its earlier-time endpoint; both endpoints
    of a contemporaneous ambiguous edge count as origins. Ties break toward
    the lower variable index.
    """
    counts = {}
    for e in ambiguous_edges(g):
        counts[e.src] = counts.get(e.src, 0) + 1
        if e.lag == 0:
            counts[e.dst] = counts.get(e.dst, 0) + 1
    return sorted(
        (v for v in g.variables if counts.get(v, 0) > 0),
        key=lambda v: (-counts[v], g.index(v)),
    )


def select_targets(obs_graph: TsPAG, n: int):
    """Top-n intervention targets from the baseline graph's ambiguities.

    Raises :class:`NoAmbiguity` when the graph is fully oriented. If fewer
    than n variables originate ambiguity, the list is padded by total
    ambiguous-edge incidence.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    amb = ambiguous_edges(obs_graph)
    if not amb:
        raise NoAmbiguity("baseline graph has no ambiguous edges")
    chosen = ambiguity_origins(obs_graph)[:n]
    if len(chosen) < n:
        incidence = {}
        for e in amb:
            incidence[e.src] = incidence.get(e.src, 0) + 1
            incidence[e.dst] = incidence.get(e.dst, 0) + 1
        pad = sorted(
            (v for v in obs_graph.variables if incidence.get(v, 0) > 0 and v not in chosen),
            key=lambda v: (-incidence[v], obs_graph.index(v)),
        )
        chosen = chosen + pad[: n - len(chosen)]
    return chosen[:n]


# ---------------------------------------------------------------------------
# Single benchmark run


def _derived_seeds(root: int, point_idx: int, run_idx: int, n: int = 16):
    ss = np.random.SeedSequence([root, point_idx, run_idx])
    return [int(x) for x in ss.generate_state(n)]


def _stable_system(gen_cfg: GeneratorConfig, seeds, T: int):
    """Draw a system whose observational simulation stays within bounds."""
    scm = simulable_scm(replace(gen_cfg, seed=seeds[0]), T=T, seed=seeds[1])
    return scm, simulate_obs(scm, T, seeds[1])


def _metric_cells(prefix: str, report, elapsed: float):
    cells = {f"{prefix}_{m}": getattr(report, m) for m in METRICS}
    cells[f"{prefix}_time_s"] = elapsed
    return cells


def single_run(cfg: StrategyConfig, point_idx: int, run_idx: int):
    """One seeded benchmark run; returns (row dict, named graphs)."""
    sweep_name, sweep_value = _sweep_points(cfg)[point_idx]
    seeds = _derived_seeds(cfg.seed, point_idx, run_idx)
    n_vars = sweep_value if sweep_name == "n_obs_vars" else cfg.generator.n_obs_vars
    n_int = sweep_value if sweep_name == "n_interventions" else cfg.n_interventions
    gen_cfg = replace(
        cfg.generator, n_obs_vars=n_vars, ts_length=cfg.obs_budget_baseline
    )
    engine_cfg = cfg.engine_config()

    row = {
        "sweep_name": sweep_name,
        "sweep_value": sweep_value,
        "run": run_idx,
        "seed": seeds[0],
        "n_candidates": 0,
        "targets": "",
        "no_ambiguity": False,
        "error": "",
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    graphs = {}
    try:
        scm, baseline_obs = _stable_system(gen_cfg, seeds, cfg.obs_budget_baseline)
        truth = true_pag(scm, cfg.tau_max)
        candoit_obs = Dataset(
            baseline_obs.names, baseline_obs.values[: cfg.obs_budget_candoit]
        )

        start = time.perf_counter()
        baseline_graph = discover_obs(baseline_obs, engine_cfg, tester=cfg.ci_test)
        baseline_time = time.perf_counter() - start
        graphs["baseline"] = baseline_graph
        row.update(_metric_cells("baseline", score(baseline_graph, truth), baseline_time))

        candidates = _intervention_candidates(baseline_graph, n_int)
        if candidates is None:
            # baseline already fully oriented: nothing to intervene on
            row["no_ambiguity"] = True
            for metric in METRICS:
                row[f"candoit_mean_{metric}"] = row[f"baseline_{metric}"]
                row[f"candoit_best_{metric}"] = row[f"baseline_{metric}"]
            row["candoit_mean_time_s"] = 0.0
            row["candoit_best_time_s"] = 0.0
            return row, graphs

        budgets = split_budget(cfg.int_budget_total, n_int)
        assert cfg.obs_budget_candoit + sum(budgets) == cfg.obs_budget_baseline

        reports, times = [], []
        for c_idx, targets in enumerate(candidates):
            runs = []
            for k, target in enumerate(targets):
                xi = default_intervention_value(candoit_obs, target)
                runs.append(
                    simulate_intervention(scm, target, xi, budgets[k], seeds[4 + k])
                )
            assert baseline_obs.n_rows == candoit_obs.n_rows + sum(
                r.data.n_rows for r in runs
            )
            start = time.perf_counter()
            graph = pooled_run(candoit_obs, runs, engine_cfg, tester=cfg.ci_test)
            times.append(time.perf_counter() - start)
            reports.append(score(graph, truth))
            graphs["int_" + "+".join(targets)] = graph

        row["n_candidates"] = len(candidates)
        row["targets"] = ";".join("+".join(t) for t in candidates)
        best = max(range(len(reports)), key=lambda i: (reports[i].f1, -i))
        for metric in METRICS:
            values = [getattr(r, metric) for r in reports]
            row[f"candoit_mean_{metric}"] = float(np.mean(values))
            row[f"candoit_best_{metric}"] = getattr(reports[best], metric)
        row["candoit_mean_time_s"] = float(np.mean(times))
        row["candoit_best_time_s"] = times[best]
    except CausalPoolError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        for metric in METRICS:
            for arm in ARMS:
                row.setdefault(f"{arm}_{metric}", "")
        for arm in ARMS:
            row.setdefault(f"{arm}_time_s", "")
    return row, graphs


def _intervention_candidates(baseline_graph: TsPAG, n_int: int):
    """Target sets to try: one per origin for single interventions, one
    joint top-n set otherwise. None when the baseline has no ambiguity."""
    try:
        if n_int == 1:
            return [(v,) for v in ambiguity_origins(baseline_graph)] or None
        return [tuple(select_targets(baseline_graph, n_int))]
    except NoAmbiguity:
        return None


# ---------------------------------------------------------------------------
# Strategy driver


def _sweep_points(cfg: StrategyConfig):
    if cfg.var_sweep:
        return [("n_obs_vars", v) for v in cfg.var_sweep]
    if isinstance(cfg.n_interventions, tuple):
        return [("n_interventions", k) for k in cfg.n_interventions]
    return [("n_obs_vars", cfg.generator.n_obs_vars)]


@dataclass
class BenchResult:
    config: StrategyConfig
    rows: list
    aggregates: dict
    timing: list
    graphs: dict

    @property
    def columns(self):
        return _columns()


def _columns():
    cols = ["sweep_name", "sweep_value", "run", "seed"]
    for arm in ARMS:
        cols += [f"{arm}_{m}" for m in METRICS] + [f"{arm}_time_s"]
    cols += ["n_candidates", "targets", "no_ambiguity", "error", "timestamp"]
    return cols


def _task(args):
    cfg, point_idx, run_idx = args
    return single_run(cfg, point_idx, run_idx)


def run_strategy(cfg: StrategyConfig, out_dir=None, jobs: int = 1) -> BenchResult:
    """Execute a strategy: all sweep points, all runs, aggregation, output.

    Per-run failures are recorded in the row's error column and excluded
    from the aggregates; the sweep keeps going.
    """
    points = _sweep_points(cfg)
    tasks = [
        (cfg, point_idx, run_idx)
        for point_idx in range(len(points))
        for run_idx in range(cfg.n_runs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_task, tasks))
    else:
        outcomes = [_task(t) for t in tasks]

    rows, graphs = [], {}
    for (task_cfg, point_idx, run_idx), (row, run_graphs) in zip(tasks, outcomes):
        rows.append(row)
        for name, graph in run_graphs.items():
            graphs[f"point{point_idx}_run{run_idx:03d}_{name}"] = graph

    aggregates = _aggregate(cfg, points, rows)
    result = BenchResult(cfg, rows, aggregates, _timing(points, rows), graphs)
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result


def _aggregate(cfg: StrategyConfig, points, rows):
    out = {"strategy": cfg.name, "points": [], "volatile_columns": list(VOLATILE_COLUMNS)}
    for point_idx, (sweep_name, sweep_value) in enumerate(points):
        ok = [
            r
            for r in rows
            if r["sweep_name"] == sweep_name
            and r["sweep_value"] == sweep_value
            and not r["error"]
        ]
        entry = {
            "sweep_name": sweep_name,
            "sweep_value": sweep_value,
            "n_ok": len(ok),
            "n_failed": sum(
                1
                for r in rows
                if r["sweep_name"] == sweep_name
                and r["sweep_value"] == sweep_value
                and r["error"]
            ),
            "arms": {},
        }
        for arm in ARMS:
            arm_out = {}
            for metric in METRICS:
                values = [float(r[f"{arm}_{metric}"]) for r in ok]
                if values:
                    lo, hi = bootstrap_ci(
                        values, cfg.n_boot, cfg.ci_level,
                        seed=_derived_seeds(cfg.seed, point_idx, 999_999)[0],
                    )
                    arm_out[metric] = {
                        "mean": float(np.mean(values)),
                        "ci_lo": lo,
                        "ci_hi": hi,
                    }
                else:
                    arm_out[metric] = {"mean": None, "ci_lo": None, "ci_hi": None}
            entry["arms"][arm] = arm_out
        out["points"].append(entry)
    return out


def _timing(points, rows):
    """Wall-clock means, kept apart from aggregates because they never reproduce."""
    out = []
    for sweep_name, sweep_value in points:
        ok = [
            r
            for r in rows
            if r["sweep_name"] == sweep_name
            and r["sweep_value"] == sweep_value
            and not r["error"]
        ]
        entry = {"sweep_name": sweep_name, "sweep_value": sweep_value}
        for arm in ARMS:
            times = [float(r[f"{arm}_time_s"]) for r in ok]
            entry[f"{arm}_mean_time_s"] = float(np.mean(times)) if times else None
        out.append(entry)
    return out


# ---------------------------------------------------------------------------
# Serialization


def rows_to_csv(rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    cols = _columns()
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_format_cell(row.get(c, "")) for c in cols])
    return out.getvalue()


def _format_cell(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return value


def write_outputs(result: BenchResult, out_dir):
    import pathlib

    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(rows_to_csv(result.rows))
    (out / "aggregates.json").write_text(
        json.dumps(result.aggregates, indent=2, sort_keys=True) + "\n"
    )
    (out / "timing.json").write_text(
        json.dumps(result.timing, indent=2, sort_keys=True) + "\n"
    )
    graph_dir = out / "graphs"
    graph_dir.mkdir(exist_ok=True)
    for name, graph in sorted(result.graphs.items()):
        (graph_dir / f"{name}.dot").write_text(to_dot(graph))
        (graph_dir / f"{name}.json").write_text(graph_to_json(graph) + "\n")


def config_to_json(cfg: StrategyConfig) -> str:
    obj = asdict(cfg)
    gen = obj["generator"]
    if isinstance(gen.get("n_hidden"), tuple):
        gen["n_hidden"] = list(gen["n_hidden"])
    return json.dumps(obj, indent=2, sort_keys=True, default=list)


def config_from_json(text: str) -> StrategyConfig:
    obj = json.loads(text)
    gen = obj.pop("generator")
    if isinstance(gen.get("n_hidden"), list):
        gen["n_hidden"] = tuple(gen["n_hidden"])
    for key in ("coeff_range",):
        if key in gen:
            gen[key] = tuple(gen[key])
    if isinstance(obj.get("n_interventions"), list):
        obj["n_interventions"] = tuple(obj["n_interventions"])
    if isinstance(obj.get("var_sweep"), list):
        obj["var_sweep"] = tuple(obj["var_sweep"])
    return StrategyConfig(generator=GeneratorConfig(**gen), **obj)


# ---------------------------------------------------------------------------
# Presets


def preset(name: str) -> StrategyConfig:
    """Shipped strategy presets: desk-scale for quick runs, paper-scale sweeps."""
    linear = GeneratorConfig(
        n_obs_vars=5,
        link_density=3,
        n_hidden=(1, 3),
        n_confounded_per_hidden=3,
        tau_min=0,
        tau_max=3,
        coeff_range=(0.1, 0.5),
        operators=("+", "-"),
        functional_forms=("identity",),
        ts_length=1300,
    )
    if name == "desk":
        return StrategyConfig(
            name="desk", generator=linear, n_runs=10, var_sweep=(5, 7),
            n_boot=200, ci_level=0.9, seed=2024,
        )
    if name == "paper":
        return StrategyConfig(
            name="paper", generator=linear, n_runs=25,
            var_sweep=tuple(range(5, 13)), n_boot=1000, ci_level=0.95, seed=2024,
        )
    raise ConfigError(f"unknown preset {name!r}; choose 'desk' or 'paper'")
