"""End-to-end discovery on pooled observational and interventional data.

For every intervention run a context variable is appended to the dataset
and to the search graph: an exogenous two-valued column that is zero on
observational rows and equal to the intervention constant on its own block.
The context node enters the initial graph fully oriented into its target at
every lag, the exogeneity assumptions become background knowledge, and the
engine then runs on the pooled data alone. Context nodes and their edges
are stripped from the returned graph.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import data as _data
from .ci import RecordingTester, make_tester
from .data import Dataset, PooledDataset, context_name, pool
from .engine import BackgroundKnowledge, EngineConfig, discover_report
from .errors import DuplicateTarget, UnknownTarget
from .graph import LaggedEdge, Mark, TsPAG, fully_connected_pag, strip_context


def build_meta(obs: Dataset, runs, cfg: EngineConfig):
    """Pooled dataset, initial graph and background knowledge for a run set.

    The initial graph is the fully connected PAG over the system variables
    plus, per intervention k on target X, required edges C_X -> X at every
    lag of the window and required bidirected links between every pair of
    context nodes. Forbidden adjacencies keep each context node away from
    everything except its own target.
    """
    runs = list(runs)
    if not runs:
        raise ValueError(
            "build_meta needs at least one intervention run; use discover_obs "
            "for purely observational discovery"
        )
    targets = [run.target for run in runs]
    for target in targets:
        if target not in obs.names:
            raise UnknownTarget(f"intervention target {target!r} not observed")
    if len(set(targets)) != len(targets):
        raise DuplicateTarget(f"duplicate intervention targets in {targets}")
    if cfg.tau_min != 0:
        cfg = replace(cfg, tau_min=0)  # context links are instantaneous

    pooled = pool(obs, runs)
    system = fully_connected_pag(obs.names, cfg.tau_min, cfg.tau_max)
    cnames = [context_name(t) for t in targets]
    variables = tuple(obs.names) + tuple(cnames)

    required = set()
    for cname, target in zip(cnames, targets):
        for lag in range(cfg.tau_min, cfg.tau_max + 1):
            required.add(LaggedEdge(cname, lag, target, Mark.TAIL, Mark.HEAD))
    for i, a in enumerate(cnames):
        for b in cnames[i + 1 :]:
            required.add(LaggedEdge(a, 0, b, Mark.HEAD, Mark.HEAD))

    forbidden = set()
    for cname, target in zip(cnames, targets):
        for other in obs.names:
            if other != target:
                forbidden.add((cname, other, 0))

    bk = BackgroundKnowledge(frozenset(required), frozenset(forbidden))
    init = TsPAG(
        variables,
        cfg.tau_min,
        cfg.tau_max,
        set(system.edges) | required,
        context=cnames,
    )
    return pooled, init, bk


@dataclass
class PooledResult:
    """Everything a pooled discovery produced, pre- and post-strip."""

    graph: TsPAG
    meta_graph: TsPAG
    pooled: PooledDataset
    background: BackgroundKnowledge
    sepsets: dict
    n_ci_tests: int
    truncated_slots: set
    trace: list


def run_report(obs: Dataset, runs, cfg: EngineConfig, tester="parcorr",
               standardize=True) -> PooledResult:
    """Pooled discovery with full introspection of the run."""
    pooled, init, bk = build_meta(obs, runs, cfg)
    if cfg.tau_min != 0:
        cfg = replace(cfg, tau_min=0)
    if standardize:
        pooled_fit = _data.standardize(pooled)
    else:
        pooled_fit = pooled
    recorder = RecordingTester(make_tester(tester))
    meta_graph, report = discover_report(pooled_fit, cfg, init, bk, recorder)
    graph = strip_context(meta_graph)
    return PooledResult(
        graph=graph,
        meta_graph=meta_graph,
        pooled=pooled,
        background=bk,
        sepsets=report.sepsets,
        n_ci_tests=report.n_ci_tests,
        truncated_slots=report.truncated_slots,
        trace=recorder.calls,
    )


def run(obs: Dataset, runs, cfg: EngineConfig, tester="parcorr",
        standardize=True) -> TsPAG:
    """Pooled discovery; returns the system-only graph (context stripped)."""
    return run_report(obs, runs, cfg, tester, standardize).graph


def discover_obs(obs: Dataset, cfg: EngineConfig, tester="parcorr",
                 standardize=True) -> TsPAG:
    """Observational-only baseline: no context machinery at all."""
    graph, _ = discover_obs_report(obs, cfg, tester, standardize)
    return graph


def discover_obs_report(obs: Dataset, cfg: EngineConfig, tester="parcorr",
                        standardize=True):
    pooled = pool(obs, [])
    if standardize:
        pooled = _data.standardize(pooled)
    init = fully_connected_pag(obs.names, cfg.tau_min, cfg.tau_max)
    bk = BackgroundKnowledge()
    return discover_report(pooled, cfg, init, bk, make_tester(tester))
