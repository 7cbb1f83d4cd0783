"""Scoring of estimated graphs against ground truth.

All bookkeeping happens per (pair, lag) slot over the shared window. A slot
adjacent in both graphs counts as a true positive only when both endpoint
marks match exactly; a shared adjacency with any mark mismatch counts once
as a false positive and once as a false negative. SHD counts slots needing
an edit, one per slot regardless of how many marks differ.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, SchemaError
from .graph import TsPAG, ambiguous_edges


@dataclass
class MetricsReport:
    fpr: float
    shd: int
    f1: float
    uncertainty: int
    pag_size: int
    counts: dict
    fpr_defined: bool = True
    bootstrap: dict | None = None
    slots: list | None = None

    def to_dict(self):
        out = {
            "fpr": self.fpr,
            "shd": self.shd,
            "f1": self.f1,
            "uncertainty": self.uncertainty,
            "pag_size": self.pag_size,
            "counts": dict(self.counts),
            "fpr_defined": self.fpr_defined,
        }
        if self.bootstrap is not None:
            out["bootstrap"] = {k: list(v) for k, v in self.bootstrap.items()}
        if self.slots is not None:
            out["slots"] = self.slots
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _slot_universe(g: TsPAG):
    names = g.variables
    for lag in range(max(1, g.tau_min), g.tau_max + 1):
        for src in names:
            for dst in names:
                yield (src, lag, dst)
    if g.tau_min == 0:
        for i, src in enumerate(names):
            for dst in names[i + 1 :]:
                yield (src, 0, dst)


def score(est: TsPAG, truth: TsPAG, verbose=False) -> MetricsReport:
    """Adjacency-and-orientation confusion counts plus the derived metrics.

    With ``verbose`` the report carries a per-slot trace of the decisions.
    """
    if est.variables != truth.variables:
        raise SchemaError(
            f"variable mismatch: {est.variables} vs {truth.variables}"
        )
    if (est.tau_min, est.tau_max) != (truth.tau_min, truth.tau_max):
        raise SchemaError(
            f"window mismatch: [{est.tau_min},{est.tau_max}] vs "
            f"[{truth.tau_min},{truth.tau_max}]"
        )
    tp = fp = tn = fn = 0
    shd = 0
    trace = [] if verbose else None
    for src, lag, dst in _slot_universe(est):
        e = est.edge_between(src, lag, dst)
        t = truth.edge_between(src, lag, dst)
        if e is None and t is None:
            tn += 1
            outcome = "tn"
        elif e is not None and t is None:
            fp += 1
            shd += 1
            outcome = "fp"
        elif e is None and t is not None:
            fn += 1
            shd += 1
            outcome = "fn"
        else:
            if (e.mark_src, e.mark_dst) == (t.mark_src, t.mark_dst):
                tp += 1
                outcome = "tp"
            else:
                fp += 1
                fn += 1
                shd += 1
                outcome = "mark-mismatch"
        if verbose:
            trace.append(
                {
                    "slot": [src, lag, dst],
                    "est": None if e is None else [e.mark_src.value, e.mark_dst.value],
                    "truth": None if t is None else [t.mark_src.value, t.mark_dst.value],
                    "outcome": outcome,
                }
            )
    if fp + tn > 0:
        fpr, fpr_defined = fp / (fp + tn), True
    else:
        fpr, fpr_defined = 0.0, False
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom > 0 else 1.0
    uncertainty = len(ambiguous_edges(est))
    return MetricsReport(
        fpr=fpr,
        shd=shd,
        f1=f1,
        uncertainty=uncertainty,
        pag_size=2 ** uncertainty,
        counts={"tp": tp, "fp": fp, "tn": tn, "fn": fn},
        fpr_defined=fpr_defined,
        slots=trace,
    )


def bootstrap_ci(values, n_boot: int = 1000, level: float = 0.95, seed: int = 0):
    """Percentile bootstrap interval for the mean of ``values``."""
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise EmptyInput("bootstrap needs at least one value")
    if n_boot < 100:
        raise ValueError(f"n_boot must be at least 100, got {n_boot}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0,1), got {level}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, values.size, size=(n_boot, values.size))
    means = values[idx].mean(axis=1)
    lo, hi = np.percentile(means, [50 * (1 - level), 50 * (1 + level)])
    return float(lo), float(hi)
