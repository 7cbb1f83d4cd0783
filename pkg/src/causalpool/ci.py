"""Conditional-independence tests on pooled time-series data.

All testers consume whole pooled datasets; there is deliberately no way to
restrict a query to a regime subset, since independences tested on a slice
of the data can be unfaithful to the rest. Lag alignment never crosses a
regime boundary: rows whose lags would reach into the previous block are
dropped block by block.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from math import atanh, sqrt

import numpy as np
from scipy import stats

from .data import PooledDataset
from .errors import HiddenConditioning, SampleError, SingularCondSet
from .graph import TsDag

RIDGE = 1e-10


@dataclass(frozen=True)
class CiQuery:
    """One conditional-independence question: x _||_ y given cond at level alpha.

    ``x`` and ``y`` are (variable, lag) pairs, ``cond`` a collection of such
    pairs; lags are non-negative and relative to the reference time of y.
    """

    x: tuple
    y: tuple
    cond: frozenset = field(default_factory=frozenset)
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "x", (str(self.x[0]), int(self.x[1])))
        object.__setattr__(self, "y", (str(self.y[0]), int(self.y[1])))
        object.__setattr__(
            self, "cond", frozenset((str(v), int(l)) for v, l in self.cond)
        )
        if self.x == self.y:
            raise ValueError(f"query with x == y == {self.x}")
        if self.x in self.cond or self.y in self.cond:
            raise ValueError("x and y may not appear in the conditioning set")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0,1), got {self.alpha}")
        if self.x[1] < 0 or self.y[1] < 0 or any(l < 0 for _, l in self.cond):
            raise ValueError("lags must be non-negative")


@dataclass(frozen=True)
class CiResult:
    statistic: float
    pvalue: float
    dependent: bool
    effective_samples: int

    @classmethod
    def from_pvalue(cls, statistic, pvalue, alpha, n):
        pvalue = float(min(max(pvalue, 0.0), 1.0))
        return cls(float(statistic), pvalue, pvalue <= alpha, int(n))


# ---------------------------------------------------------------------------
# Lag alignment


def lagged_matrix(d: PooledDataset, items) -> np.ndarray:
    """Column-stack the requested (variable, lag) series, aligned per block.

    Within each regime block, row t of the output takes variable v at
    t - lag; the first max-lag rows of every block are dropped so no value
    bleeds across the observational/interventional concatenation boundary.
    """
    items = list(items)
    max_lag = max((lag for _, lag in items), default=0)
    name_to_col = {}
    matrix = d.matrix()
    for j, name in enumerate(d.all_names):
        name_to_col[name] = matrix[:, j]
    pieces = []
    for _, sl in d.blocks():
        n_block = sl.stop - sl.start
        if n_block <= max_lag:
            continue
        cols = []
        for var, lag in items:
            col = name_to_col[var]
            cols.append(col[sl.start + max_lag - lag : sl.stop - lag])
        pieces.append(np.column_stack(cols))
    if not pieces:
        raise SampleError("no rows survive lag alignment")
    return np.vstack(pieces)


def _aligned_xyz(d: PooledDataset, q: CiQuery):
    cond = sorted(q.cond)
    mat = lagged_matrix(d, [q.x, q.y] + cond)
    return mat[:, 0], mat[:, 1], mat[:, 2:]


# ---------------------------------------------------------------------------
# Fisher-z partial correlation


def _partial_corr(x, y, z):
    """Partial correlation of x and y given the columns of z."""
    n = x.shape[0]
    data = np.column_stack([x, y, z])
    data = data - data.mean(axis=0)
    cov = data.T @ data / max(n - 1, 1)
    k = z.shape[1]
    if k == 0:
        s = cov[:2, :2]
    else:
        czz = cov[2:, 2:] + RIDGE * np.eye(k)
        try:
            beta = np.linalg.solve(czz, cov[2:, :2])
        except np.linalg.LinAlgError:
            raise SingularCondSet(
                f"conditioning covariance singular for {k} regressors"
            ) from None
        s = cov[:2, :2] - cov[:2, 2:] @ beta
    var_x, var_y = s[0, 0], s[1, 1]
    if var_x < 1e-14 or var_y < 1e-14:
        # residual variance exhausted by the conditioning set
        return 0.0
    r = s[0, 1] / sqrt(var_x * var_y)
    return float(min(max(r, -1.0), 1.0))


def parcorr_test(d: PooledDataset, q: CiQuery) -> CiResult:
    """Fisher-z test of partial correlation over all pooled rows.

    The statistic is the partial correlation itself; the p-value comes from
    the Fisher transform with n - |cond| - 3 degrees of freedom.
    """
    x, y, z = _aligned_xyz(d, q)
    n = x.shape[0]
    if n < len(q.cond) + 3:
        raise SampleError(
            f"{n} effective samples for |cond|={len(q.cond)}; need {len(q.cond) + 3}"
        )
    r = _partial_corr(x, y, z)
    dof = n - len(q.cond) - 3
    if abs(r) >= 1.0:
        pvalue = 0.0
    else:
        zstat = sqrt(dof) * abs(atanh(r))
        pvalue = 2.0 * stats.norm.sf(zstat)
    return CiResult.from_pvalue(r, pvalue, q.alpha, n)


def rank_parcorr_test(d: PooledDataset, q: CiQuery) -> CiResult:
    """Spearman-rank variant: Fisher-z on rank-transformed columns.

    A cheap fallback for monotone nonlinear dependencies.
    """
    x, y, z = _aligned_xyz(d, q)
    n = x.shape[0]
    if n < len(q.cond) + 3:
        raise SampleError(
            f"{n} effective samples for |cond|={len(q.cond)}; need {len(q.cond) + 3}"
        )
    x = stats.rankdata(x)
    y = stats.rankdata(y)
    z = np.column_stack([stats.rankdata(z[:, j]) for j in range(z.shape[1])]) if z.size else z
    r = _partial_corr(x, y, z)
    dof = n - len(q.cond) - 3
    if abs(r) >= 1.0:
        pvalue = 0.0
    else:
        zstat = sqrt(dof) * abs(atanh(r))
        pvalue = 2.0 * stats.norm.sf(zstat)
    return CiResult.from_pvalue(r, pvalue, q.alpha, n)


# ---------------------------------------------------------------------------
# Permutation oracle


def perm_test(d: PooledDataset, q: CiQuery, n_perm: int = 500, seed: int = 0) -> CiResult:
    """Residual-permutation test used to calibrate the analytic tests.

    x and y are residualized on the conditioning columns (plus intercept);
    one residual vector is permuted ``n_perm`` times and the p-value is the
    add-one smoothed fraction of permuted |correlations| at or above the
    observed one.
    """
    if n_perm < 100:
        raise ValueError(f"n_perm must be at least 100, got {n_perm}")
    x, y, z = _aligned_xyz(d, q)
    n = x.shape[0]
    if n < len(q.cond) + 3:
        raise SampleError(
            f"{n} effective samples for |cond|={len(q.cond)}; need {len(q.cond) + 3}"
        )
    design = np.column_stack([np.ones(n), z])
    rx = x - design @ np.linalg.lstsq(design, x, rcond=None)[0]
    ry = y - design @ np.linalg.lstsq(design, y, rcond=None)[0]
    observed = _plain_corr(rx, ry)
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perm):
        perm = rng.permutation(n)
        if abs(_plain_corr(rx[perm], ry)) >= abs(observed) - 1e-15:
            hits += 1
    pvalue = (hits + 1) / (n_perm + 1)
    return CiResult.from_pvalue(observed, pvalue, q.alpha, n)


def _plain_corr(a, b):
    a = a - a.mean()
    b = b - b.mean()
    denom = sqrt(float(a @ a) * float(b @ b))
    if denom < 1e-14:
        return 0.0
    return float(a @ b / denom)


# ---------------------------------------------------------------------------
# d-separation oracle on the unrolled ground-truth DAG


class UnrolledDag:
    """The time-unrolled copy graph of a :class:`TsDag` over a finite horizon.

    Variables listed in ``static`` are timeless: they get a single node that
    every lagged instance of their outgoing edges attaches to. This is how
    exogenous context nodes enter ground-truth queries.
    """

    def __init__(self, dag: TsDag, horizon: int, static=()):
        if horizon < 2 * dag.tau_max + 1:
            raise ValueError(
                f"horizon {horizon} < 2*tau_max+1 = {2 * dag.tau_max + 1}"
            )
        self.dag = dag
        self.horizon = horizon
        self.static = frozenset(static)
        self.nodes = [(v, -1) for v in dag.variables if v in self.static]
        self.nodes += [
            (v, s) for s in range(horizon) for v in dag.variables if v not in self.static
        ]
        self.parents = {node: [] for node in self.nodes}
        self.children = {node: [] for node in self.nodes}
        for src, lag, dst in sorted(dag.edges):
            if dst in self.static:
                raise ValueError(f"static variable {dst!r} may not have parents")
            if src in self.static:
                for s in range(horizon):
                    if (src, -1) not in self.parents[(dst, s)]:
                        self.parents[(dst, s)].append((src, -1))
                        self.children[(src, -1)].append((dst, s))
            else:
                for s in range(horizon):
                    if s - lag >= 0:
                        self.parents[(dst, s)].append((src, s - lag))
                        self.children[(src, s - lag)].append((dst, s))

    def node_at(self, var: str, lag: int):
        """The node for ``var`` at lag steps before the reference (last) slice."""
        if var in self.static:
            return (var, -1)
        s = self.horizon - 1 - lag
        if s < 0:
            raise ValueError(f"lag {lag} exceeds horizon {self.horizon}")
        return (var, s)

    def ancestors(self, node):
        """Ancestors of ``node`` including itself."""
        seen = {node}
        queue = deque([node])
        while queue:
            for p in self.parents[queue.popleft()]:
                if p not in seen:
                    seen.add(p)
                    queue.append(p)
        return seen

    def d_separated(self, x, y, z) -> bool:
        """Reachability-based d-separation of nodes x and y given set z."""
        z = set(z)
        anc_z = set()
        for node in z:
            anc_z |= self.ancestors(node)
        # states: (node, 'down') reached via an edge into the node,
        #         (node, 'up') reached against an edge (or the start node)
        visited = set()
        queue = deque([(x, "up")])
        while queue:
            node, direction = queue.popleft()
            if (node, direction) in visited:
                continue
            visited.add((node, direction))
            if node == y:
                return False
            if direction == "up" and node not in z:
                for p in self.parents[node]:
                    queue.append((p, "up"))
                for c in self.children[node]:
                    queue.append((c, "down"))
            elif direction == "down":
                if node not in z:
                    for c in self.children[node]:
                        queue.append((c, "down"))
                if node in anc_z:
                    for p in self.parents[node]:
                        queue.append((p, "up"))
        return True


def dsep_oracle(dag: TsDag, q: CiQuery, horizon: int | None = None) -> bool:
    """True iff the query variables are d-separated in the unrolled DAG.

    Hidden variables take part in the graph but may not be conditioned on.
    """
    if horizon is None:
        horizon = 2 * dag.tau_max + 1
    hidden_cond = [v for v, _ in q.cond if v in dag.hidden]
    if hidden_cond:
        raise HiddenConditioning(f"conditioning on hidden variables {hidden_cond}")
    unrolled = UnrolledDag(dag, horizon)
    x = unrolled.node_at(*q.x)
    y = unrolled.node_at(*q.y)
    z = {unrolled.node_at(v, l) for v, l in q.cond}
    return unrolled.d_separated(x, y, z)


# ---------------------------------------------------------------------------
# Tester objects (uniform interface for the discovery engine)


class ParCorr:
    """Fisher-z partial-correlation tester."""

    name = "parcorr"

    def test(self, d: PooledDataset, q: CiQuery) -> CiResult:
        return parcorr_test(d, q)


class RankParCorr:
    """Spearman-rank partial-correlation tester."""

    name = "rank"

    def test(self, d: PooledDataset, q: CiQuery) -> CiResult:
        return rank_parcorr_test(d, q)


class PermutationTest:
    """Residual-permutation tester (slow; mainly for calibration)."""

    name = "perm"

    def __init__(self, n_perm: int = 500, seed: int = 0):
        self.n_perm = n_perm
        self.seed = seed

    def test(self, d: PooledDataset, q: CiQuery) -> CiResult:
        return perm_test(d, q, self.n_perm, self.seed)


class DSepOracle:
    """Answers queries from the ground-truth DAG instead of data.

    Context variables can be declared so queries mentioning them are mapped
    onto the intervention structure: the context node is treated as an
    exogenous parent of its target, which the oracle realizes by answering
    from a DAG augmented with an explicit context parent.
    """

    name = "oracle"

    def __init__(self, dag: TsDag, horizon: int | None = None, context_targets=None):
        self.horizon = horizon
        self.static = frozenset(context_targets or ())
        if context_targets:
            variables = tuple(dag.variables) + tuple(context_targets)
            edges = set(dag.edges)
            for cname, target in context_targets.items():
                edges.add((cname, 0, target))
            dag = TsDag(variables, dag.tau_max, edges, dag.hidden)
        self.dag = dag
        self._unrolled = None

    def _graph(self) -> UnrolledDag:
        if self._unrolled is None:
            horizon = self.horizon or 2 * self.dag.tau_max + 1
            self._unrolled = UnrolledDag(self.dag, horizon, static=self.static)
        return self._unrolled

    def test(self, d, q: CiQuery) -> CiResult:
        hidden_cond = [v for v, _ in q.cond if v in self.dag.hidden]
        if hidden_cond:
            raise HiddenConditioning(f"conditioning on hidden variables {hidden_cond}")
        g = self._graph()
        x = g.node_at(*q.x)
        y = g.node_at(*q.y)
        z = {g.node_at(v, l) for v, l in q.cond}
        separated = g.d_separated(x, y, z)
        pvalue = 1.0 if separated else 0.0
        statistic = 0.0 if separated else 1.0
        return CiResult.from_pvalue(statistic, pvalue, q.alpha, 0)


class RecordingTester:
    """Wrapper that logs every query together with the data it saw.

    The trace records total row count and the regime composition of the
    dataset used for each call, so downstream checks can assert that no
    query ever ran on a regime-sliced subset.
    """

    def __init__(self, inner):
        self.inner = inner
        self.name = getattr(inner, "name", "wrapped")
        self.calls = []

    def test(self, d, q: CiQuery) -> CiResult:
        if d is None:
            composition = None
        else:
            composition = tuple(
                (label, sl.stop - sl.start) for label, sl in d.blocks()
            )
        self.calls.append(
            {
                "query": q,
                "n_rows": None if d is None else d.n_rows,
                "regimes": composition,
            }
        )
        return self.inner.test(d, q)


TESTERS = {
    "parcorr": ParCorr,
    "rank": RankParCorr,
    "perm": PermutationTest,
}


def make_tester(selector):
    """Resolve a tester from a name or pass an object through unchanged."""
    if isinstance(selector, str):
        try:
            return TESTERS[selector]()
        except KeyError:
            raise ValueError(
                f"unknown tester {selector!r}; choose from {sorted(TESTERS)}"
            ) from None
    if not hasattr(selector, "test"):
        raise TypeError(f"tester {selector!r} lacks a .test(data, query) method")
    return selector
