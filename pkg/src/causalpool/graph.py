"""Lag-windowed mixed graphs with three-valued endpoint marks.

A :class:`TsPAG` stores one template edge per (source, lag, destination)
slot; the template is interpreted as repeating at every time slice
(stationarity). Endpoint marks take the values tail, head or circle, so the
same structure represents DAGs, MAGs and PAGs over a window of
``tau_max + 1`` layers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum

from .errors import (
    EdgeNotFound,
    EmptyGraph,
    IllegalOrientation,
    SchemaError,
    ShapeError,
)


class Mark(str, Enum):
    TAIL = "-"
    HEAD = ">"
    CIRCLE = "o"

    def __repr__(self):
        return f"Mark.{self.name}"


@dataclass(frozen=True, order=True)
class LaggedEdge:
    """An edge between ``src`` at time t-lag and ``dst`` at time t.

    ``mark_src`` sits at the ``src`` endpoint, ``mark_dst`` at ``dst``. For
    contemporaneous edges the canonical storage order puts the lower
    variable index first (handled by :class:`TsPAG`).
    """

    src: str
    lag: int
    dst: str
    mark_src: Mark
    mark_dst: Mark

    def __post_init__(self):
        if self.lag < 0:
            raise ShapeError(f"negative lag on edge {self}")
        if self.lag == 0 and self.src == self.dst:
            raise IllegalOrientation(f"self edge at lag 0 on {self.src}")
        if self.lag > 0 and self.mark_dst == Mark.TAIL:
            raise IllegalOrientation(
                f"{self.dst}(t) cannot be an ancestor of {self.src}(t-{self.lag})"
            )

    @property
    def slot(self):
        return (self.src, self.lag, self.dst)

    def is_ambiguous(self) -> bool:
        return Mark.CIRCLE in (self.mark_src, self.mark_dst)

    def __str__(self):
        left = {Mark.TAIL: "-", Mark.HEAD: "<", Mark.CIRCLE: "o"}[self.mark_src]
        right = {Mark.TAIL: "-", Mark.HEAD: ">", Mark.CIRCLE: "o"}[self.mark_dst]
        return f"{self.src}(t-{self.lag}) {left}-{right} {self.dst}(t)"


def _flip(edge: LaggedEdge) -> LaggedEdge:
    return LaggedEdge(edge.dst, 0, edge.src, edge.mark_dst, edge.mark_src)


class TsPAG:
    """A partial ancestral graph over a window of time lags.

    Parameters
    ----------
    variables : sequence of str
        Ordered variable identifiers; context variables must be included.
    tau_min, tau_max : int
        Window bounds; the graph spans layers t-tau_max .. t.
    edges : iterable of LaggedEdge
        Template edges; lag-0 edges are canonicalized to ascending variable
        index on construction.
    context : iterable of str, optional
        Subset of ``variables`` flagged as context nodes.
    """

    def __init__(self, variables, tau_min, tau_max, edges=(), context=()):
        variables = tuple(variables)
        if not variables:
            raise EmptyGraph("graph needs at least one variable")
        if len(set(variables)) != len(variables):
            raise SchemaError(f"duplicate variables {variables}")
        if not (0 <= tau_min <= tau_max):
            raise ShapeError(f"invalid window [{tau_min}, {tau_max}]")
        context = frozenset(context)
        if not context <= set(variables):
            raise SchemaError("context names must be listed among variables")
        if context and tau_min != 0:
            raise ShapeError("tau_min must be 0 when context nodes are present")
        index = {v: i for i, v in enumerate(variables)}
        canon = {}
        for e in edges:
            if e.src not in index or e.dst not in index:
                raise SchemaError(f"edge {e} uses unknown variables")
            if e.lag > tau_max:
                raise ShapeError(f"edge {e} exceeds tau_max={tau_max}")
            if e.lag == 0 and index[e.src] > index[e.dst]:
                e = _flip(e)
            if e.slot in canon:
                raise SchemaError(f"duplicate edge slot {e.slot}")
            canon[e.slot] = e
        self.variables = variables
        self.tau_min = tau_min
        self.tau_max = tau_max
        self.context = context
        self._index = index
        self._edges = canon

    # -- basic queries ------------------------------------------------------

    @property
    def edges(self):
        return frozenset(self._edges.values())

    def sorted_edges(self):
        return sorted(self._edges.values())

    def n_edges(self) -> int:
        return len(self._edges)

    def index(self, var: str) -> int:
        try:
            return self._index[var]
        except KeyError:
            raise SchemaError(f"no variable named {var!r}") from None

    def edge_between(self, src: str, lag: int, dst: str):
        """The stored edge linking src(t-lag) and dst(t), or None.

        For lag 0 the lookup is orientation-insensitive; the returned edge
        is reported with ``src``/``dst`` as queried (marks swapped if the
        canonical storage order differs).
        """
        if lag == 0 and self.index(src) > self.index(dst):
            e = self._edges.get((dst, 0, src))
            return None if e is None else _flip(e)
        return self._edges.get((src, lag, dst))

    def has_edge(self, src: str, lag: int, dst: str) -> bool:
        return self.edge_between(src, lag, dst) is not None

    def replace_edges(self, edges) -> "TsPAG":
        return TsPAG(self.variables, self.tau_min, self.tau_max, edges, self.context)

    def __eq__(self, other):
        return (
            isinstance(other, TsPAG)
            and self.variables == other.variables
            and self.tau_min == other.tau_min
            and self.tau_max == other.tau_max
            and self.context == other.context
            and self._edges == other._edges
        )

    def __hash__(self):
        return hash(
            (self.variables, self.tau_min, self.tau_max, self.context, self.edges)
        )

    def __repr__(self):
        return (
            f"TsPAG(vars={list(self.variables)}, window=[{self.tau_min},"
            f" {self.tau_max}], edges={self.n_edges()})"
        )


# ---------------------------------------------------------------------------
# Operations


def fully_connected_pag(variables, tau_min, tau_max) -> TsPAG:
    """The discovery starting point: o-> on lagged slots, o-o on lag 0.

    Lagged slots cover every ordered pair (autocorrelation included) at each
    lag in [max(1, tau_min), tau_max]; contemporaneous slots cover every
    unordered pair when tau_min == 0.
    """
    variables = tuple(variables)
    if not variables:
        raise EmptyGraph("graph needs at least one variable")
    edges = []
    for lag in range(max(1, tau_min), tau_max + 1):
        for src in variables:
            for dst in variables:
                edges.append(LaggedEdge(src, lag, dst, Mark.CIRCLE, Mark.HEAD))
    if tau_min == 0:
        for i, src in enumerate(variables):
            for dst in variables[i + 1 :]:
                edges.append(LaggedEdge(src, 0, dst, Mark.CIRCLE, Mark.CIRCLE))
    return TsPAG(variables, tau_min, tau_max, edges)


def set_mark(g: TsPAG, src: str, lag: int, dst: str, side: str, mark: Mark) -> TsPAG:
    """Return a copy of ``g`` with one endpoint mark changed.

    ``side`` is ``"src"`` or ``"dst"`` relative to the (src, lag, dst)
    locator. Time order is enforced: the (later) dst endpoint of a lagged
    edge can never receive a tail.
    """
    edge = g.edge_between(src, lag, dst)
    if edge is None:
        raise EdgeNotFound(f"no edge between {src}(t-{lag}) and {dst}(t)")
    if side not in ("src", "dst"):
        raise ValueError(f"side must be 'src' or 'dst', got {side!r}")
    if side == "src":
        edge = replace(edge, mark_src=Mark(mark))
    else:
        edge = replace(edge, mark_dst=Mark(mark))
    edges = [e for e in g.edges if not _same_slot(e, edge, g)]
    edges.append(edge)
    return g.replace_edges(edges)


def _same_slot(e: LaggedEdge, other: LaggedEdge, g: TsPAG) -> bool:
    if e.slot == other.slot:
        return True
    return (
        e.lag == 0
        and other.lag == 0
        and e.slot == (other.dst, 0, other.src)
    )


def ambiguous_edges(g: TsPAG):
    """Edges carrying at least one circle mark, each counted once."""
    return [e for e in g.sorted_edges() if e.is_ambiguous()]


def strip_context(g: TsPAG) -> TsPAG:
    """Drop context nodes and every edge incident to one."""
    if not g.context:
        return g
    variables = tuple(v for v in g.variables if v not in g.context)
    edges = [
        e
        for e in g.edges
        if e.src not in g.context and e.dst not in g.context
    ]
    return TsPAG(variables, g.tau_min, g.tau_max, edges, context=())


_DOT_STYLE = {Mark.TAIL: "none", Mark.HEAD: "normal", Mark.CIRCLE: "odot"}


def _node_id(var: str, lag: int, g: TsPAG) -> str:
    if var in g.context:
        return var
    return f"{var}_t" if lag == 0 else f"{var}_tm{lag}"


def to_dot(g: TsPAG) -> str:
    """Deterministic DOT text; layers are ranked left-to-right by lag.

    Endpoint marks map to arrowhead styles (tail=none, head=normal,
    circle=odot). Context nodes are drawn once, without a time suffix.
    """
    lines = ["digraph G {", "  rankdir=LR;"]
    for lag in range(g.tau_max, g.tau_min - 1, -1):
        members = [
            f'"{_node_id(v, lag, g)}"' for v in g.variables if v not in g.context
        ]
        if members:
            lines.append(f"  {{ rank=same; {' '.join(members)} }}")
    for v in g.variables:
        if v in g.context:
            lines.append(f'  "{v}" [shape=box];')
        else:
            for lag in range(g.tau_min, g.tau_max + 1):
                lines.append(f'  "{_node_id(v, lag, g)}";')
    for e in g.sorted_edges():
        if e.dst in g.context and e.src not in g.context:
            # keep the context node on the tail side regardless of storage order
            e = _flip(e)
        if e.src in g.context:
            # context edges address the lag-th layer copy of the target
            src_id, dst_id = e.src, _node_id(e.dst, e.lag, g)
        else:
            src_id, dst_id = _node_id(e.src, e.lag, g), _node_id(e.dst, 0, g)
        lines.append(
            f'  "{src_id}" -> "{dst_id}" '
            f"[dir=both arrowtail={_DOT_STYLE[e.mark_src]} "
            f"arrowhead={_DOT_STYLE[e.mark_dst]}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# JSON serialization


def graph_to_json(g: TsPAG) -> str:
    return json.dumps(
        {
            "variables": list(g.variables),
            "tau_min": g.tau_min,
            "tau_max": g.tau_max,
            "context": sorted(g.context),
            "edges": [
                {
                    "src": e.src,
                    "lag": e.lag,
                    "dst": e.dst,
                    "mark_src": e.mark_src.value,
                    "mark_dst": e.mark_dst.value,
                }
                for e in g.sorted_edges()
            ],
        },
        indent=2,
        sort_keys=True,
    )


def graph_from_json(text: str) -> TsPAG:
    obj = json.loads(text)
    edges = [
        LaggedEdge(
            e["src"], int(e["lag"]), e["dst"], Mark(e["mark_src"]), Mark(e["mark_dst"])
        )
        for e in obj["edges"]
    ]
    return TsPAG(
        obj["variables"], int(obj["tau_min"]), int(obj["tau_max"]), edges,
        obj.get("context", ()),
    )


# ---------------------------------------------------------------------------
# Ground-truth DAGs


class TsDag:
    """A fully oriented lag-windowed DAG with optional hidden variables.

    Edges are (src, lag, dst) triples read as src(t-lag) -> dst(t); the
    time-unrolled graph must be acyclic, which reduces to acyclicity of the
    contemporaneous subgraph. Hidden variables must confound at least two
    observables.
    """

    def __init__(self, variables, tau_max, edges, hidden=()):
        variables = tuple(variables)
        if not variables:
            raise EmptyGraph("graph needs at least one variable")
        hidden = frozenset(hidden)
        if not hidden <= set(variables):
            raise SchemaError("hidden names must be listed among variables")
        self.variables = variables
        self.tau_max = int(tau_max)
        self.hidden = hidden
        self.edges = frozenset((str(s), int(l), str(d)) for s, l, d in edges)
        self._validate()

    def _validate(self):
        names = set(self.variables)
        for src, lag, dst in self.edges:
            if src not in names or dst not in names:
                raise SchemaError(f"edge ({src},{lag},{dst}) uses unknown variables")
            if not 0 <= lag <= self.tau_max:
                raise ShapeError(f"edge lag {lag} outside [0, {self.tau_max}]")
            if lag == 0 and src == dst:
                raise IllegalOrientation(f"self edge at lag 0 on {src}")
        self._check_contemporaneous_acyclic()
        for h in self.hidden:
            children = {d for s, _, d in self.edges if s == h and d not in self.hidden}
            if len(children) < 2:
                raise SchemaError(
                    f"hidden variable {h!r} must confound at least two observables"
                )
            if any(d in self.hidden or s in self.hidden for s, _, d in self.edges if d == h):
                raise SchemaError(f"hidden variable {h!r} may not have hidden parents")

    def _check_contemporaneous_acyclic(self):
        adj = {v: [] for v in self.variables}
        for src, lag, dst in self.edges:
            if lag == 0:
                adj[src].append(dst)
        state = {v: 0 for v in self.variables}

        def visit(v):
            state[v] = 1
            for w in adj[v]:
                if state[w] == 1 or (state[w] == 0 and visit(w)):
                    return True
            state[v] = 2
            return False

        for v in self.variables:
            if state[v] == 0 and visit(v):
                raise IllegalOrientation("contemporaneous edges form a cycle")

    @property
    def observed(self):
        return tuple(v for v in self.variables if v not in self.hidden)

    def parents(self, var: str):
        """(parent, lag) pairs of ``var`` at reference time t."""
        return sorted((s, l) for s, l, d in self.edges if d == var)

    def to_pag(self, tau_min=0) -> TsPAG:
        """The fully observed window graph with tail/head marks."""
        edges = [
            LaggedEdge(s, l, d, Mark.TAIL, Mark.HEAD)
            for s, l, d in self.edges
            if l >= tau_min
        ]
        return TsPAG(self.variables, tau_min, self.tau_max, edges)

    def __eq__(self, other):
        return (
            isinstance(other, TsDag)
            and self.variables == other.variables
            and self.tau_max == other.tau_max
            and self.hidden == other.hidden
            and self.edges == other.edges
        )

    def __repr__(self):
        return (
            f"TsDag(vars={list(self.variables)}, tau_max={self.tau_max}, "
            f"edges={len(self.edges)}, hidden={sorted(self.hidden)})"
        )
