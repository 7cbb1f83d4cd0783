"""Constraint-based discovery core.

The engine prunes a fully connected lag-windowed PAG with conditional-
independence tests and then orients endpoint marks with collider detection
(R0), the time-order rule, stationarity propagation and the first three
FCI mark-propagation rules. Orientation only ever upgrades circles to
definite marks, so background-knowledge edges (installed fully oriented)
can never be overwritten.

Context variables are treated as timeless: every lagged copy of a context
column aliases the same node, both in conditioning sets and in separating-
set bookkeeping. Pairs whose adjacency was forbidden a priori never enter
the graph, but their separating sets are still searched for once the
skeleton is stable, because collider orientation around an intervention
target needs them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .ci import CiQuery, make_tester
from .data import PooledDataset
from .errors import BackgroundConflict, SchemaError
from .graph import LaggedEdge, Mark, TsPAG

_PREF = {Mark.HEAD: 0, Mark.CIRCLE: 1, Mark.TAIL: 2}


@dataclass(frozen=True)
class EngineConfig:
    alpha: float = 0.05
    tau_min: int = 0
    tau_max: int = 1
    max_cond_size: int = 3
    max_prelim_iters: int = 1

    def __post_init__(self):
        if not 0 <= self.tau_min <= self.tau_max:
            raise SchemaError(f"invalid lag bounds [{self.tau_min}, {self.tau_max}]")
        if self.max_cond_size < 0:
            raise SchemaError("max_cond_size must be non-negative")
        if not 0.0 < self.alpha < 1.0:
            raise SchemaError(f"alpha must be in (0,1), got {self.alpha}")


@dataclass(frozen=True)
class BackgroundKnowledge:
    """Hard constraints: edges that must survive untouched, pairs that may never touch.

    ``required_edges`` hold fully oriented :class:`LaggedEdge` objects;
    ``forbidden_adjacencies`` hold (src, dst, lag) triples naming the slot
    between src(t-lag) and dst(t).
    """

    required_edges: frozenset = frozenset()
    forbidden_adjacencies: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "required_edges", frozenset(self.required_edges))
        object.__setattr__(
            self, "forbidden_adjacencies", frozenset(map(tuple, self.forbidden_adjacencies))
        )
        required_slots = {_adj_key(e.src, e.dst, e.lag) for e in self.required_edges}
        forbidden_slots = {_adj_key(a, b, l) for a, b, l in self.forbidden_adjacencies}
        if required_slots & forbidden_slots:
            raise BackgroundConflict("required and forbidden sets overlap")


def _adj_key(a, b, lag):
    if lag == 0:
        a, b = sorted((a, b))
    return (a, b, lag)


@dataclass
class EngineReport:
    n_ci_tests: int = 0
    sepsets: dict = field(default_factory=dict)
    truncated_slots: set = field(default_factory=set)


NO_SEPSET = None  # sentinel stored when a forbidden pair has no separating set


class _Engine:
    def __init__(self, d: PooledDataset, cfg: EngineConfig, init: TsPAG,
                 bk: BackgroundKnowledge, tester):
        if (cfg.tau_min, cfg.tau_max) != (init.tau_min, init.tau_max):
            raise SchemaError(
                f"config window [{cfg.tau_min}, {cfg.tau_max}] does not match init "
                f"window [{init.tau_min}, {init.tau_max}]"
            )
        self.d = d
        self.cfg = cfg
        self.tester = make_tester(tester)
        self.bk = bk
        self.vars = init.variables
        self.idx = init._index
        self.context = init.context
        self.tau_max = init.tau_max
        self.tau_min = init.tau_min
        self.marks = {}
        for e in init.edges:
            self.marks[e.slot] = [e.mark_src, e.mark_dst]
        self.required = {}
        for e in bk.required_edges:
            slot, flipped = self._canon(e.src, e.lag, e.dst)
            self.required[slot] = (
                [e.mark_dst, e.mark_src] if flipped else [e.mark_src, e.mark_dst]
            )
        self._validate_init()
        self.sepsets = {}
        self._cache = {}
        self.n_tests = 0
        self.truncated = set()

    # -- canonical storage helpers ------------------------------------------

    def _canon(self, src, lag, dst):
        """Canonical template slot plus whether the query orientation flipped."""
        if lag == 0 and self.idx[src] > self.idx[dst]:
            return (dst, 0, src), True
        return (src, lag, dst), False

    def _validate_init(self):
        for slot, marks in self.required.items():
            have = self.marks.get(slot)
            if have is None:
                raise BackgroundConflict(f"required edge {slot} missing from init")
            if tuple(have) != tuple(marks):
                raise BackgroundConflict(
                    f"required edge {slot} has marks {have}, expected {marks}"
                )
        for a, b, lag in self.bk.forbidden_adjacencies:
            slot, _ = self._canon(a, lag, b)
            if slot in self.marks:
                raise BackgroundConflict(f"forbidden adjacency {slot} present in init")

    def _alias(self, var, lag):
        return (var, 0) if var in self.context else (var, lag)

    # -- pair keys and separating sets --------------------------------------

    def _pairkey(self, va, sa, vb, sb):
        """Canonical key for the unordered window pair (va@sa, vb@sb).

        Context variables are timeless, so their offset collapses onto the
        other node's offset before keying.
        """
        if va in self.context:
            sa = sb
        if vb in self.context:
            sb = sa
        if sa == sb:
            if self.idx[va] > self.idx[vb]:
                va, vb = vb, va
            return (va, 0, vb)
        if sa > sb:
            return (va, sa - sb, vb)
        return (vb, sb - sa, va)

    def _in_sepset(self, sep, b_var, b_off, later_off):
        if b_var in self.context:
            return any(v == b_var for v, _ in sep)
        return (b_var, b_off - later_off) in sep

    # -- CI testing -----------------------------------------------------------

    def _test(self, x, y, cond):
        x = self._alias(*x)
        y = self._alias(*y)
        if (self.idx[x[0]], x[1]) > (self.idx[y[0]], y[1]):
            x, y = y, x
        cond = frozenset(cond) - {x, y}
        key = (x, y, cond)
        if key not in self._cache:
            q = CiQuery(x=x, y=y, cond=cond, alpha=self.cfg.alpha)
            self._cache[key] = self.tester.test(self.d, q)
            self.n_tests += 1
        return self._cache[key]

    # -- adjacency views ------------------------------------------------------

    def _cond_candidates(self, center, exclude, prefer):
        """Lag-or-contemporaneous window neighbors of center(t), aliased and ordered.

        ``exclude`` nodes (aliased) are dropped. With ``prefer`` set, likely
        non-descendants (arrowheads into the center) come first.
        """
        best = {}
        for (a, lag, b), marks in self.marks.items():
            if b == center and a != center:
                node, pref = self._alias(a, lag), _PREF[marks[1]]
            elif a == center and lag == 0:
                node, pref = self._alias(b, 0), _PREF[marks[0]]
            elif a == center and b == center:
                node, pref = self._alias(a, lag), _PREF[marks[1]]
            else:
                continue
            if node in exclude:
                continue
            if node not in best or pref < best[node]:
                best[node] = pref
        if prefer:
            return sorted(best, key=lambda n: (best[n], self.idx[n[0]], n[1]))
        return sorted(best, key=lambda n: (self.idx[n[0]], n[1]))

    # -- skeleton -------------------------------------------------------------

    def skeleton(self, prefer=False):
        """PC-style edge removal, bulk-synchronous per conditioning-set size."""
        for size in range(self.cfg.max_cond_size + 1):
            order = sorted(
                self.marks, key=lambda s: (self.idx[s[2]], self.idx[s[0]], s[1])
            )
            removals = []
            for slot in order:
                if slot in self.required:
                    continue
                sep = self._search_separating_set(slot, size, prefer)
                if sep is not None:
                    removals.append((slot, sep))
            for slot, sep in removals:
                src, lag, dst = slot
                del self.marks[slot]
                self.sepsets.setdefault(self._pairkey(src, lag, dst, 0), sep)
        self._record_truncation()
        self._forbidden_pair_sepsets()

    def _search_separating_set(self, slot, size, prefer):
        src, lag, dst = slot
        x = self._alias(src, lag)
        y = (dst, 0)
        sides = [self._cond_candidates(dst, {x, y}, prefer)]
        if lag == 0:
            sides.append(self._cond_candidates(src, {x, y}, prefer))
        tried = set()
        for candidates in sides:
            for subset in combinations(candidates, size):
                cond = frozenset(subset)
                if cond in tried:
                    continue
                tried.add(cond)
                if not self._test(x, y, cond).dependent:
                    return cond
        return None

    def _record_truncation(self):
        for slot in self.marks:
            if slot in self.required:
                continue
            src, lag, dst = slot
            x = self._alias(src, lag)
            n = len(self._cond_candidates(dst, {x, (dst, 0)}, False))
            if lag == 0:
                n = max(n, len(self._cond_candidates(src, {x, (dst, 0)}, False)))
            if n > self.cfg.max_cond_size:
                self.truncated.add(slot)

    def _forbidden_pair_sepsets(self):
        """Search separating sets for pre-removed pairs.

        Forbidden adjacencies never enter the graph, so the skeleton never
        records a separating set for them; collider orientation around an
        intervention target still needs one. The pair is marked NO_SEPSET
        when the search fails, which makes every rule skip it.
        """
        keys = {}
        for a, b, lag in sorted(self.bk.forbidden_adjacencies):
            key = self._pairkey(a, lag, b, 0)
            if key not in self.sepsets:
                keys[key] = (a, lag, b)
        for key in sorted(keys, key=lambda k: (self.idx[k[0]], k[1], self.idx[k[2]])):
            a, lag, b = keys[key]
            x = self._alias(a, lag)
            y = (b, 0)
            found = None
            tried = set()
            for size in range(self.cfg.max_cond_size + 1):
                sides = [
                    self._cond_candidates(b, {x, y}, False),
                    self._cond_candidates(a, {x, y}, False),
                ]
                for candidates in sides:
                    for subset in combinations(candidates, size):
                        cond = frozenset(subset)
                        if cond in tried:
                            continue
                        tried.add(cond)
                        if not self._test(x, y, cond).dependent:
                            found = cond
                            break
                    if found is not None:
                        break
                if found is not None:
                    break
            self.sepsets[key] = found if found is not None else NO_SEPSET

    # -- orientation ----------------------------------------------------------

    def _window_nodes(self):
        return [
            (v, s)
            for s in range(self.tau_max + 1)
            for v in self.vars
            if s == 0 or v not in self.context
        ]

    def _instance_nodes(self, var, offsets):
        """Window copies of ``var`` at the given offsets; one node if context."""
        if var in self.context:
            return [(var, 0)]
        return [(var, s) for s in offsets if 0 <= s <= self.tau_max]

    def _build_adjacency(self):
        """Window adjacency map; context nodes attach to every instance slice."""
        adj = {node: set() for node in self._window_nodes()}

        def connect(p, q):
            if p != q:
                adj[p].add(q)
                adj[q].add(p)

        for (a, lag, b) in self.marks:
            if a in self.context or b in self.context:
                ctx, other = (a, b) if a in self.context else (b, a)
                if other in self.context:
                    connect((ctx, 0), (other, 0))
                    continue
                top = self.tau_max if lag == 0 else self.tau_max - lag
                for s in range(0, top + 1):
                    connect((ctx, 0), (other, s))
                continue
            for s_dst in range(0, self.tau_max - lag + 1):
                connect((a, s_dst + lag), (b, s_dst))
        self._adj = {
            node: sorted(nbrs, key=lambda n: (self.idx[n[0]], n[1]))
            for node, nbrs in adj.items()
        }
        self._adjset = {node: set(nbrs) for node, nbrs in self._adj.items()}

    def _window_neighbors(self, node):
        return self._adj[node]

    def _window_adjacent(self, p, q):
        return q in self._adjset[p]

    def _slot_of(self, p, q):
        """Template slot for the window pair plus q's endpoint side."""
        (vp, sp), (vq, sq) = p, q
        if vp in self.context:
            sp = sq
        if vq in self.context:
            sq = sp
        if sp == sq:
            slot, flipped = self._canon(vp, 0, vq)
            return slot, ("src" if flipped else "dst")
        if sp > sq:
            return (vp, sp - sq, vq), "dst"
        return (vq, sq - sp, vp), "src"

    def _mark_at(self, p, q):
        """Current mark at q's endpoint of the edge between window nodes p, q."""
        slot, side = self._slot_of(p, q)
        marks = self.marks.get(slot)
        if marks is None:
            return None
        return marks[1] if side == "dst" else marks[0]

    def _set_mark_at(self, p, q, mark):
        """Upgrade the circle at q's endpoint of edge (p, q); no-op otherwise."""
        slot, side = self._slot_of(p, q)
        marks = self.marks.get(slot)
        if marks is None:
            return False
        pos = 1 if side == "dst" else 0
        if marks[pos] != Mark.CIRCLE or marks[pos] == mark:
            return False
        if mark == Mark.TAIL and pos == 1 and slot[1] > 0:
            return False  # time order: no tail at the later endpoint
        marks[pos] = mark
        return True

    def _sepset_for(self, a, c):
        key = self._pairkey(a[0], a[1], c[0], c[1])
        return self.sepsets.get(key, "missing")

    def _later_offset(self, a, c):
        offs = [s for v, s in (a, c) if v not in self.context]
        return min(offs) if offs else 0

    def orient(self):
        """Apply R0, time order and R1-R3 to fixpoint (stationarity is implicit)."""
        self._build_adjacency()
        self._rule_time_order()
        changed = True
        while changed:
            changed = self._rule_collider()
            changed |= self._rule_time_order()
            changed |= self._rule_r1()
            changed |= self._rule_r2()
            changed |= self._rule_r3()
            self._reassert_background()

    def _rule_time_order(self):
        changed = False
        for (src, lag, dst), marks in self.marks.items():
            if lag > 0 and marks[1] == Mark.CIRCLE:
                marks[1] = Mark.HEAD
                changed = True
        return changed

    def _alias_node(self, node):
        return (node[0], 0) if node[0] in self.context else node

    def _unshielded_triples(self):
        for b in self._window_nodes():
            nbrs = self._window_neighbors(b)
            for a, c in combinations(nbrs, 2):
                if self._alias_node(a) == self._alias_node(c):
                    continue
                if self._window_adjacent(a, c):
                    continue
                yield a, b, c

    def _rule_collider(self):
        changed = False
        for a, b, c in self._unshielded_triples():
            sep = self._sepset_for(a, c)
            if sep == "missing" or sep is NO_SEPSET:
                continue
            if self._in_sepset(sep, b[0], b[1], self._later_offset(a, c)):
                continue
            changed |= self._set_mark_at(a, b, Mark.HEAD)
            changed |= self._set_mark_at(c, b, Mark.HEAD)
        return changed

    def _rule_r1(self):
        # A *-> B o-* C with A, C non-adjacent and B in sepset(A, C): B -> C
        changed = False
        for a, b, c in self._unshielded_triples():
            for a_, c_ in ((a, c), (c, a)):
                if self._mark_at(a_, b) != Mark.HEAD:
                    continue
                if self._mark_at(c_, b) != Mark.CIRCLE:
                    continue
                if self._mark_at(b, c_) == Mark.TAIL:
                    continue  # would have to flip a definite mark
                sep = self._sepset_for(a_, c_)
                if sep == "missing" or sep is NO_SEPSET:
                    continue
                if not self._in_sepset(sep, b[0], b[1], self._later_offset(a_, c_)):
                    continue
                slot, side_of_b = self._slot_of(c_, b)
                if slot[1] > 0 and side_of_b == "dst":
                    continue  # tail may not land on the later endpoint
                if self._set_mark_at(b, c_, Mark.HEAD) | self._set_mark_at(c_, b, Mark.TAIL):
                    changed = True
        return changed

    def _rule_r2(self):
        # A -> B *-> C or A *-> B -> C, and circle at C on A *-o C: head at C
        changed = False
        for b in self._window_nodes():
            nbrs = self._window_neighbors(b)
            for a in nbrs:
                for c in nbrs:
                    if a == c or self._alias_node(a) == self._alias_node(c):
                        continue
                    if not self._window_adjacent(a, c):
                        continue
                    if self._mark_at(a, c) != Mark.CIRCLE:
                        continue
                    chain_one = (
                        self._mark_at(b, a) == Mark.TAIL
                        and self._mark_at(a, b) == Mark.HEAD
                        and self._mark_at(b, c) == Mark.HEAD
                    )
                    chain_two = (
                        self._mark_at(a, b) == Mark.HEAD
                        and self._mark_at(c, b) == Mark.TAIL
                        and self._mark_at(b, c) == Mark.HEAD
                    )
                    if chain_one or chain_two:
                        changed |= self._set_mark_at(a, c, Mark.HEAD)
        return changed

    def _rule_r3(self):
        # A *-> B <-* C, A *-o D o-* C, A, C non-adjacent, D *-o B: head at B
        changed = False
        for a, b, c in self._unshielded_triples():
            if self._mark_at(a, b) != Mark.HEAD or self._mark_at(c, b) != Mark.HEAD:
                continue
            for d in self._window_neighbors(b):
                if d in (a, c):
                    continue
                if not (self._window_adjacent(a, d) and self._window_adjacent(c, d)):
                    continue
                if self._mark_at(a, d) != Mark.CIRCLE:
                    continue
                if self._mark_at(c, d) != Mark.CIRCLE:
                    continue
                if self._mark_at(d, b) != Mark.CIRCLE:
                    continue
                changed |= self._set_mark_at(d, b, Mark.HEAD)
        return changed

    def _reassert_background(self):
        for slot, marks in self.required.items():
            have = self.marks.get(slot)
            if have is None:
                raise BackgroundConflict(f"required edge {slot} was removed")
            if tuple(have) != tuple(marks):
                raise BackgroundConflict(
                    f"required edge {slot} re-marked to {have}"
                )

    # -- lifecycle ------------------------------------------------------------

    def reset_marks(self):
        """Drop orientations gathered so far; keep adjacency and background."""
        for slot, marks in self.marks.items():
            if slot in self.required:
                marks[:] = list(self.required[slot])
            elif slot[1] > 0:
                marks[:] = [Mark.CIRCLE, Mark.HEAD]
            else:
                marks[:] = [Mark.CIRCLE, Mark.CIRCLE]

    def to_pag(self) -> TsPAG:
        edges = [
            LaggedEdge(src, lag, dst, marks[0], marks[1])
            for (src, lag, dst), marks in self.marks.items()
        ]
        return TsPAG(self.vars, self.tau_min, self.tau_max, edges, self.context)

    def report(self) -> EngineReport:
        return EngineReport(
            n_ci_tests=self.n_tests,
            sepsets=dict(self.sepsets),
            truncated_slots=set(self.truncated),
        )


# ---------------------------------------------------------------------------
# Public operations


def skeleton_phase(d, cfg: EngineConfig, g: TsPAG, bk: BackgroundKnowledge, tester,
                   prefer_nondescendants=False):
    """One full skeleton sweep; returns the pruned graph and separating sets."""
    eng = _Engine(d, cfg, g, bk, tester)
    eng.skeleton(prefer=prefer_nondescendants)
    return eng.to_pag(), eng.report().sepsets


def orient_phase(g: TsPAG, sepsets, bk: BackgroundKnowledge) -> TsPAG:
    """Apply the orientation rules to a skeleton with recorded separating sets."""
    eng = _Engine(None, EngineConfig(tau_min=g.tau_min, tau_max=g.tau_max),
                  g, bk, _NullTester())
    eng.sepsets = dict(sepsets)
    eng.orient()
    return eng.to_pag()


class _NullTester:
    name = "null"

    def test(self, d, q):  # pragma: no cover - orientation never tests
        raise RuntimeError("orientation phase must not run CI tests")


def discover(d, cfg: EngineConfig, init: TsPAG, bk: BackgroundKnowledge, tester) -> TsPAG:
    """Full discovery: skeleton, preliminary re-sweep, final orientation."""
    graph, _ = discover_report(d, cfg, init, bk, tester)
    return graph


def discover_report(d, cfg: EngineConfig, init: TsPAG, bk: BackgroundKnowledge, tester):
    """Like :func:`discover` but also returns the engine report."""
    eng = _Engine(d, cfg, init, bk, tester)
    eng.skeleton(prefer=False)
    eng.orient()
    for _ in range(cfg.max_prelim_iters):
        before = set(eng.marks)
        eng.skeleton(prefer=True)
        if set(eng.marks) == before:
            break
    eng.reset_marks()
    eng.orient()
    return eng.to_pag(), eng.report()
