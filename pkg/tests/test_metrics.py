import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalpool.errors import EmptyInput, SchemaError
from causalpool.graph import LaggedEdge, Mark, TsPAG, fully_connected_pag
from causalpool.metrics import bootstrap_ci, score

T, H, C = Mark.TAIL, Mark.HEAD, Mark.CIRCLE


@st.composite
def random_pag(draw):
    n = draw(st.integers(1, 4))
    tau_max = draw(st.integers(0, 2))
    names = tuple(f"X{i}" for i in range(n))
    edges = []
    for lag in range(1, tau_max + 1):
        for a in names:
            for b in names:
                if draw(st.booleans()):
                    src = draw(st.sampled_from([T, H, C]))
                    edges.append(LaggedEdge(a, lag, b, src, draw(st.sampled_from([H, C]))))
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            if draw(st.booleans()):
                edges.append(
                    LaggedEdge(a, 0, b, draw(st.sampled_from([T, H, C])),
                               draw(st.sampled_from([T, H, C])))
                )
    return TsPAG(names, 0, tau_max, edges)


class TestScore:
    @given(random_pag())
    @settings(max_examples=60, deadline=None)
    def test_identity(self, g):
        rep = score(g, g)
        assert rep.shd == 0 and rep.f1 == 1.0 and rep.fpr == 0.0
        assert rep.counts["fp"] == rep.counts["fn"] == 0
        assert rep.pag_size == 2 ** rep.uncertainty

    def test_saturated_estimate_vs_empty_truth(self):
        est = fully_connected_pag(("X0", "X1", "X2"), 0, 1)
        truth = TsPAG(("X0", "X1", "X2"), 0, 1)
        rep = score(est, truth)
        assert rep.fpr == 1.0 and rep.f1 == 0.0
        assert rep.counts["tp"] == 0 and rep.counts["tn"] == 0

    def test_uncertainty_and_pag_size(self):
        edges = [
            LaggedEdge("X0", 0, "X1", C, C),
            LaggedEdge("X0", 1, "X1", C, H),
            LaggedEdge("X1", 1, "X2", C, H),
            LaggedEdge("X0", 1, "X2", T, H),
        ]
        est = TsPAG(("X0", "X1", "X2"), 0, 1, edges)
        rep = score(est, TsPAG(("X0", "X1", "X2"), 0, 1))
        assert rep.uncertainty == 3 and rep.pag_size == 8

    def test_mark_mismatch_counts_fp_and_fn_once(self):
        est = TsPAG(("A", "B"), 0, 1, [LaggedEdge("A", 1, "B", C, H)])
        truth = TsPAG(("A", "B"), 0, 1, [LaggedEdge("A", 1, "B", T, H)])
        rep = score(est, truth)
        # 5 slots total: the mismatch plus 4 empty ones (incl. autocorrelation)
        assert rep.counts == {"tp": 0, "fp": 1, "tn": 4, "fn": 1}
        assert rep.shd == 1

    def test_fpr_undefined_flag(self):
        g = fully_connected_pag(("A", "B"), 0, 0)
        rep = score(g, g)
        # truth is the complete graph: no negatives exist
        assert rep.fpr == 0.0 and not rep.fpr_defined

    def test_variable_mismatch(self):
        with pytest.raises(SchemaError):
            score(TsPAG(("A",), 0, 1), TsPAG(("B",), 0, 1))

    def test_window_mismatch(self):
        with pytest.raises(SchemaError):
            score(TsPAG(("A",), 0, 1), TsPAG(("A",), 0, 2))

    def test_verbose_slot_trace_consistent(self):
        est = TsPAG(("A", "B"), 0, 1, [LaggedEdge("A", 1, "B", C, H)])
        truth = TsPAG(("A", "B"), 0, 1, [LaggedEdge("B", 1, "A", T, H)])
        rep = score(est, truth, verbose=True)
        outcomes = [s["outcome"] for s in rep.slots]
        assert outcomes.count("fp") == 1 and outcomes.count("fn") == 1
        assert len(rep.slots) == 4 + 1  # 4 lagged ordered slots + 1 contemporaneous

    def test_lag0_orientation_insensitive(self):
        est = TsPAG(("A", "B"), 0, 0, [LaggedEdge("B", 0, "A", H, T)])
        truth = TsPAG(("A", "B"), 0, 0, [LaggedEdge("A", 0, "B", T, H)])
        assert score(est, truth).shd == 0

    @given(random_pag(), random_pag())
    @settings(max_examples=40, deadline=None)
    def test_counts_reproducible_from_slot_trace(self, est, truth):
        if est.variables != truth.variables or (est.tau_min, est.tau_max) != (
            truth.tau_min, truth.tau_max,
        ):
            return
        rep = score(est, truth, verbose=True)
        outcomes = [s["outcome"] for s in rep.slots]
        assert rep.counts["tp"] == outcomes.count("tp")
        assert rep.counts["tn"] == outcomes.count("tn")
        assert rep.counts["fp"] == outcomes.count("fp") + outcomes.count("mark-mismatch")
        assert rep.counts["fn"] == outcomes.count("fn") + outcomes.count("mark-mismatch")
        assert rep.shd == sum(o != "tp" and o != "tn" for o in outcomes)
        # every estimated adjacency lands in exactly one of tp / fp
        assert rep.counts["tp"] + rep.counts["fp"] == est.n_edges()


class TestBootstrap:
    def test_constant_values(self):
        assert bootstrap_ci([0.5] * 25, 1000, 0.95) == (0.5, 0.5)

    def test_contains_point_estimate(self):
        rng = np.random.default_rng(0)
        values = rng.uniform(0, 1, size=25)
        lo, hi = bootstrap_ci(values, 1000, 0.95)
        assert lo <= values.mean() <= hi

    def test_width_shrinks_with_sample_size(self):
        shrunk = 0
        for seed in range(50):
            rng = np.random.default_rng(seed)
            small = rng.uniform(0, 1, size=25)
            big = rng.uniform(0, 1, size=100)
            lo_s, hi_s = bootstrap_ci(small, 1000, 0.95, seed=seed)
            lo_b, hi_b = bootstrap_ci(big, 1000, 0.95, seed=seed)
            shrunk += (hi_b - lo_b) < (hi_s - lo_s)
        assert shrunk >= 40  # monotone in expectation

    def test_deterministic_given_seed(self):
        values = list(np.random.default_rng(5).normal(size=25))
        assert bootstrap_ci(values, 500, 0.9, seed=3) == bootstrap_ci(values, 500, 0.9, seed=3)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            bootstrap_ci([], 1000, 0.95)

    def test_n_boot_floor(self):
        with pytest.raises(ValueError):
            bootstrap_ci([1.0, 2.0], 50, 0.95)
