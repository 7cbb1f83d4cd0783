"""Acceptance suite: one test per criterion, one printed pass/fail line each.

Every criterion runs at its stated tolerance with fixed seeds; the suite is
deterministic end to end.
"""

import time
from itertools import count

import numpy as np

from causalpool.bench import StrategyConfig, VOLATILE_COLUMNS, run_strategy, split_budget
from causalpool.ci import DSepOracle, CiQuery, parcorr_test, perm_test
from causalpool.data import Dataset, OBS, int_label, default_intervention_value, pool
from causalpool.engine import BackgroundKnowledge, EngineConfig, discover_report
from causalpool.errors import CausalPoolError
from causalpool.graph import LaggedEdge, Mark, TsPAG, fully_connected_pag
from causalpool.metrics import score
from causalpool.modelgen import (
    GeneratorConfig,
    random_scm,
    simulable_scm,
    simulate_intervention,
    simulate_obs,
    true_pag,
)
from causalpool.pooled import discover_obs, run_report
from causalpool import robotsim

T, H, C = Mark.TAIL, Mark.HEAD, Mark.CIRCLE
LINEAR = dict(operators=("+", "-"), functional_forms=("identity",))


def report(criterion, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"\n[{status}] criterion {criterion}: {detail}")
    assert ok, f"criterion {criterion} failed: {detail}"


def random_graph(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    tau_max = int(rng.integers(0, 3))
    names = tuple(f"X{i}" for i in range(n))
    edges = []
    marks_any = [T, H, C]
    for lag in range(1, tau_max + 1):
        for a in names:
            for b in names:
                if rng.random() < 0.4:
                    edges.append(
                        LaggedEdge(a, lag, b, marks_any[rng.integers(0, 3)],
                                   [H, C][rng.integers(0, 2)])
                    )
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if rng.random() < 0.4:
                edges.append(
                    LaggedEdge(a, 0, b, marks_any[rng.integers(0, 3)],
                               marks_any[rng.integers(0, 3)])
                )
    return TsPAG(names, 0, tau_max, edges)


def test_criterion_1_identity_and_definitions():
    start = time.perf_counter()
    for seed in range(100):
        g = random_graph(seed)
        rep = score(g, g)
        assert rep.shd == 0 and rep.f1 == 1.0 and rep.fpr == 0.0
        assert rep.pag_size == 2 ** rep.uncertainty
    elapsed = time.perf_counter() - start
    report(1, elapsed < 10, f"100 identity scores, pag_size == 2^uncertainty ({elapsed:.1f}s)")


def test_criterion_2_engine_oracle_soundness():
    start = time.perf_counter()
    bad = []
    for seed in range(50):
        n_obs = 3 + seed % 2
        tau_max = 1 + seed % 2
        cfg = GeneratorConfig(
            n_obs_vars=n_obs, link_density=3, n_hidden=0, tau_min=0,
            tau_max=tau_max, ts_length=100, seed=seed, **LINEAR,
        )
        scm = random_scm(cfg)
        truth = true_pag(scm, tau_max)
        init = fully_connected_pag(scm.observed, 0, tau_max)
        g, rep = discover_report(
            None, EngineConfig(tau_min=0, tau_max=tau_max), init,
            BackgroundKnowledge(), DSepOracle(scm.dag),
        )
        got = {e.slot: (e.mark_src, e.mark_dst) for e in g.edges}
        want = {e.slot: (e.mark_src, e.mark_dst) for e in truth.edges}
        if set(got) - set(want):
            bad.append((seed, "false adjacency"))
        if (set(want) - set(got)) and not rep.truncated_slots:
            bad.append((seed, "missing adjacency without truncation"))
        for slot in set(got) & set(want):
            for i in range(2):
                if got[slot][i] != C and got[slot][i] != want[slot][i]:
                    bad.append((seed, f"definite mark disagreement at {slot}"))
    elapsed = time.perf_counter() - start
    report(2, not bad and elapsed < 120,
           f"50 oracle runs, zero unsound decisions ({elapsed:.1f}s) {bad[:3]}")


def _lag0_reachable(dag, src, dst):
    """Directed reachability through contemporaneous edges only."""
    frontier, seen = [src], {src}
    while frontier:
        node = frontier.pop()
        if node == dst:
            return True
        for s, lag, d in dag.edges:
            if lag == 0 and s == node and d not in seen:
                seen.add(d)
                frontier.append(d)
    return False


def test_criterion_3_latent_confounder_semantics():
    start = time.perf_counter()
    collected, bad = 0, []
    for seed in count():
        if collected == 25:
            break
        cfg = GeneratorConfig(
            n_obs_vars=3, link_density=2, n_hidden=1, n_confounded_per_hidden=2,
            tau_min=0, tau_max=1, ts_length=100, seed=seed, **LINEAR,
        )
        scm = random_scm(cfg)
        children = sorted({d for s, _, d in scm.dag.edges if s == "H0"})
        a, b = children
        # need pure confounding on the contemporaneous slot: equal-lag hidden
        # terms and no same-slice ancestry between the two children
        if ("H0", 1, a) not in scm.dag.edges or ("H0", 1, b) not in scm.dag.edges:
            continue
        if _lag0_reachable(scm.dag, a, b) or _lag0_reachable(scm.dag, b, a):
            continue
        collected += 1
        truth = true_pag(scm, 1)
        t_edge = truth.edge_between(a, 0, b)
        if t_edge is None or (t_edge.mark_src, t_edge.mark_dst) != (H, H):
            bad.append((seed, "truth lacks the bidirected slot"))
            continue
        init = fully_connected_pag(scm.observed, 0, 1)
        g, _ = discover_report(
            None, EngineConfig(tau_min=0, tau_max=1), init,
            BackgroundKnowledge(), DSepOracle(scm.dag),
        )
        e = g.edge_between(a, 0, b)
        if e is None or T in (e.mark_src, e.mark_dst):
            bad.append((seed, f"tail or missing at confounded slot: {e}"))
    elapsed = time.perf_counter() - start
    report(3, not bad and elapsed < 120,
           f"25 confounded systems, no tails at the bidirected slot ({elapsed:.1f}s) {bad[:3]}")


def test_criterion_4_ci_calibration():
    start = time.perf_counter()
    hits = 0
    for seed in range(500):
        rng = np.random.default_rng(seed)
        d = pool(Dataset(("a", "b"), rng.normal(size=(1000, 2))), [])
        hits += parcorr_test(d, CiQuery(("a", 0), ("b", 0))).dependent
    null_rate = hits / 500

    agree = 0
    for seed in range(100):
        rng = np.random.default_rng(4000 + seed)
        c = rng.uniform(0.05, 0.3)
        x = rng.normal(size=300)
        y = c * x + rng.normal(size=300)
        d = pool(Dataset(("x", "y"), np.column_stack([x, y])), [])
        q = CiQuery(("x", 0), ("y", 0))
        agree += abs(parcorr_test(d, q).pvalue - perm_test(d, q, 199, seed).pvalue) <= 0.1
    elapsed = time.perf_counter() - start
    ok = 0.03 <= null_rate <= 0.07 and agree >= 90 and elapsed < 300
    report(4, ok, f"null rate {null_rate:.3f} in [0.03,0.07], "
                  f"perm agreement {agree}/100 >= 90 ({elapsed:.1f}s)")


def test_criterion_5_pooling_contract_on_100_runs():
    start = time.perf_counter()
    cfg = EngineConfig(alpha=0.05, tau_min=0, tau_max=1)
    failures = []
    for seed in range(100):
        gen = GeneratorConfig(
            n_obs_vars=3, link_density=2, n_hidden=seed % 2,
            n_confounded_per_hidden=2 if seed % 2 else None,
            tau_min=0, tau_max=1, ts_length=260, seed=seed, **LINEAR,
        )
        scm = random_scm(gen)
        try:
            obs = simulate_obs(scm, 200, seed=seed)
            target = scm.observed[seed % 3]
            xi = default_intervention_value(obs, target)
            iv = simulate_intervention(scm, target, xi, 60, seed=seed + 10_000)
            res = run_report(obs, [iv], cfg)
        except CausalPoolError as exc:
            failures.append((seed, f"run error {exc}"))
            continue
        for edge in res.background.required_edges:
            got = res.meta_graph.edge_between(edge.src, edge.lag, edge.dst)
            if got is None or (got.mark_src, got.mark_dst) != (T, H):
                failures.append((seed, f"required edge broken: {edge} -> {got}"))
        cname = res.pooled.context_names[0]
        if cname in res.graph.variables or any(
            cname in (e.src, e.dst) for e in res.graph.edges
        ):
            failures.append((seed, "context leaked through strip"))
        full = ((OBS, 200), (int_label(0), 60))
        for call in res.trace:
            if call["regimes"] != full or call["n_rows"] != 260:
                failures.append((seed, f"regime-sliced query: {call['regimes']}"))
                break
    elapsed = time.perf_counter() - start
    report(5, not failures,
           f"100 pooled runs keep required edges, strip context, and never "
           f"slice regimes ({elapsed:.1f}s) {failures[:3]}")


S2_DESK = StrategyConfig(
    name="s2-desk",
    generator=GeneratorConfig(
        n_obs_vars=5, link_density=3, n_hidden=1, n_confounded_per_hidden=3,
        tau_min=0, tau_max=3, coeff_range=(0.1, 0.5), ts_length=1300, seed=0,
        **LINEAR,
    ),
    n_runs=10, obs_budget_baseline=1300, obs_budget_candoit=1000,
    int_budget_total=300, n_interventions=1, alpha=0.05, tau_min=0, tau_max=3,
    n_boot=200, ci_level=0.90, seed=202,
)


def test_criterion_6_s2_direction():
    start = time.perf_counter()
    result = run_strategy(S2_DESK)
    point = result.aggregates["points"][0]
    assert point["n_failed"] == 0
    base = point["arms"]["baseline"]
    best = point["arms"]["candoit_best"]
    for arm in (base, best):
        for metric in ("uncertainty", "f1"):
            assert arm[metric]["ci_lo"] is not None
            assert arm[metric]["ci_hi"] is not None
    unc_ok = best["uncertainty"]["mean"] <= base["uncertainty"]["mean"]
    f1_ok = best["f1"]["mean"] >= base["f1"]["mean"]
    elapsed = time.perf_counter() - start
    report(6, unc_ok and f1_ok and elapsed < 1200,
           f"uncertainty {best['uncertainty']['mean']:.2f} <= "
           f"{base['uncertainty']['mean']:.2f}, f1 {best['f1']['mean']:.3f} >= "
           f"{base['f1']['mean']:.3f}, 90% CIs present ({elapsed:.1f}s)")


def test_criterion_7_multi_intervention_budget():
    assert split_budget(300, 3) == [100, 100, 100]
    assert split_budget(300, 2) == [150, 150]
    # structural check on an actual pooled dataset with three interventions
    gen = GeneratorConfig(
        n_obs_vars=4, link_density=2, n_hidden=0, tau_min=0, tau_max=1,
        ts_length=1300, seed=5, **LINEAR,
    )
    scm = random_scm(gen)
    obs = simulate_obs(scm, 1000, seed=0)
    runs = [
        simulate_intervention(scm, scm.observed[k], 2.0 + k, rows, seed=k)
        for k, rows in enumerate(split_budget(300, 3))
    ]
    pooled = pool(obs, runs)
    sizes = [sl.stop - sl.start for label, sl in pooled.blocks() if label != OBS]
    report(7, sizes == [100, 100, 100],
           f"interventional blocks sized {sizes}; 2-way split {split_budget(300, 2)}")


def test_criterion_8_robot_scenario():
    start = time.perf_counter()
    cfg = EngineConfig(alpha=0.05, tau_min=0, tau_max=1)
    obs_ok = pooled_ok = 0
    for seed in range(10):
        base_data, _ = robotsim.scenario_dataset(T_obs=600, hide_h=True, seed=seed)
        base = discover_obs(base_data, cfg)
        slot = base.edge_between(robotsim.FLOOR, 0, robotsim.CUBE)
        if slot is None or C in (slot.mark_src, slot.mark_dst) or (
            (slot.mark_src, slot.mark_dst) != (H, H)
        ):
            obs_ok += 1
        pobs, iv = robotsim.scenario_dataset(
            T_obs=475, T_int=125, hide_h=True, intervene_fc=0.8, seed=seed
        )
        res = run_report(pobs, [iv], cfg)
        pslot = res.graph.edge_between(robotsim.FLOOR, 0, robotsim.CUBE)
        if pslot is not None and (pslot.mark_src, pslot.mark_dst) == (H, H):
            pooled_ok += 1
    elapsed = time.perf_counter() - start
    report(8, obs_ok >= 6 and pooled_ok >= 6 and elapsed < 600,
           f"obs-only ambiguous/mis-marked {obs_ok}/10 >= 6, pooled bidirected "
           f"{pooled_ok}/10 >= 6 ({elapsed:.1f}s)")


def test_criterion_9_generator_conformance():
    start = time.perf_counter()
    for seed in range(200):
        if seed % 2 == 0:
            cfg = GeneratorConfig(  # linear family settings
                n_obs_vars=5 + seed % 3, link_density=3, n_hidden=(1, 3),
                n_confounded_per_hidden=3, tau_min=0, tau_max=3,
                coeff_range=(0.1, 0.5), ts_length=300, seed=seed, **LINEAR,
            )
        else:
            cfg = GeneratorConfig(  # nonlinear family settings
                n_obs_vars=5 + seed % 3, link_density=3, n_hidden=(1, 3),
                n_confounded_per_hidden=3, tau_min=0, tau_max=3,
                coeff_range=(0.1, 0.5), ts_length=300, seed=seed,
                operators=("+", "-", "*", "/"),
                functional_forms=("identity", "sin", "cos", "abs", "pow", "exp"),
            )
        scm = simulable_scm(cfg, T=300, seed=seed)
        for var, eq in scm.equations.items():
            obs_parents = [t for t in eq.terms if t.parent in scm.observed]
            assert len(obs_parents) <= 3
            for term in eq.terms:
                assert 0.1 <= term.coeff <= 0.5
                assert 0 <= term.lag <= 3
        data = simulate_obs(scm, 300, seed=seed)
        assert np.isfinite(data.values).all()
        assert np.abs(data.values).max() <= 1e6
    elapsed = time.perf_counter() - start
    report(9, elapsed < 120,
           f"200 systems conform: coeffs in [0.1,0.5], lags in [0,3], "
           f"<=3 observable parents, finite data ({elapsed:.1f}s)")


def test_criterion_10_cli_determinism(tmp_path):
    from causalpool.bench import config_to_json
    from causalpool.cli import main

    start = time.perf_counter()
    gen_flags = ["gen", "--n-vars", "3", "--tau-max", "1", "--seed", "9",
                 "--t-obs", "300", "--t-int", "100", "--int-target", "X0"]
    robot_flags = ["robot", "--hide-h", "--intervene-fc", "0.8", "--t-obs", "150",
                   "--t-int", "50", "--seed", "1"]
    bench_cfg = StrategyConfig(
        name="desk-scale-determinism",
        generator=GeneratorConfig(
            n_obs_vars=5, link_density=3, n_hidden=1, n_confounded_per_hidden=3,
            tau_min=0, tau_max=3, ts_length=1300, seed=0, **LINEAR,
        ),
        n_runs=2, obs_budget_baseline=1300, obs_budget_candoit=1000,
        int_budget_total=300, tau_max=3, n_boot=200, seed=77,
    )
    cfg_path = tmp_path / "bench.json"
    cfg_path.write_text(config_to_json(bench_cfg))

    outputs = {}
    for tag in ("first", "second"):
        base = tmp_path / tag
        gen_dir = base / "gen"
        assert main(gen_flags + ["--out-dir", str(gen_dir)]) == 0
        disc = base / "discover.json"
        assert main(["discover", "--obs", str(gen_dir / "obs.csv"),
                     "--tau-max", "1", "--out", str(disc)]) == 0
        cand = base / "candoit.json"
        assert main(["candoit", "--obs", str(gen_dir / "obs.csv"),
                     "--int", str(gen_dir / "int_0.csv"), "--target", "X0",
                     "--tau-max", "1", "--out", str(cand)]) == 0
        met = base / "metrics.json"
        import contextlib, io
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            assert main(["metrics", "--est", str(cand),
                         "--truth", str(gen_dir / "truth.json")]) == 0
        met.write_text(buf.getvalue())
        ci_out = io.StringIO()
        with contextlib.redirect_stdout(ci_out):
            assert main(["ci", "--data", str(gen_dir / "obs.csv"),
                         "--x", "X0", "--y", "X1", "--lag", "1"]) == 0
        robot_dir = base / "robot"
        assert main(robot_flags + ["--out-dir", str(robot_dir)]) == 0
        bench_dir = base / "bench"
        with contextlib.redirect_stdout(io.StringIO()):
            assert main(["bench", "--config", str(cfg_path),
                         "--out", str(bench_dir)]) == 0
        outputs[tag] = {
            "gen/obs.csv": (gen_dir / "obs.csv").read_text(),
            "gen/int_0.csv": (gen_dir / "int_0.csv").read_text(),
            "gen/truth.json": (gen_dir / "truth.json").read_text(),
            "gen/scm.json": (gen_dir / "scm.json").read_text(),
            "discover.json": disc.read_text(),
            "candoit.json": cand.read_text(),
            "metrics.json": met.read_text(),
            "ci.json": ci_out.getvalue(),
            "robot/obs.csv": (robot_dir / "obs.csv").read_text(),
            "robot/int_0.csv": (robot_dir / "int_0.csv").read_text(),
            "robot/truth.json": (robot_dir / "truth.json").read_text(),
            "bench/results.csv": _strip_volatile((bench_dir / "results.csv").read_text()),
            "bench/aggregates.json": (bench_dir / "aggregates.json").read_text(),
        }
        # DOT graphs from the bench run
        for dot in sorted((bench_dir / "graphs").glob("*.dot")):
            outputs[tag][f"graphs/{dot.name}"] = dot.read_text()
    mismatched = [k for k in outputs["first"] if outputs["first"][k] != outputs["second"][k]]
    elapsed = time.perf_counter() - start
    report(10, not mismatched,
           f"all CLI subcommands byte-identical across re-runs "
           f"(volatile columns excluded) ({elapsed:.1f}s) {mismatched[:3]}")


def _strip_volatile(csv_text):
    lines = csv_text.splitlines()
    header = lines[0].split(",")
    keep = [i for i, c in enumerate(header) if c not in VOLATILE_COLUMNS]
    out = []
    for line in lines:
        cells = line.split(",")
        out.append(",".join(cells[i] for i in keep))
    return "\n".join(out)
