import json

import numpy as np
import pytest

from causalpool.cli import main
from causalpool.data import load_csv
from causalpool.graph import graph_from_json


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def gen_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    code = run_cli(
        "gen", "--n-vars", "3", "--tau-max", "1", "--seed", "5",
        "--t-obs", "400", "--t-int", "120", "--int-target", "X1",
        "--out-dir", str(out),
    )
    assert code == 0
    return out


class TestGen:
    def test_outputs_exist(self, gen_dir):
        for name in ("obs.csv", "int_0.csv", "truth.json", "scm.json"):
            assert (gen_dir / name).exists()
        obs = load_csv((gen_dir / "obs.csv").read_text())
        assert obs.values.shape == (400, 3)
        block = load_csv((gen_dir / "int_0.csv").read_text())
        assert block.values.shape == (120, 3)
        assert list(block.regime) == ["int:0"] * 120
        assert np.ptp(block.column("X1")) == 0.0

    def test_deterministic(self, gen_dir, tmp_path):
        again = tmp_path / "again"
        run_cli(
            "gen", "--n-vars", "3", "--tau-max", "1", "--seed", "5",
            "--t-obs", "400", "--t-int", "120", "--int-target", "X1",
            "--out-dir", str(again),
        )
        for name in ("obs.csv", "int_0.csv", "truth.json", "scm.json"):
            assert (again / name).read_text() == (gen_dir / name).read_text()


class TestDiscoverAndCandoit:
    def test_discover_json_output(self, gen_dir, tmp_path):
        out = tmp_path / "g.json"
        code = run_cli(
            "discover", "--obs", str(gen_dir / "obs.csv"),
            "--tau-max", "1", "--out", str(out),
        )
        assert code == 0
        g = graph_from_json(out.read_text())
        assert g.variables == ("X0", "X1", "X2")

    def test_discover_dot_output(self, gen_dir, tmp_path):
        out = tmp_path / "g.dot"
        run_cli(
            "discover", "--obs", str(gen_dir / "obs.csv"),
            "--tau-max", "1", "--format", "dot", "--out", str(out),
        )
        assert out.read_text().startswith("digraph")

    def test_candoit_strips_context(self, gen_dir, tmp_path):
        out = tmp_path / "g.json"
        code = run_cli(
            "candoit", "--obs", str(gen_dir / "obs.csv"),
            "--int", str(gen_dir / "int_0.csv"), "--target", "X1",
            "--tau-max", "1", "--out", str(out),
        )
        assert code == 0
        g = graph_from_json(out.read_text())
        assert g.variables == ("X0", "X1", "X2")
        assert all("CX1" not in (e.src, e.dst) for e in g.edges)

    def test_candoit_deterministic(self, gen_dir, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            run_cli(
                "candoit", "--obs", str(gen_dir / "obs.csv"),
                "--int", str(gen_dir / "int_0.csv"), "--target", "X1",
                "--tau-max", "1", "--out", str(out),
            )
            outs.append(out.read_text())
        assert outs[0] == outs[1]


class TestMetricsCli:
    def test_score_against_truth(self, gen_dir, tmp_path, capsys):
        est = tmp_path / "est.json"
        run_cli(
            "discover", "--obs", str(gen_dir / "obs.csv"),
            "--tau-max", "1", "--out", str(est),
        )
        code = run_cli("metrics", "--est", str(est), "--truth", str(gen_dir / "truth.json"))
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report) >= {"fpr", "shd", "f1", "uncertainty", "pag_size", "counts"}
        assert report["pag_size"] == 2 ** report["uncertainty"]


class TestCiCli:
    def test_single_query(self, gen_dir, capsys):
        code = run_cli(
            "ci", "--data", str(gen_dir / "obs.csv"),
            "--x", "X0", "--y", "X1", "--lag", "1", "--alpha", "0.05",
        )
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert 0.0 <= out["pvalue"] <= 1.0
        assert out["effective_samples"] == 399

    def test_conditioning_spec(self, gen_dir, capsys):
        code = run_cli(
            "ci", "--data", str(gen_dir / "obs.csv"),
            "--x", "X0", "--y", "X2", "--cond", "X1:1,X0:1",
        )
        assert code == 0
        json.loads(capsys.readouterr().out)

    def test_pooled_regime_csv(self, gen_dir, tmp_path, capsys):
        # one file holding the obs block followed by the intervention block
        obs = (gen_dir / "obs.csv").read_text().splitlines()
        block = (gen_dir / "int_0.csv").read_text().splitlines()
        combined = tmp_path / "pooled.csv"
        combined.write_text("\n".join(obs + block[1:]) + "\n")
        code = run_cli(
            "ci", "--data", str(combined), "--x", "X0", "--y", "X1", "--lag", "1",
        )
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["effective_samples"] == 399 + 119


class TestRobotCli:
    def test_outputs_and_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            code = run_cli(
                "robot", "--hide-h", "--intervene-fc", "0.8",
                "--t-obs", "120", "--t-int", "40", "--seed", "3",
                "--out-dir", str(out),
            )
            assert code == 0
        for name in ("obs.csv", "int_0.csv", "truth.json"):
            assert (a / name).read_text() == (b / name).read_text()
        obs = load_csv((a / "obs.csv").read_text())
        assert obs.names == ("F_c", "C_c", "v", "d_c")

    def test_observational_only(self, tmp_path):
        out = tmp_path / "obs_only"
        run_cli("robot", "--t-obs", "50", "--out-dir", str(out))
        assert not (out / "int_0.csv").exists()
        obs = load_csv((out / "obs.csv").read_text())
        assert obs.values.shape == (50, 5)


class TestBenchCli:
    def test_config_driven_run(self, tmp_path):
        from causalpool.bench import config_to_json
        from causalpool.modelgen import GeneratorConfig
        from causalpool.bench import StrategyConfig

        cfg = StrategyConfig(
            name="cli-mini",
            generator=GeneratorConfig(
                n_obs_vars=3, link_density=2, n_hidden=0, tau_min=0, tau_max=1,
                operators=("+", "-"), functional_forms=("identity",),
                ts_length=260, seed=0,
            ),
            n_runs=1, obs_budget_baseline=260, obs_budget_candoit=200,
            int_budget_total=60, tau_max=1, n_boot=200, seed=2,
        )
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(config_to_json(cfg))
        out = tmp_path / "bench_out"
        code = run_cli("bench", "--config", str(cfg_path), "--out", str(out))
        assert code == 0
        assert (out / "results.csv").exists()
        assert (out / "aggregates.json").exists()


def test_error_exit_code(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n1,3\n")  # constant obs column
    assert run_cli("discover", "--obs", str(bad), "--tau-max", "1") == 1
