"""CLI tests: config validation, exit codes, artifact layout, determinism,
and the verify table. Everything drives cli.main(argv) in-process."""

import json
import os

import pytest

from dfs_frontier import cli
from dfs_frontier.cli import (RunConfig, build_parser, evaluate_criteria,
                              execute_run, main)
from dfs_frontier.diagnostics import RunReport
from dfs_frontier.errors import ConfigError, InvariantViolation
from dfs_frontier.oracle import SweepResult


class TestRunConfig:
    def test_epsilon_derives_p(self):
        cfg = RunConfig(n=60, epsilon=0.2, p=None, seed=1).validate()
        assert cfg.p == pytest.approx(1.2 / 60)

    def test_exactly_one_of_epsilon_p(self):
        with pytest.raises(ConfigError):
            RunConfig(n=60, epsilon=0.2, p=0.02, seed=1).validate()
        with pytest.raises(ConfigError):
            RunConfig(n=60, epsilon=None, p=None, seed=1).validate()

    def test_bounds(self):
        with pytest.raises(ConfigError):
            RunConfig(n=0, epsilon=0.1, p=None, seed=1).validate()
        with pytest.raises(ConfigError):
            RunConfig(n=10, epsilon=1.5, p=None, seed=1).validate()
        with pytest.raises(ConfigError):
            RunConfig(n=10, epsilon=None, p=1.5, seed=1).validate()
        with pytest.raises(ConfigError):
            RunConfig(n=10, epsilon=0.1, p=None, seed=1 << 64).validate()
        with pytest.raises(ConfigError):
            RunConfig(n=10, epsilon=0.1, p=None, seed=1,
                      checkpoint_stride=0).validate()
        with pytest.raises(ConfigError):
            RunConfig(n=10, epsilon=0.1, p=None, seed=1,
                      engine="turbo").validate()

    def test_reference_scale_cap(self):
        with pytest.raises(ConfigError):
            RunConfig(n=5001, epsilon=0.1, p=None, seed=1,
                      engine="reference").validate()
        RunConfig(n=5001, epsilon=0.1, p=None, seed=1,
                  engine="fast").validate()

    def test_design_band_warns_but_accepts(self, capsys):
        cfg = RunConfig(n=100, epsilon=0.7, p=None, seed=1).validate()
        assert cfg.p == pytest.approx(1.7 / 100)
        assert "design band" in capsys.readouterr().err


class TestRunCommand:
    def test_stdout_json(self, capsys):
        rc = main(["run", "--n", "60", "--epsilon", "0.2", "--seed", "5"])
        assert rc == 0
        report = json.loads(capsys.readouterr().out)
        assert report["config"] == {"n": 60, "epsilon": 0.2,
                                    "p": pytest.approx(1.2 / 60),
                                    "seed": 5, "engine": "fast"}
        assert report["max_U"] >= 1

    def test_out_dir_and_deterministic_rerun(self, tmp_path, capsys):
        args = ["run", "--n", "80", "--epsilon", "0.15", "--seed", "3",
                "--checkpoint-stride", "40"]
        d1, d2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(args + ["--out", d1]) == 0
        assert main(args + ["--out", d2]) == 0
        capsys.readouterr()
        for name in ("report.json", "trajectory.csv"):
            with open(os.path.join(d1, name)) as f1, \
                    open(os.path.join(d2, name)) as f2:
                assert f1.read() == f2.read(), name
        traj = open(os.path.join(d1, "trajectory.csv")).read().splitlines()
        assert traj[0] == "m,size_S,size_U,size_T,q_ST,q_SU,q_UT"
        assert len(traj) > 3  # stride 40 yields many interior checkpoints

    def test_engines_agree_through_cli(self, capsys):
        base = ["--n", "60", "--epsilon", "0.2", "--seed", "11"]
        assert main(["run"] + base + ["--engine", "reference"]) == 0
        ref = json.loads(capsys.readouterr().out)
        assert main(["run"] + base + ["--engine", "fast"]) == 0
        fast = json.loads(capsys.readouterr().out)
        assert ref["config"].pop("engine") == "reference"
        assert fast["config"].pop("engine") == "fast"
        assert ref == fast

    def test_both_epsilon_and_p_exits_2(self, capsys):
        rc = main(["run", "--n", "60", "--epsilon", "0.2", "--p", "0.02"])
        assert rc == 2
        assert "error:" in capsys.readouterr().err

    def test_reference_cap_exits_2(self, capsys):
        rc = main(["run", "--n", "6000", "--epsilon", "0.1",
                   "--engine", "reference"])
        assert rc == 2
        capsys.readouterr()

    def test_usage_error_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--epsilon", "0.2"])  # --n is required
        assert exc.value.code == 2
        capsys.readouterr()

    def test_invariant_violation_exits_3(self, capsys, monkeypatch):
        def broken(*args, **kwargs):
            raise InvariantViolation("ledger out of balance",
                                     context={"m": 17})

        monkeypatch.setattr(cli, "run_fast", broken)
        rc = main(["run", "--n", "60", "--epsilon", "0.2"])
        assert rc == 3
        err = capsys.readouterr().err
        assert "invariant violation" in err and "'m': 17" in err

    def test_env_seed_override(self, capsys, monkeypatch):
        monkeypatch.setenv("DFS_FRONTIER_BASE_SEED", "777")
        assert main(["run", "--n", "60", "--epsilon", "0.2",
                     "--seed", "5"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["config"]["seed"] == 777

    def test_env_seed_garbage_exits_2(self, capsys, monkeypatch):
        monkeypatch.setenv("DFS_FRONTIER_BASE_SEED", "lucky")
        assert main(["run", "--n", "60", "--epsilon", "0.2"]) == 2
        capsys.readouterr()


class TestSweepCommand:
    def sweep(self, out, extra=()):
        return main(["sweep", "--n", "60", "--epsilon", "0.2,0.3",
                     "--seeds", "2", "--seed", "9", "--out", out,
                     *extra])

    def test_layout(self, tmp_path, capsys):
        out = str(tmp_path / "sweep")
        assert self.sweep(out) == 0
        capsys.readouterr()
        cells = sorted(d for d in os.listdir(out)
                       if d.startswith("cell-"))
        assert cells == ["cell-n60-eps0.2", "cell-n60-eps0.3"]
        for cell in cells:
            files = sorted(os.listdir(os.path.join(out, cell)))
            assert files == ["aggregate.csv", "aggregate.json",
                             "report-seed10.json", "report-seed9.json",
                             "seeds.csv"]
        meta = json.load(open(os.path.join(out, "sweep_meta.json")))
        assert meta["base_seed"] == 9 and meta["seeds"] == 2
        assert meta["cells"] == [[60, 0.2], [60, 0.3]]
        assert os.path.exists(os.path.join(out, "plot.gnuplot"))

    def test_seed_derivation(self, tmp_path, capsys):
        out = str(tmp_path / "sweep")
        assert self.sweep(out) == 0
        capsys.readouterr()
        path = os.path.join(out, "cell-n60-eps0.2", "report-seed10.json")
        report = json.loads(open(path).read())
        assert report["config"]["seed"] == 10  # base 9 + index 1

    def test_rerun_is_byte_identical_modulo_meta(self, tmp_path, capsys):
        out1, out2 = str(tmp_path / "s1"), str(tmp_path / "s2")
        assert self.sweep(out1, ["--jobs", "2"]) == 0
        assert self.sweep(out2) == 0
        capsys.readouterr()
        for root, _dirs, files in os.walk(out1):
            rel = os.path.relpath(root, out1)
            for name in files:
                a = os.path.join(root, name)
                b = os.path.join(out2, rel, name)
                if name == "sweep_meta.json":
                    ma = json.load(open(a))
                    mb = json.load(open(b))
                    ma.pop("created_unix"), mb.pop("created_unix")
                    assert ma == mb
                else:
                    assert open(a).read() == open(b).read(), (rel, name)

    def test_budget_guard(self, tmp_path, capsys):
        rc = main(["sweep", "--n", "60", "--epsilon", "0.2",
                   "--seeds", "201", "--out", str(tmp_path / "x")])
        assert rc == 2
        assert "budget" in capsys.readouterr().err
        rc = main(["sweep", "--n", "60", "--epsilon", "0.2", "--seeds", "3",
                   "--out", str(tmp_path / "y"), "--budget", "2"])
        assert rc == 2
        capsys.readouterr()


def passing_report(n, eps, seed, **overrides):
    # Synthetic numbers sitting comfortably inside every verify band.
    e2n = eps * eps * n
    u = int(e2n * (1 + eps / 4))
    q_per_n = u / 2 * (1 + eps) / 2 + e2n / 4  # inside the ledger bracket
    fields = dict(
        config={"n": n, "epsilon": eps, "p": (1 + eps) / n, "seed": seed,
                "engine": "fast"},
        u_at_m1=u, q_UT_at_m1=int(q_per_n * n), max_U=u + 2,
        max_U_argmax_m=1000, longest_forest_path=u + 2, excess_total=1,
        giant_size=n // 10, second_size=50, T_p_at_m1=1 + eps ** 3,
        T_p_at_m2=1 - eps ** 4, first_giant_entry_m=n,
        dfs_query_total=n * n // 4)
    fields.update(overrides)
    return RunReport(**fields)


class TestVerifyCommand:
    def write_reports(self, directory, reports):
        os.makedirs(directory, exist_ok=True)
        paths = []
        for i, rep in enumerate(reports):
            path = os.path.join(directory, f"report-{i}.json")
            with open(path, "w") as f:
                f.write(rep.to_json())
            paths.append(path)
        return paths

    def make_suite(self):
        reports = []
        for eps, dev in ((0.1, 0.01), (0.2, 0.05)):
            for seed in range(3):
                n = 1_000_000
                u = int(eps * eps * n * (1 + dev))
                reports.append(passing_report(n, eps, seed, u_at_m1=u,
                                              max_U=u + 2,
                                              longest_forest_path=u + 2))
        return reports

    def test_passing_set(self, tmp_path, capsys):
        d = str(tmp_path / "reports")
        self.write_reports(d, self.make_suite())
        rc = main(["verify", d])
        out = capsys.readouterr().out
        assert rc == 0
        assert "FAIL" not in out
        assert out.count("PASS stack_at_m1") == 2  # one row per cell
        assert "PASS stack_trend" in out
        assert "0 fail" in out

    def test_failing_excess(self, tmp_path, capsys):
        reports = self.make_suite()
        # 7 eps^3 n at the eps=0.1 cell breaks the 6 eps^3 n excess bound.
        reports[0].excess_total = int(7 * 0.1 ** 3 * 1_000_000)
        d = str(tmp_path / "reports")
        self.write_reports(d, reports)
        rc = main(["verify", d])
        out = capsys.readouterr().out
        assert rc == 1
        assert "FAIL excess_bound" in out

    def test_trend_needs_two_cells(self, tmp_path, capsys):
        reports = [r for r in self.make_suite()
                   if r.config["epsilon"] == 0.1]
        d = str(tmp_path / "reports")
        self.write_reports(d, reports)
        assert main(["verify", d]) == 0
        assert "SKIP stack_trend" in capsys.readouterr().out

    def test_explicit_file_paths(self, tmp_path, capsys):
        paths = self.write_reports(str(tmp_path), self.make_suite())
        assert main(["verify", *paths]) == 0
        capsys.readouterr()

    def test_empty_dir_exits_2(self, tmp_path, capsys):
        d = str(tmp_path / "empty")
        os.makedirs(d)
        assert main(["verify", d]) == 2
        capsys.readouterr()

    def test_garbage_report_exits_2(self, tmp_path, capsys):
        path = str(tmp_path / "report-bad.json")
        with open(path, "w") as f:
            f.write("{not json")
        assert main(["verify", path]) == 2
        assert "cannot read report" in capsys.readouterr().err

    def test_margin_direction(self):
        rows = evaluate_criteria(self.make_suite())
        by_name = {}
        for row in rows:
            by_name.setdefault(row.criterion, []).append(row)
        for name, group in by_name.items():
            for row in group:
                if row.status == "PASS" and row.margin is not None:
                    assert row.margin >= 0, (name, row)


class TestEquivalenceCommand:
    def test_clean_sweep(self, capsys):
        rc = main(["equivalence", "--n-max", "3"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "11 graphs, 0 mismatches" in out

    def test_random_trials_flag(self, capsys):
        rc = main(["equivalence", "--n-max", "2", "--random-trials", "1",
                   "--seed", "4"])
        out = capsys.readouterr().out
        assert rc == 0
        assert "random trials: 4 graphs" in out

    def test_mismatch_exits_1(self, capsys, monkeypatch):
        fake = SweepResult(graphs_checked=3, mismatches=[
            {"label": "n2-mask1", "n": 2, "m": 1,
             "mismatches": ["report.max_U: reference=2 fast=3"]}],
            bundle_dirs=[])
        monkeypatch.setattr(cli, "equivalence_sweep",
                            lambda n_max, out_dir=None: fake)
        rc = main(["equivalence", "--n-max", "2"])
        out = capsys.readouterr().out
        assert rc == 1
        assert "mismatch n2-mask1" in out


class TestExecuteRun:
    def test_default_checkpoints_follow_epsilon(self):
        report, samples = execute_run(
            RunConfig(n=1000, epsilon=0.1, p=None, seed=2))
        assert [s.m for s in samples[:3]] == [0, 81818, 82727]
        assert report.u_at_m1 is not None

    def test_p_only_run_has_no_moment_metrics(self):
        report, samples = execute_run(
            RunConfig(n=500, epsilon=None, p=0.003, seed=2))
        assert report.u_at_m1 is None
        assert report.T_p_at_m1 is None
        assert [s.m for s in samples][0] == 0

    def test_parser_round_trip(self):
        parser = build_parser()
        args = parser.parse_args(["sweep", "--n", "100,200",
                                  "--epsilon", "0.1", "--seeds", "2",
                                  "--out", "x"])
        assert args.n == [100, 200] and args.epsilon == [0.1]
