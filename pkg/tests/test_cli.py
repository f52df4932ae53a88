import json
import time

import numpy as np
import pytest
from conftest import ZeroField

from esds.benchmark import RunConfig, run_corpus, run_motion, sweep_storage
from esds.cli import _config_from_args, build_parser, main
from esds.dynamics import StabilizedDS
from esds.gains import GainParams
from esds.plotting import field_arrows, plot_motion_svg
from esds.regression import GmrRegressor
from esds.synthetic import gen_synthetic, make_demonstrations
from esds.training import build_training_pairs, preprocess


def small_config(corpus, out=None, **kw):
    base = dict(corpus=str(corpus), out_dir=None if out is None else str(out),
                backend="gmr", k_candidates=(1, 2), demos_used=3,
                downsample_t=40, max_steps=20_000, seed=0)
    base.update(kw)
    return RunConfig(**base)


@pytest.fixture(scope="module")
def corpus_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    gen_synthetic(root / "line", "line", n_demos=3, samples=60, noise=0.0,
                  seed=0)
    gen_synthetic(root / "arc", "arc", n_demos=3, samples=60, noise=0.3,
                  seed=1)
    return root


class TestSynth:
    def test_same_seed_identical_files(self, tmp_path):
        a = gen_synthetic(tmp_path / "a", "scurve", samples=40, noise=0.5,
                          seed=7)
        b = gen_synthetic(tmp_path / "b", "scurve", samples=40, noise=0.5,
                          seed=7)
        for fname in ("corpus.json", "demo_00.csv", "demo_02.csv"):
            assert (a / fname).read_bytes() == (b / fname).read_bytes()

    def test_line_is_collinear(self, tmp_path):
        gen_synthetic(tmp_path / "m", "line", samples=50, noise=0.0, seed=0)
        from esds.training import load_motion_corpus

        demo = load_motion_corpus(tmp_path / "m").demos[0]
        p0, p1 = demo.positions[0], demo.positions[-2]
        d = (p1 - p0) / np.linalg.norm(p1 - p0)
        rel = demo.positions - p0
        cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
        assert np.abs(cross).max() < 1e-12 * np.linalg.norm(p0)

    def test_scurve_endpoints_fixed(self):
        demos = make_demonstrations("scurve", n_demos=2, samples=40, noise=1.0,
                                    seed=3)
        for d in demos:
            np.testing.assert_array_equal(d.positions[0], demos[0].positions[0])
            np.testing.assert_array_equal(d.positions[-1], [0.0, 0.0])

    def test_velocity_columns_present(self, tmp_path):
        gen_synthetic(tmp_path / "m", "arc", samples=40, seed=0)
        header = (tmp_path / "m" / "demo_00.csv").read_text().splitlines()[0]
        assert header == "t,x1,x2,v1,v2"


class TestRunMotion:
    def test_clean_line_reproduces_exactly(self, corpus_root):
        config = small_config(corpus_root / "line", k_candidates=(1,))
        report, artifacts = run_motion(config, corpus_root / "line")
        assert report.sea < 1e-6
        assert report.vrmse < 1e-6
        assert report.k_selected == 1
        assert all(report.converged)

    def test_selects_richer_mixture_for_curved_motion(self, tmp_path):
        gen_synthetic(tmp_path / "s", "scurve", n_demos=3, samples=120,
                      noise=0.3, seed=2)
        config = small_config(tmp_path / "s", k_candidates=(1, 5),
                              downsample_t=100)
        report, _ = run_motion(config, tmp_path / "s")
        assert report.k_selected == 5

    def test_audit_summary_is_clean(self, corpus_root):
        config = small_config(corpus_root / "arc")
        report, _ = run_motion(config, corpus_root / "arc")
        assert report.audit["positive_rate_fraction"] == 0.0
        assert report.audit["max_energy_jump"] <= 1e-6 * 1e4
        assert report.audit["max_tank_violation"] <= 1e-9 * max(
            report.storage_cap, 1.0
        )


class TestRunCorpus:
    def test_reports_and_artifacts(self, corpus_root, tmp_path):
        out = tmp_path / "out"
        config = small_config(corpus_root, out=out)
        summary = run_corpus(config)
        names = [m["motion"] for m in summary["motions"]]
        assert names == ["arc", "line"]
        assert summary["failures"] == []
        agg = summary["aggregate"]["sea"]
        seas = [m["sea"] for m in summary["motions"]]
        assert agg["mean"] == pytest.approx(np.mean(seas))
        assert agg["min"] == pytest.approx(min(seas))
        assert agg["max"] == pytest.approx(max(seas))
        assert (out / "report.json").exists()
        assert (out / "report.csv").exists()
        assert (out / "timings.json").exists()
        assert sorted(p.name for p in (out / "plots").iterdir()) == [
            "arc.svg", "line.svg"]
        assert len(list((out / "rollouts").iterdir())) == 6
        assert sorted(p.name for p in (out / "models").iterdir()) == [
            "arc.json", "line.json"]
        assert "training_time" not in json.dumps(summary)

    def test_single_motion_aggregate_equals_row(self, corpus_root):
        config = small_config(corpus_root / "line", k_candidates=(1,))
        summary = run_corpus(config)
        assert len(summary["motions"]) == 1
        row = summary["motions"][0]
        assert summary["aggregate"]["sea"]["mean"] == row["sea"]
        assert summary["aggregate"]["sea"]["min"] == row["sea"]

    def test_byte_identical_reports(self, corpus_root, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            run_corpus(small_config(corpus_root, out=out))
            outs.append(out)
        assert (outs[0] / "report.json").read_bytes() == (
            outs[1] / "report.json"
        ).read_bytes()
        assert (outs[0] / "plots" / "arc.svg").read_bytes() == (
            outs[1] / "plots" / "arc.svg"
        ).read_bytes()

    def test_failure_isolation(self, corpus_root, tmp_path):
        root = tmp_path / "mixed"
        gen_synthetic(root / "good", "line", samples=40, seed=0, name="good")
        bad = root / "bad"
        bad.mkdir(parents=True)
        (bad / "corpus.json").write_text(
            '{"name": "bad", "dim": 2, "goal": [0, 0], "files": ["d.csv"]}'
        )
        (bad / "d.csv").write_text("t,x1,x2\nnot,a,number\n")
        summary = run_corpus(small_config(root, k_candidates=(1,)))
        assert [m["motion"] for m in summary["motions"]] == ["good"]
        assert len(summary["failures"]) == 1
        assert summary["failures"][0]["motion"] == "bad"

    def test_parallel_jobs_match_serial(self, corpus_root, tmp_path):
        serial = run_corpus(small_config(corpus_root, out=tmp_path / "s"))
        parallel = run_corpus(
            small_config(corpus_root, out=tmp_path / "p", jobs=2)
        )
        assert (tmp_path / "s" / "report.json").read_bytes() == (
            tmp_path / "p" / "report.json"
        ).read_bytes()
        assert serial["motions"] == parallel["motions"]


class TestSweep:
    def test_zero_cap_is_worst_for_curved_motion(self, corpus_root, tmp_path):
        config = small_config(corpus_root / "arc", out=tmp_path / "sweep")
        result = sweep_storage(config, corpus_root / "arc", [0.0, 1e6])
        seas = [row["sea"] for row in result["rows"]]
        assert seas[0] > seas[1]
        assert result["estimated_cap"] > 0
        assert (tmp_path / "sweep" / "sweep.json").exists()
        assert (tmp_path / "sweep" / "sweep.csv").exists()


class TestTrainingTime:
    def test_fit_time_grows_with_mixture_size(self, corpus_root):
        from esds.training import load_motion_corpus

        corpus = load_motion_corpus(corpus_root / "arc")
        demos = [preprocess(d, corpus.goal, 60) for d in corpus.demos]
        pairs = build_training_pairs(demos, GainParams())

        def median_fit_time(k):
            times = []
            for _ in range(3):
                model = GmrRegressor(n_components=k, seed=0, max_iter=40)
                t0 = time.perf_counter()
                model.fit(pairs)
                times.append(time.perf_counter() - t0)
            return sorted(times)[1]

        assert median_fit_time(7) > median_fit_time(1)


class TestPlot:
    def test_origin_arrow_has_zero_length(self):
        ds = StabilizedDS(model=ZeroField(), capacity=10.0,
                          params=GainParams(), goal=np.zeros(2), dim=2)
        pts, vecs = field_arrows(ds, ((-1.0, 1.0), (-1.0, 1.0)), grid_n=3)
        at_origin = np.all(pts == 0.0, axis=1)
        assert at_origin.sum() == 1
        np.testing.assert_array_equal(vecs[at_origin][0], [0.0, 0.0])

    def test_demo_only_svg_without_rollouts(self, tmp_path):
        demos = make_demonstrations("line", n_demos=1, samples=30, seed=0)
        ds = StabilizedDS(model=ZeroField(), capacity=1.0,
                          params=GainParams(), goal=np.zeros(2), dim=2)
        path = tmp_path / "plot.svg"
        plot_motion_svg(demos, [], ds, path)
        text = path.read_text()
        assert "<circle" in text
        assert "<polyline" not in text

    def test_three_dimensional_motion_skipped(self, tmp_path):
        from esds.training import Demonstration

        demo = Demonstration(times=[0.0, 1.0, 2.0], positions=np.ones((3, 3)))
        ds = StabilizedDS(model=ZeroField(), capacity=1.0,
                          params=GainParams(), goal=np.zeros(3), dim=3)
        path = tmp_path / "plot.svg"
        plot_motion_svg([demo], [], ds, path)
        assert not path.exists()
        assert "2-D only" in (tmp_path / "plot.txt").read_text()


class TestCliSurface:
    def test_synth_then_run_end_to_end(self, tmp_path, capsys):
        corpus = tmp_path / "c"
        rc = main(["synth", "--shape", "line", "--out", str(corpus),
                   "--samples", "50", "--seed", "0"])
        assert rc == 0
        out = tmp_path / "o"
        rc = main(["run", "--corpus", str(corpus), "--out", str(out),
                   "--k", "1", "--downsample", "40", "--max-steps", "20000"])
        assert rc == 0
        printed = capsys.readouterr().out
        assert "line: SEA=" in printed
        assert (out / "report.json").exists()

    def test_run_exit_code_on_failure(self, tmp_path, capsys):
        bad = tmp_path / "bad"
        bad.mkdir()
        (bad / "corpus.json").write_text(
            '{"name": "x", "dim": 2, "goal": [0, 0], "files": ["d.csv"]}'
        )
        (bad / "d.csv").write_text("t,x1,x2\n0,bad,data\n")
        rc = main(["run", "--corpus", str(bad), "--k", "1"])
        assert rc == 1

    def test_sweep_cli(self, corpus_root, capsys):
        rc = main(["sweep", "--corpus", str(corpus_root), "--motion", "arc",
                   "--k", "1", "--downsample", "40",
                   "--max-steps", "20000", "--sbar-values", "0", "100"])
        assert rc == 0
        assert "estimated s_bar" in capsys.readouterr().out

    def test_plot_cli_deterministic(self, corpus_root, tmp_path, capsys):
        args = ["plot", "--corpus", str(corpus_root), "--motion", "line",
                "--k", "1", "--downsample", "40", "--max-steps", "20000",
                "--seed", "0"]
        rc = main(args + ["--out", str(tmp_path / "a.svg")])
        assert rc == 0
        rc = main(args + ["--out", str(tmp_path / "b.svg")])
        assert rc == 0
        assert (tmp_path / "a.svg").read_bytes() == (
            tmp_path / "b.svg"
        ).read_bytes()

    def test_config_file_with_flag_overrides(self, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(
            {"seed": 5, "backend": "rbf", "dt": 0.02, "corpus": "somewhere"}
        ))
        args = build_parser().parse_args(
            ["run", "--config", str(cfg_path), "--seed", "9", "--sbar", "42"]
        )
        config = _config_from_args(args)
        assert config.seed == 9  # flag wins
        assert config.backend == "rbf"  # from file
        assert config.dt == 0.02
        assert config.storage_cap == 42.0

    def test_sbar_auto(self):
        args = build_parser().parse_args(
            ["run", "--corpus", "x", "--sbar", "auto"]
        )
        assert _config_from_args(args).storage_cap is None

    def test_help_documents_defaults(self, capsys):
        with pytest.raises(SystemExit):
            main(["run", "--help"])
        text = capsys.readouterr().out
        assert "default: 0.01" in text
        assert "default: 100" in text
