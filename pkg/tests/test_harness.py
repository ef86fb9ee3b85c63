import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from semilind.harness.cli import main as cli_main
from semilind.harness.compare import (
    ComparisonReport,
    ObservableSeries,
    compare_dirs,
    compare_series,
    read_observables,
    write_observables,
)
from semilind.harness.config import ConfigError, ExperimentConfig, dump_config, load_config
from semilind.harness.experiments import EXPERIMENTS, default_config, run_experiment, run_portrait


def tiny_cat_config(tmp_path, **times):
    d = default_config("cat_anharmonic")
    d["times"] = times or {"t_end": 0.2, "n_out": 5, "frames": [0.2]}
    d["grid"] = {"q_min": -9.0, "q_max": 9.0, "n_q": 40, "p_min": -9.0, "p_max": 9.0, "n_p": 40}
    d["fock_levels"] = 55
    # the relative moment check divides by a near-zero signal on this short
    # window; the full-scale tolerance is exercised in the acceptance suite
    d["tolerances"]["moment_rms_rel"] = 0.2
    d["output_dir"] = str(tmp_path)
    return ExperimentConfig.from_dict(d)


class TestConfig:
    @pytest.mark.parametrize("name", sorted(EXPERIMENTS))
    def test_defaults_round_trip(self, name):
        d = default_config(name)
        cfg = ExperimentConfig.from_dict(d)
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_key_rejected_top_level(self):
        d = default_config("limit_cycle")
        d["surprise"] = 1
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_unknown_key_rejected_nested(self):
        d = default_config("limit_cycle")
        d["model"]["extra"] = "nope"
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_missing_required_key(self):
        d = default_config("limit_cycle")
        del d["model"]["hamiltonian"]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_bad_chart_rejected(self):
        d = default_config("limit_cycle")
        d["model"]["chart"] = "polar"
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(d)

    def test_frames_must_lie_on_grid(self):
        d = default_config("cat_anharmonic")
        d["times"]["frames"] = [0.333]
        cfg = ExperimentConfig.from_dict(d)
        with pytest.raises(ConfigError):
            cfg.times.frame_indices()

    def test_file_round_trip(self, tmp_path):
        cfg = ExperimentConfig.from_dict(default_config("bose_hubbard_losses"))
        path = tmp_path / "cfg.json"
        dump_config(cfg, path)
        assert load_config(path) == cfg

    def test_seed_override(self):
        cfg = ExperimentConfig.from_dict(default_config("bose_hubbard_losses"))
        assert cfg.with_seed(99).seed == 99


class TestObservableCsv:
    def test_round_trip_with_and_without_stderr(self, tmp_path):
        t = np.linspace(0, 1, 5)
        series = {
            "plain": ObservableSeries(t, np.sin(t)),
            "noisy": ObservableSeries(t, np.cos(t), stderr=0.1 * np.ones(5)),
        }
        path = tmp_path / "observables.csv"
        write_observables(series, path)
        back = read_observables(path)
        assert set(back) == {"plain", "noisy"}
        assert np.array_equal(back["plain"].values, series["plain"].values)
        assert back["plain"].stderr is None
        assert np.array_equal(back["noisy"].stderr, series["noisy"].stderr)

    def test_reader_rejects_malformed(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,name,val\n")
        with pytest.raises(ValueError):
            read_observables(path)


class TestCompare:
    def test_identical_series_zero_error(self):
        t = np.linspace(0, 2, 9)
        s = ObservableSeries(t, np.sin(t))
        m = compare_series(s, s)
        assert m["sup_error"] == 0 and m["rms_error"] == 0

    def test_resampling_overlap(self):
        ta = np.linspace(0, 2, 21)
        tb = np.linspace(0.5, 3, 26)
        a = ObservableSeries(ta, 2 * ta)
        b = ObservableSeries(tb, 2 * tb)
        m = compare_series(a, b)
        assert m["sup_error"] < 1e-12
        assert m["n_points"] < ta.size

    def test_disjoint_ranges_error(self):
        a = ObservableSeries(np.array([0.0, 1.0]), np.zeros(2))
        b = ObservableSeries(np.array([2.0, 3.0]), np.zeros(2))
        with pytest.raises(ValueError):
            compare_series(a, b)

    def test_compare_dirs_with_tolerances(self, tmp_path):
        t = np.linspace(0, 1, 11)
        da, db = tmp_path / "a", tmp_path / "b"
        write_observables({"x": ObservableSeries(t, t)}, da / "observables.csv")
        write_observables({"x": ObservableSeries(t, t + 0.01)}, db / "observables.csv")
        rep = compare_dirs(da, db, {"x": {"sup": 0.02}})
        assert rep.passed
        rep = compare_dirs(da, db, {"x": {"sup": 0.005}})
        assert not rep.passed


class TestRunners:
    def test_cat_runner_artifacts_and_determinism(self, tmp_path):
        cfg = tiny_cat_config(tmp_path)
        report, outdir = run_experiment(cfg)
        assert report.passed
        files = {p.relative_to(outdir).as_posix() for p in Path(outdir).rglob("*") if p.is_file()}
        assert "doubled/observables.csv" in files
        assert "master/observables.csv" in files
        assert "doubled/component_0.csv" in files
        assert "report.json" in files

        def digest():
            h = hashlib.sha256()
            for p in sorted(Path(outdir).rglob("*.csv")):
                h.update(p.read_bytes())
            return h.hexdigest()

        before = digest()
        run_experiment(cfg)
        assert digest() == before

    def test_report_is_valid_json(self, tmp_path):
        cfg = tiny_cat_config(tmp_path)
        _, outdir = run_experiment(cfg)
        doc = json.loads((Path(outdir) / "report.json").read_text())
        assert "entries" in doc and "passed" in doc

    def test_unknown_experiment_rejected(self):
        d = default_config("cat_anharmonic")
        d["experiment"] = "not_a_thing"
        cfg = ExperimentConfig.from_dict(d)
        with pytest.raises(ConfigError):
            run_experiment(cfg)

    def test_output_root_env_override(self, tmp_path, monkeypatch):
        cfg = tiny_cat_config(tmp_path / "ignored")
        monkeypatch.setenv("SEMILIND_OUTPUT_ROOT", str(tmp_path / "redirected"))
        _, outdir = run_experiment(cfg)
        assert Path(outdir).parent == tmp_path / "redirected"


class TestPortrait:
    def test_nonlinear_loss_field_and_lines(self, tmp_path):
        d = default_config("portrait_nonlinear_loss")
        d["output_dir"] = str(tmp_path)
        d["portrait"]["n_q"] = 9
        d["portrait"]["n_p"] = 9
        d["portrait"]["t_end"] = 3.0
        d["portrait"]["n_out"] = 31
        d["portrait"]["starts"] = [[2.0, 1.0], [1.0, 2.0]]
        cfg = ExperimentConfig.from_dict(d)
        report, outdir = run_portrait(cfg)
        assert report.passed
        field = (Path(outdir) / "field.csv").read_text().splitlines()
        assert field[0] == "q,p,dq,dp,speed"
        gamma = 0.1
        # spot-check the sampled field against the closed-form drift
        for row in field[1:10]:
            qv, pv, dq, dp, _ = (float(x) for x in row.split(","))
            assert dq == pytest.approx(-2 * gamma * qv**2 * pv, abs=1e-12)
            assert dp == pytest.approx(-2 * gamma * qv * pv**2, abs=1e-12)
        # trajectories conserve p/q: straight lines through the origin
        rows = (Path(outdir) / "trajectories.csv").read_text().splitlines()[1:]
        data = {}
        for row in rows:
            idx, t, qv, pv = row.split(",")
            data.setdefault(int(idx), []).append((float(qv), float(pv)))
        for pts in data.values():
            ratios = [p / q for q, p in pts if abs(q) > 1e-6]
            assert np.max(np.abs(np.diff(ratios))) < 1e-6

    def test_portrait_config_needed(self, tmp_path):
        d = default_config("cat_anharmonic")
        d["output_dir"] = str(tmp_path)
        cfg = ExperimentConfig.from_dict(d)
        with pytest.raises(ConfigError):
            run_portrait(cfg)


class TestCli:
    def test_list_experiments(self, capsys):
        assert cli_main(["list-experiments"]) == 0
        out = capsys.readouterr().out
        for name in EXPERIMENTS:
            assert name in out

    def test_list_single_prints_config(self, capsys):
        assert cli_main(["list-experiments", "cat_anharmonic"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["experiment"] == "cat_anharmonic"

    def test_selftest(self, capsys):
        assert cli_main(["selftest"]) == 0

    def test_run_roundtrip_exit_codes(self, tmp_path, capsys):
        cfg = tiny_cat_config(tmp_path)
        path = tmp_path / "cfg.json"
        dump_config(cfg, path)
        assert cli_main(["run", str(path)]) == 0

    def test_run_missing_file_is_error(self, capsys):
        assert cli_main(["run", "/nonexistent/cfg.json"]) == 1

    def test_compare_cli(self, tmp_path, capsys):
        t = np.linspace(0, 1, 11)
        da, db = tmp_path / "a", tmp_path / "b"
        write_observables({"x": ObservableSeries(t, t)}, da / "observables.csv")
        write_observables({"x": ObservableSeries(t, t + 0.1)}, db / "observables.csv")
        tolfile = tmp_path / "tol.json"
        tolfile.write_text(json.dumps({"x": {"sup": 0.2}}))
        assert cli_main(["compare", str(da), str(db), "--tol", str(tolfile)]) == 0
        tolfile.write_text(json.dumps({"x": {"sup": 0.01}}))
        assert cli_main(["compare", str(da), str(db), "--tol", str(tolfile)]) == 2

    def test_portrait_cli(self, tmp_path):
        d = default_config("portrait_nonlinear_loss")
        d["output_dir"] = str(tmp_path)
        d["portrait"]["n_q"] = 5
        d["portrait"]["n_p"] = 5
        d["portrait"]["n_out"] = 11
        d["portrait"]["t_end"] = 1.0
        d["portrait"]["starts"] = [[1.0, 1.0]]
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(d))
        assert cli_main(["portrait", str(path)]) == 0
