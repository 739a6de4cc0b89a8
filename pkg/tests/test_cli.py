import json
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

import crossdyn as cd
from crossdyn.cli import load_model, main, read_cross_section_csv, read_longitudinal_csv


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="session")
def small_surrogate(tmp_path_factory):
    """A quick unimodal cross-section CSV (single well mixes fast)."""
    out = tmp_path_factory.mktemp("surrogate")
    assert run_cli("surrogate", "--a", -2.0, "--b", 0.2, "--n", 400, "--seed", 21,
                   "--out", out) == 0
    return os.path.join(out, "surrogate.csv")


@pytest.fixture(scope="session")
def fitted_dir(small_surrogate, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert run_cli("fit", small_surrogate, "--seed", 7, "--out", out) == 0
    return out


class TestSurrogateCommand:
    def test_writes_csv_with_header(self, small_surrogate):
        values, ids = read_cross_section_csv(small_surrogate)
        assert values.size == 400
        assert ids[0] == "0"

    def test_seed_determinism(self, tmp_path):
        run_cli("surrogate", "--a", 3, "--b", 1, "--n", 50, "--seed", 5, "--out", tmp_path / "a")
        run_cli("surrogate", "--a", 3, "--b", 1, "--n", 50, "--seed", 5, "--out", tmp_path / "b")
        run_cli("surrogate", "--a", 3, "--b", 1, "--n", 50, "--seed", 6, "--out", tmp_path / "c")
        a = (tmp_path / "a" / "surrogate.csv").read_bytes()
        b = (tmp_path / "b" / "surrogate.csv").read_bytes()
        c = (tmp_path / "c" / "surrogate.csv").read_bytes()
        assert a == b
        assert a != c


class TestFitCommand:
    def test_model_file_and_curves(self, fitted_dir):
        model, record, raw = load_model(os.path.join(fitted_dir, "model.json"))
        assert raw["schema_version"] == 1
        assert raw["seed"] == 7
        assert model.sigma > 0
        assert record.std > 0
        curves = np.genfromtxt(
            os.path.join(fitted_dir, "curves.csv"), delimiter=",", names=True
        )
        assert set(curves.dtype.names) == {
            "x", "x_raw", "pdf", "energy", "force", "stationary_density"
        }
        assert_allclose(curves["energy"], -np.log(curves["pdf"]), rtol=1e-10)

    def test_sigma_near_continuum_identity(self, fitted_dir):
        model, _, _ = load_model(os.path.join(fitted_dir, "model.json"))
        assert 1.25 <= model.sigma <= 1.60

    def test_byte_identical_rerun(self, small_surrogate, fitted_dir, tmp_path):
        assert run_cli("fit", small_surrogate, "--seed", 7, "--out", tmp_path) == 0
        first = open(os.path.join(fitted_dir, "model.json"), "rb").read()
        second = open(tmp_path / "model.json", "rb").read()
        assert first == second

    def test_single_row_is_degenerate(self, tmp_path, capsys):
        path = tmp_path / "one.csv"
        path.write_text("value\n3.14\n")
        assert run_cli("fit", path, "--out", tmp_path) == 1
        assert "ERROR:DEGENERATE_DATA" in capsys.readouterr().err

    def test_bad_header_is_parse_error(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("bmi\n1\n2\n")
        assert run_cli("fit", path, "--out", tmp_path) == 1
        assert "ERROR:PARSE_ERROR" in capsys.readouterr().err

    def test_non_numeric_cell_reports_row(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("value\n1.0\noops\n")
        assert run_cli("fit", path, "--out", tmp_path) == 1
        err = capsys.readouterr().err
        assert "ERROR:PARSE_ERROR" in err
        assert "row 3" in err


class TestModelRoundTrip:
    def test_reproduces_outputs_bitwise(self, fitted_dir, tmp_path):
        path = os.path.join(fitted_dir, "model.json")
        model, record, _ = load_model(path)
        # Save -> load -> identical pdf, force and simulation stream.
        model2, record2, _ = load_model(path)
        xs = np.linspace(-2, 2, 101)
        assert np.array_equal(model.landscape.density.pdf(xs), model2.landscape.density.pdf(xs))
        assert np.array_equal(model.landscape.force(xs), model2.landscape.force(xs))
        t1 = cd.simulate(model, x0=0.3, steps=500, seed=11)
        t2 = cd.simulate(model2, x0=0.3, steps=500, seed=11)
        assert np.array_equal(t1.states, t2.states)
        assert (record.median, record.std) == (record2.median, record2.std)

    def test_unknown_schema_rejected(self, fitted_dir, tmp_path, capsys):
        raw = json.load(open(os.path.join(fitted_dir, "model.json")))
        raw["schema_version"] = 99
        bad = tmp_path / "future.json"
        bad.write_text(json.dumps(raw))
        assert run_cli("simulate", bad, "--x0", 0, "--steps", 10, "--seed", 1,
                       "--out", tmp_path) == 1
        assert "ERROR:SCHEMA_ERROR" in capsys.readouterr().err


class TestSimulateCommand:
    def test_trajectory_and_stats(self, fitted_dir, tmp_path):
        model_path = os.path.join(fitted_dir, "model.json")
        assert run_cli("simulate", model_path, "--x0", 0.5, "--steps", 5000,
                       "--seed", 3, "--out", tmp_path) == 0
        traj = np.genfromtxt(tmp_path / "trajectory.csv", delimiter=",", names=True)
        assert traj["state"].size == 5001
        stats = json.load(open(tmp_path / "transition_stats.json"))
        assert stats["seed"] == 3
        assert stats["dt"] > 0

    def test_seed_determinism(self, fitted_dir, tmp_path):
        model_path = os.path.join(fitted_dir, "model.json")
        run_cli("simulate", model_path, "--x0", 0.5, "--steps", 400, "--seed", 3,
                "--out", tmp_path / "a")
        run_cli("simulate", model_path, "--x0", 0.5, "--steps", 400, "--seed", 3,
                "--out", tmp_path / "b")
        a = (tmp_path / "a" / "trajectory.csv").read_bytes()
        assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()

    def test_thinning(self, fitted_dir, tmp_path):
        model_path = os.path.join(fitted_dir, "model.json")
        run_cli("simulate", model_path, "--x0", 0.5, "--steps", 1000, "--seed", 3,
                "--thin", 10, "--out", tmp_path)
        traj = np.genfromtxt(tmp_path / "trajectory.csv", delimiter=",", names=True)
        assert traj["state"].size == 101


class TestValidateCommand:
    def fast_config(self, tmp_path):
        cfg = tmp_path / "fast.json"
        cfg.write_text(json.dumps({
            "sigma_lo": 0.7, "sigma_hi": 3.0, "rel_tol": 0.02,
            "null_repetitions": 300, "bootstrap_repetitions": 100,
        }))
        return cfg

    def make_cohort_csv(self, path, model, record, n=200, seed=0, span=None):
        rng = np.random.default_rng(seed)
        lo, hi = span if span else (18.0, 34.0)
        baselines = rng.uniform(lo, hi, n)
        y = record.apply(baselines)
        dt = 25 * model.grid_dt()
        cohort = cd.synth_longitudinal(model, cd.CrossSection(y), dt=dt, seed=seed)
        lines = ["id,baseline,wk6"]
        for p, raw_base in zip(cohort, baselines):
            follow_raw = float(record.invert(p.followup()))
            lines.append(f"{p.id},{float(raw_base)!r},{follow_raw!r}")
        path.write_text("\n".join(lines) + "\n")

    def test_pooled_report(self, fitted_dir, tmp_path):
        model, record, _ = load_model(os.path.join(fitted_dir, "model.json"))
        csv_path = tmp_path / "cohort.csv"
        self.make_cohort_csv(csv_path, model, record, span=(2.0, 10.0))
        assert run_cli("validate", csv_path, "--model",
                       os.path.join(fitted_dir, "model.json"),
                       "--config", self.fast_config(tmp_path),
                       "--seed", 4, "--out", tmp_path) == 0
        report = json.load(open(tmp_path / "validation_report.json"))
        pooled = report["reports"][0]
        assert pooled["cluster"] == "pooled"
        assert pooled["n_scored"] > 0
        assert pooled["followup_label"] == "wk6"
        # Model-consistent follow-ups must beat the random-choice null.
        assert pooled["a_scaled"] > 0
        assert os.path.exists(tmp_path / "displacement_histogram.csv")

    def test_bmi_clusters_flag_small_ones(self, fitted_dir, tmp_path):
        model, record, _ = load_model(os.path.join(fitted_dir, "model.json"))
        csv_path = tmp_path / "cohort.csv"
        # 17-35 span: underweight and obese slices end up tiny.
        self.make_cohort_csv(csv_path, model, record, n=160, span=(19.0, 29.5))
        with open(csv_path) as fh:
            lines = fh.read().splitlines()
        lines.append("u1,17.2,17.3")
        lines.append("o1,34.0,33.0")
        csv_path.write_text("\n".join(lines) + "\n")
        assert run_cli("validate", csv_path, "--refit", "--clusters", "bmi",
                       "--config", self.fast_config(tmp_path),
                       "--seed", 4, "--out", tmp_path) == 0
        report = json.load(open(tmp_path / "validation_report.json"))
        by_cluster = {}
        for entry in report["reports"]:
            by_cluster.setdefault(entry["cluster"], []).append(entry)
        assert set(by_cluster) == {"pooled", "underweight", "normal", "overweight", "obese"}
        assert by_cluster["underweight"][0].get("disregarded") is True
        assert by_cluster["obese"][0].get("disregarded") is True
        assert "a_scaled" in by_cluster["normal"][-1]

    def test_range_filter(self, fitted_dir, tmp_path):
        model, record, _ = load_model(os.path.join(fitted_dir, "model.json"))
        csv_path = tmp_path / "cohort.csv"
        self.make_cohort_csv(csv_path, model, record, n=300, span=(19.0, 24.0))
        assert run_cli("validate", csv_path, "--refit", "--range", "21:22",
                       "--config", self.fast_config(tmp_path),
                       "--seed", 4, "--out", tmp_path) == 0
        report = json.load(open(tmp_path / "validation_report.json"))
        pooled = report["reports"][0]
        assert 0 < pooled["n"] < 400

    def test_longitudinal_parse_errors(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,start,wk6\n1,2,3\n")
        assert run_cli("validate", bad, "--refit", "--seed", 1, "--out", tmp_path) == 1
        assert "ERROR:PARSE_ERROR" in capsys.readouterr().err

    def test_row_width_mismatch(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("id,baseline,wk6\n1,2.0\n")
        with pytest.raises(cd.ParseError, match="row 2"):
            read_longitudinal_csv(bad)


class TestInterveneCommand:
    def test_analytic_numbers(self, tmp_path):
        assert run_cli("intervene", "--a", 3, "--b", 1, "--c", 1, "--t", 0.0013,
                       "--sigma", 1.41, "--out", tmp_path) == 0
        payload = json.load(open(tmp_path / "intervention.json"))
        assert payload["r"] == pytest.approx(0.0255, abs=5e-4)
        assert len(payload["tilted_attractors"]) == 2
        assert payload["tilted_attractors"][0] < 0 < payload["tilted_attractors"][1]

    def test_zero_tilt(self, tmp_path):
        assert run_cli("intervene", "--a", 3, "--b", 1, "--c", 0, "--t", 0.0013,
                       "--sigma", 1.41, "--out", tmp_path) == 0
        payload = json.load(open(tmp_path / "intervention.json"))
        assert payload["r"] == 0.0
        assert payload["occupancy_below_threshold"] == pytest.approx(0.5, abs=1e-9)

    def test_model_variant(self, fitted_dir, tmp_path):
        assert run_cli("intervene", "--model", os.path.join(fitted_dir, "model.json"),
                       "--c", 0.5, "--t", 0.01, "--out", tmp_path) == 0
        payload = json.load(open(tmp_path / "intervention.json"))
        assert payload["r"] > 0
        assert 0.5 < payload["occupancy_below_threshold"] < 1.0

    def test_missing_parameters(self, tmp_path, capsys):
        assert run_cli("intervene", "--c", 1, "--t", 0.1, "--out", tmp_path) == 1
        assert "ERROR:PARSE_ERROR" in capsys.readouterr().err


class TestConfig:
    def test_config_overrides(self, small_surrogate, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"sigma_lo": 1.0, "sigma_hi": 2.0, "rel_tol": 0.01}))
        assert run_cli("fit", small_surrogate, "--config", cfg, "--out", tmp_path) == 0
        raw = json.load(open(tmp_path / "model.json"))
        assert raw["fit"]["sigma_bounds"] == [1.0, 2.0]

    def test_unknown_key_rejected(self, small_surrogate, tmp_path, capsys):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"sigmalo": 1.0}))
        assert run_cli("fit", small_surrogate, "--config", cfg, "--out", tmp_path) == 1
        assert "ERROR:PARSE_ERROR" in capsys.readouterr().err
