import json

import numpy as np
import pandas as pd
import pytest

from regression_data import RegressionDataset, load_dataset, save_dataset
from estimators import EwaConfig, ewa_fit
from langevin_sampler import SamplerConfig
from datagen import rectangle_image
from cli import EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, main


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _write_dataset(tmp_path, name="d.csv", **kw):
    path = str(tmp_path / name)
    save_dataset(RegressionDataset(**kw), path)
    return path


class TestUsage:

    def test_no_command(self, capsys):
        assert _run(capsys)[0] == EXIT_USAGE

    def test_unknown_estimator(self, capsys):
        assert _run(capsys, "fit", "ridge", "--data", "x.csv")[0] == EXIT_USAGE

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = _run(capsys, "fit", "lasso", "--data", str(tmp_path / "nope.csv"), "--sigma", "1")
        assert code == EXIT_USAGE
        assert "[CLI] error" in err

    def test_auto_tuning_needs_sigma(self, capsys, tmp_path):
        path = _write_dataset(tmp_path, design=np.eye(3), responses=np.ones(3))
        assert _run(capsys, "fit", "ewa", "--data", path)[0] == EXIT_USAGE

    def test_oracle_needs_truth(self, capsys, tmp_path):
        path = _write_dataset(tmp_path, design=np.eye(3), responses=np.ones(3), noise_level=1.0)
        code, _, err = _run(capsys, "fit", "lasso-gauss", "--data", path)
        assert code == EXIT_USAGE and "truth" in err

    def test_bound_soi_needs_config(self, capsys):
        assert _run(capsys, "bound", "soi")[0] == EXIT_USAGE

    def test_help(self, capsys):
        code, out, _ = _run(capsys, "--help")
        assert code == EXIT_OK and "bench" in out


class TestGenAndFit:

    def test_gen_writes_csv_and_sidecar(self, capsys, tmp_path):
        path = str(tmp_path / "e1.csv")
        assert _run(capsys, "--seed", "3", "gen", "example1", "--n", "20", "--m", "8", "--s", "2", "--out", path)[0] == EXIT_OK
        ds = load_dataset(path)
        assert ds.n == 20 and ds.M == 8
        assert ds.noise_level == pytest.approx((2 / 9) ** 0.5)
        np.testing.assert_array_equal(ds.truth, [1, 1, 0, 0, 0, 0, 0, 0])

    def test_fit_ewa_matches_library(self, capsys, tmp_path):
        path = _write_dataset(tmp_path, design=np.ones((4, 1)), responses=[0.8, 0.3, 0.6, 0.5])
        code, out, _ = _run(capsys, "--seed", "5", "fit", "ewa", "--data", path, "--sigma", "1",
                            "--step", "0.01", "--horizon", "50")
        assert code == EXIT_OK
        payload = json.loads(out)

        dataset = load_dataset(path, sigma=1.0)
        estimate, _ = ewa_fit(dataset, EwaConfig(sampler=SamplerConfig(step=0.01, horizon=50.0, seed=5)))
        assert payload["estimate"] == [float(v) for v in estimate]
        assert payload["config"]["beta"] == 4.0 and payload["config"]["tau"] == 2.0
        assert payload["config"]["seed"] == 5

    def test_fit_ewa_divergence_exit_code(self, capsys, tmp_path):
        path = _write_dataset(tmp_path, design=np.eye(2) * 10, responses=[1.0, -1.0], noise_level=1.0)
        code, out, err = _run(capsys, "fit", "ewa", "--data", path, "--step", "1e6", "--horizon", "1e7",
                              "--max-restarts", "0")
        assert code == EXIT_DIVERGED
        assert json.loads(out)["estimate"] == [0.0, 0.0]
        assert "diverged" in err

    def test_fit_lasso_echoes_level(self, capsys, tmp_path):
        path = str(tmp_path / "e1.csv")
        _run(capsys, "gen", "example1", "--n", "30", "--m", "10", "--s", "2", "--out", path)
        code, out, _ = _run(capsys, "fit", "lasso", "--data", path, "--reg-level", "0.3")
        assert code == EXIT_OK
        payload = json.loads(out)
        assert payload["config"]["reg_level"] == 0.3
        assert payload["diagnostics"]["converged"]
        assert len(payload["estimate"]) == 10

    def test_fit_writes_out_file(self, capsys, tmp_path):
        data = str(tmp_path / "e2.csv")
        _run(capsys, "gen", "example2", "--n", "40", "--k", "3", "--sigma", "0.5", "--out", data)
        out_path = tmp_path / "fit.json"
        code, out, _ = _run(capsys, "fit", "lasso-gauss", "--data", data, "--grid-size", "10", "--out", str(out_path))
        assert code == EXIT_OK and out == ""
        payload = json.loads(out_path.read_text())
        assert payload["config"]["grid_size"] == 10
        assert len(payload["estimate"]) == 9

    def test_gen_sample_csv(self, capsys, tmp_path):
        data, sample = str(tmp_path / "e2.csv"), tmp_path / "sample.csv"
        code = _run(capsys, "gen", "example2", "--n", "30", "--k", "4", "--out", data, "--sample-csv", str(sample))[0]
        assert code == EXIT_OK
        frame = pd.read_csv(sample, float_precision="round_trip")
        assert list(frame.columns) == ["z1", "z2", "y"] and len(frame) == 30
        np.testing.assert_allclose(frame["y"].to_numpy(), load_dataset(data).responses, rtol=1e-15)

    def test_gen_sample_csv_needs_example2(self, capsys, tmp_path):
        code = _run(capsys, "gen", "example1", "--n", "10", "--m", "4", "--s", "1", "--out", str(tmp_path / "d.csv"),
                    "--sample-csv", str(tmp_path / "s.csv"))[0]
        assert code == EXIT_USAGE

    def test_fit_image_csv(self, capsys, tmp_path):
        data = str(tmp_path / "e2.csv")
        _run(capsys, "gen", "example2", "--n", "40", "--k", "3", "--sigma", "0.5", "--out", data)
        image = tmp_path / "image.csv"
        code, out, _ = _run(capsys, "fit", "lasso", "--data", data, "--image-csv", str(image),
                            "--image-resolution", "12")
        assert code == EXIT_OK
        frame = pd.read_csv(image, float_precision="round_trip")
        assert list(frame.columns) == ["z1", "z2", "estimate", "truth"]
        assert len(frame) == 144
        estimate = np.array(json.loads(out)["estimate"])
        np.testing.assert_allclose(frame["estimate"].to_numpy(), rectangle_image(estimate, 3, 12).ravel())

    def test_fit_image_csv_needs_square_dictionary(self, capsys, tmp_path):
        path = _write_dataset(tmp_path, design=np.ones((4, 3)), responses=np.ones(4), noise_level=1.0)
        code, _, err = _run(capsys, "fit", "lasso", "--data", path, "--image-csv", str(tmp_path / "i.csv"))
        assert code == EXIT_USAGE and "k*k" in err


class TestBenchCommand:

    def test_repeatable_bytes(self, capsys, tmp_path):
        args = ["--seed", "7", "bench", "example1", "--n", "20", "--m", "10", "--s", "2", "--reps", "2",
                "--estimators", "lasso,lasso-gauss"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert _run(capsys, *args, "--out", str(a))[0] == EXIT_OK
        assert _run(capsys, *args, "--out", str(b))[0] == EXIT_OK
        assert a.read_bytes() == b.read_bytes()
        lines = a.read_text().splitlines()
        assert lines[0] == "experiment,n,M,S_or_sigma,estimator,mean_loss,sd_loss,reps,divergences,seconds"
        assert len(lines) == 3

    def test_stdout_and_json(self, capsys, tmp_path):
        report = tmp_path / "r.json"
        code, out, _ = _run(capsys, "bench", "example1", "--n", "20", "--m", "10", "--s", "2", "--reps", "1",
                            "--estimators", "lasso", "--json", str(report))
        assert code == EXIT_OK
        assert out.splitlines()[1].startswith("example1,20,10,2,lasso,")
        assert json.loads(report.read_text())["config"]["base_seed"] == 0

    def test_empty_grid(self, capsys):
        assert _run(capsys, "bench", "example1", "--m", "3", "--s", "5", "--reps", "1")[0] == EXIT_USAGE

    @pytest.mark.slow
    def test_default_cell_repeatable(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        _run(capsys, "--seed", "7", "bench", "example1", "--reps", "2", "--out", str(a))
        _run(capsys, "--seed", "7", "bench", "example1", "--reps", "2", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestNoiseBoundPrior:

    def test_rademacher_check_passes(self, capsys):
        code, out, _ = _run(capsys, "noise", "check", "--family", "rademacher", "--gamma", "0.1")
        verdict = json.loads(out)
        assert code == EXIT_OK
        assert verdict["marginal_law"]["pass"]
        assert verdict["sum_in_law"]["pass"]
        assert verdict["conditional_mean_zero"]["pass"]

    def test_threshold(self, capsys):
        code, out, _ = _run(capsys, "noise", "threshold", "--family", "laplace", "--L", "10")
        payload = json.loads(out)
        assert code == EXIT_OK
        assert payload["beta_min"] == 8.0 and payload["t0"] == 1.0 and payload["beta"] == 20.0

    def test_threshold_unbounded_t0(self, capsys):
        payload = json.loads(_run(capsys, "noise", "threshold", "--family", "gaussian", "--scale", "2")[1])
        assert payload["beta_min"] == 16.0 and payload["t0"] is None

    def test_corollary1(self, capsys):
        code, out, _ = _run(capsys, "bound", "corollary1", "--losses", "1,0.5,2", "--beta", "4", "--n", "100")
        assert code == EXIT_OK
        assert json.loads(out)["rhs"] == pytest.approx(0.54394, abs=1e-5)

    def test_soi(self, capsys, tmp_path):
        config = tmp_path / "soi.json"
        config.write_text(json.dumps({"lambda_star": [1.0] * 5 + [0.0] * 95, "beta": 4.0, "tau": 0.04,
                                      "alpha": 0.0, "n": 100}))
        code, out, _ = _run(capsys, "bound", "soi", "--config", str(config))
        payload = json.loads(out)
        assert code == EXIT_OK
        assert payload["rhs"] == pytest.approx(sum(payload["terms"].values()))
        assert payload["preconditions"]["all"]

    def test_soi_bad_config(self, capsys, tmp_path):
        config = tmp_path / "soi.json"
        config.write_text(json.dumps({"lambda_star": [1.0], "beta": 4.0}))
        assert _run(capsys, "bound", "soi", "--config", str(config))[0] == EXIT_USAGE

    def test_prior_compare(self, capsys):
        code, out, _ = _run(capsys, "--seed", "1", "prior", "compare", "--count", "2000")
        assert code == EXIT_OK
        assert set(json.loads(out)) == {"gaussian", "laplace", "student_t3"}

    def test_prior_compare_csv(self, capsys, tmp_path):
        path = tmp_path / "prior.csv"
        code = _run(capsys, "--seed", "1", "prior", "compare", "--count", "500", "--csv", str(path))[0]
        assert code == EXIT_OK
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["gaussian", "laplace", "student_t3"] and len(frame) == 500
