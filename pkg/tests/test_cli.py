import json

import numpy as np
import pytest
import yaml

from aigflow.cli import (EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, PRESETS, compare, main, parse_config,
                         read_diagnostics, resolve_config, run)
from aigflow.core import ConfigurationError

MINIMAL = "metric: wasserstein\ntarget: gaussian\nN: 50\ntau: 0.1\niters: 20\nseed: 1\n"


def _write(path, mapping):
    path.write_text(yaml.safe_dump(mapping))
    return str(path)


def _particles(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


class TestParsing:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        assert (cfg.N, cfg.tau, cfg.iters, cfg.seed) == (50, 0.1, 20, 1)
        assert cfg.accelerated and cfg.restart
        assert cfg.bandwidth == "med" and cfg.schedule == "nesterov" and cfg.lam == 1.0

    def test_invalid_value_names_key(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config(MINIMAL.replace("tau: 0.1", "tau: -1"))
        assert exc.value.key == "tau"
        assert "tau" in str(exc.value)

    def test_unknown_key(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config(MINIMAL + "stepsize: 3\n")
        assert exc.value.key == "stepsize"

    def test_missing_key(self):
        with pytest.raises(ConfigurationError) as exc:
            parse_config(MINIMAL.replace("seed: 1\n", ""))
        assert exc.value.key == "seed"

    def test_lambda_key(self):
        assert parse_config(MINIMAL + "metric: kalman-wasserstein\nlambda: 0.5\n").lam == 0.5

    def test_preset_expansion_with_override(self):
        cfg = parse_config("preset: toy-bimodal\niters: 7\n")
        assert cfg.target == "bimodal" and cfg.N == 200 and cfg.iters == 7

    def test_layers_later_wins(self):
        cfg = resolve_config(PRESETS["toy-bimodal"], {"tau": 0.05}, {"tau": "0.2"})
        assert cfg.tau == 0.2

    def test_malformed_document(self):
        with pytest.raises(ConfigurationError):
            parse_config("- just\n- a list\n")


class TestRun:
    def _cfg(self, **kw):
        return resolve_config(yaml.safe_load(MINIMAL), kw)

    def test_zero_iterations(self, tmp_path):
        cfg = self._cfg(iters=0)
        assert run(cfg, tmp_path) == EXIT_OK
        lines = (tmp_path / "diagnostics.csv").read_text().splitlines()
        assert len(lines) == 1 and lines[0].startswith("iter,t,alpha,h,phi,restarted")
        x = _particles(tmp_path / "particles_final.csv")
        again = run(cfg, tmp_path / "again")
        assert again == EXIT_OK
        np.testing.assert_array_equal(x[:, 1], 0.0)
        np.testing.assert_array_equal(x, _particles(tmp_path / "again" / "particles_final.csv"))

    def test_same_seed_identical_bytes(self, tmp_path):
        cfg = self._cfg(iters=30)
        run(cfg, tmp_path / "a")
        run(cfg, tmp_path / "b")
        for name in ("diagnostics.csv", "particles_final.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_different_seed_differs(self, tmp_path):
        cfg = self._cfg(iters=5)
        run(cfg, tmp_path / "a")
        run(cfg, tmp_path / "b", seed=2)
        assert (tmp_path / "a" / "particles_final.csv").read_bytes() != (
            tmp_path / "b" / "particles_final.csv").read_bytes()

    def test_meta_roundtrip(self, tmp_path):
        cfg = self._cfg(metric="kalman-wasserstein", iters=3)
        run(cfg, tmp_path)
        meta = json.loads((tmp_path / "run_meta.json").read_text())
        assert meta["status"] == "ok" and meta["seed"] == 1
        assert parse_config(json.dumps(meta["config"])) == cfg

    def test_toy_bimodal_bm(self, tmp_path):
        cfg = parse_config("preset: toy-bimodal\nbandwidth: bm\nreference_size: 500\n")
        assert run(cfg, tmp_path) == EXIT_OK
        diag = read_diagnostics(tmp_path / "diagnostics.csv")
        assert len(diag["iter"]) == 200
        np.testing.assert_array_equal(diag["iter"], np.arange(1, 201))
        for col in ("t", "h", "phi", "energy_proxy", "mmd_ref"):
            assert np.all(np.isfinite(diag[col]))
        restarted = diag["restarted"] == 1
        assert np.all(diag["phi"][restarted] < 0)
        assert np.all(diag["phi"][~restarted] >= 0)
        assert np.all(np.isfinite(_particles(tmp_path / "particles_final.csv")))

    def test_blr_columns(self, tmp_path):
        cfg = parse_config("preset: blr-synthetic\niters: 5\ndataset_size: 200\nbatch_size: 20\n")
        run(cfg, tmp_path)
        diag = read_diagnostics(tmp_path / "diagnostics.csv")
        assert np.all((diag["test_acc"] >= 0) & (diag["test_acc"] <= 1))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numerical_failure(self, tmp_path, capsys):
        cfg = self._cfg(N=20, d=1, tau=1.0, iters=200, accelerated=False, score="gaussian",
                        target_var=[1e-6])
        assert run(cfg, tmp_path) == EXIT_NUMERICAL
        err = capsys.readouterr().err
        assert "numerical failure at iteration" in err
        it = int(err.split("iteration ")[1].split(":")[0])
        rows = read_diagnostics(tmp_path / "diagnostics.csv")["iter"]
        assert len(rows) == it - 1
        assert json.loads((tmp_path / "run_meta.json").read_text())["status"] == "numerical-failure"


class TestCompare:
    def test_single_config_matches_run(self, tmp_path):
        cfg = parse_config(MINIMAL + "reference_size: 200\n")
        compare([cfg], tmp_path / "cmp")
        run(cfg, tmp_path / "run")
        own = read_diagnostics(tmp_path / "run" / "diagnostics.csv")
        wide = read_diagnostics(tmp_path / "cmp" / "comparison.csv")
        for col in ("t", "phi", "energy_proxy", "mmd_ref"):
            np.testing.assert_array_equal(wide[f"{cfg.label}/{col}"], own[col])

    def test_seed_average_and_summary(self, tmp_path):
        a = parse_config(MINIMAL + "seeds: 2\nthreshold_energy: 1.0e+9\n")
        b = parse_config(MINIMAL + "seeds: 2\naccelerated: false\nthreshold_energy: 1.0e+9\n")
        summary = compare([a, b], tmp_path)
        energy = [r for r in summary if r["metric"] == "energy_proxy"]
        assert [r["reached"] for r in energy] == [2, 2]
        assert all(r["mean_iterations"] == 1.0 for r in energy)
        s1 = read_diagnostics(tmp_path / a.label / "seed-1" / "diagnostics.csv")["energy_proxy"]
        s2 = read_diagnostics(tmp_path / a.label / "seed-2" / "diagnostics.csv")["energy_proxy"]
        wide = read_diagnostics(tmp_path / "comparison.csv")
        np.testing.assert_allclose(wide[f"{a.label}/energy_proxy"], (s1 + s2) / 2, rtol=1e-15)

    def test_duplicate_labels(self, tmp_path):
        cfg = parse_config(MINIMAL.replace("iters: 20", "iters: 2"))
        compare([cfg, cfg], tmp_path)
        header = (tmp_path / "comparison.csv").read_text().splitlines()[0]
        assert f"{cfg.label}-2/t" in header

    def test_mismatched_targets(self, tmp_path):
        a = parse_config(MINIMAL)
        b = parse_config(MINIMAL.replace("gaussian", "bimodal"))
        with pytest.raises(ConfigurationError) as exc:
            compare([a, b], tmp_path)
        assert exc.value.key == "target"


class TestMain:
    def test_flags_override_file(self, tmp_path):
        path = _write(tmp_path / "c.yaml", yaml.safe_load(MINIMAL))
        out = tmp_path / "out"
        assert main(["run", path, "--iters", "4", "--out", str(out)]) == EXIT_OK
        assert len(read_diagnostics(out / "diagnostics.csv")["iter"]) == 4

    def test_preset_flag(self, tmp_path):
        out = tmp_path / "out"
        assert main(["run", "--preset", "toy-bimodal", "--iters", "2", "--reference_size", "0",
                     "--out", str(out)]) == EXIT_OK
        assert json.loads((out / "run_meta.json").read_text())["config"]["N"] == 200

    def test_config_error_exit_code(self, tmp_path, capsys):
        path = _write(tmp_path / "c.yaml", {**yaml.safe_load(MINIMAL), "tau": -1})
        assert main(["run", path, "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "tau" in capsys.readouterr().err

    def test_compare_command(self, tmp_path, capsys):
        a = _write(tmp_path / "a.yaml", {**yaml.safe_load(MINIMAL), "iters": 3})
        b = _write(tmp_path / "b.yaml", {**yaml.safe_load(MINIMAL), "iters": 3, "metric": "kalman-wasserstein"})
        assert main(["compare", a, b, "--out", str(tmp_path / "cmp")]) == EXIT_OK
        assert (tmp_path / "cmp" / "summary.csv").exists()
        assert "energy_proxy" in capsys.readouterr().out
