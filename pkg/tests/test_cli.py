"""Configuration parsing, table/manifest output, exit codes."""

import csv
from pathlib import Path

import pytest
import yaml

from jdrisk import cli
from jdrisk.crosscheck import Comparison, CrosscheckReport, ResultRow


BASE = {
    "model": {
        "p": 1.0, "sigma_P": 1.0, "lambda_P": 0.0, "r": 0.2,
        "sigma_R": 0.5, "lambda_R": 0.0, "rho": 1.0, "delta": 0.0,
    },
    "task": {"type": "ruin", "u": [0.0]},
    "numerics": {"sim": {"dt": 1e-3, "t_max": 1.0, "n_paths": 200, "seed": 42}},
    "output": {"dir": "out"},
}


def write_cfg(tmp_path, cfg, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


def read_rows(out_dir):
    with open(Path(out_dir) / "results.csv") as fh:
        return list(csv.DictReader(fh))


class TestConfigValidation:
    def test_unknown_key_named(self, tmp_path):
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["model"]["lambda"] = 1.0
        rc = cli.main(["--config", str(write_cfg(tmp_path, cfg)),
                       "--out", str(tmp_path / "o"), "--quiet"])
        assert rc == 2

    def test_unknown_key_message_names_key(self, tmp_path):
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["task"]["surplus"] = [1.0]
        with pytest.raises(cli.ConfigError, match="task.'surplus'|surplus"):
            cli.load_config(write_cfg(tmp_path, cfg))

    def test_missing_required_key(self, tmp_path):
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        del cfg["model"]["sigma_R"]
        with pytest.raises(cli.ConfigError, match="sigma_R"):
            cli.load_config(write_cfg(tmp_path, cfg))

    def test_closed_form_with_jumps_rejected(self, tmp_path):
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["model"]["lambda_P"] = 1.0
        cfg["model"]["claim_law"] = {"family": "exponential", "mean": 0.5}
        cfg["task"] = {"type": "closed-form", "formula": "ruin-corr1", "u": [1.0]}
        with pytest.raises(cli.ConfigError,
                           match="closed forms require lambda_P = lambda_R = 0"):
            cli.load_config(write_cfg(tmp_path, cfg))

    def test_bad_scenario_name(self, tmp_path):
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["task"] = {"type": "crosscheck", "scenario": "nope"}
        with pytest.raises(cli.ConfigError, match="task.scenario"):
            cli.load_config(write_cfg(tmp_path, cfg))


class TestRun:
    def test_ruin_at_zero_table(self, tmp_path):
        out = tmp_path / "o"
        rc = cli.main(["--config", str(write_cfg(tmp_path, dict(BASE))),
                       "--out", str(out), "--quiet"])
        assert rc == 0
        rows = read_rows(out)
        psi = [r for r in rows if r["scenario"] == "ruin:psi"][0]
        assert float(psi["value"]) == pytest.approx(1.0)
        assert psi["method"] == "mc"
        assert list(rows[0].keys()) == list(cli.TABLE_COLUMNS)
        manifest = yaml.safe_load((out / "manifest.yaml").read_text())
        assert manifest["seed"] == 42
        assert manifest["assumptions"]["drift_dominance"] is True

    def test_rerun_byte_identical_modulo_timestamp(self, tmp_path):
        cfg_path = write_cfg(tmp_path, dict(BASE))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert cli.main(["--config", str(cfg_path), "--out", str(out1), "--quiet"]) == 0
        assert cli.main(["--config", str(cfg_path), "--out", str(out2), "--quiet"]) == 0
        assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
        m1 = [l for l in (out1 / "manifest.yaml").read_text().splitlines()
              if not l.startswith("timestamp")]
        m2 = [l for l in (out2 / "manifest.yaml").read_text().splitlines()
              if not l.startswith("timestamp")]
        assert m1 == m2

    def test_seed_override_changes_results(self, tmp_path):
        cfg_path = write_cfg(tmp_path, dict(BASE))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["task"]["u"] = [1.0]
        cfg_path = write_cfg(tmp_path, cfg)
        cli.main(["--config", str(cfg_path), "--out", str(out1), "--quiet"])
        cli.main(["--config", str(cfg_path), "--out", str(out2), "--seed", "7",
                  "--paths", "300", "--quiet"])
        r1, r2 = read_rows(out1), read_rows(out2)
        assert r1[0]["value"] != r2[0]["value"] or r1[0]["n_or_grid"] != r2[0]["n_or_grid"]
        assert r2[0]["n_or_grid"] == "300"

    def test_closed_form_task(self, tmp_path):
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["task"] = {"type": "closed-form", "formula": "ruin-corr1",
                       "u": [0.5, 1.0]}
        del cfg["numerics"]
        out = tmp_path / "o"
        rc = cli.main(["--config", str(write_cfg(tmp_path, cfg)),
                       "--out", str(out), "--quiet"])
        assert rc == 0
        rows = read_rows(out)
        assert len(rows) == 2
        assert rows[0]["method"] == "closed"
        assert float(rows[0]["value"]) == pytest.approx(0.661961, abs=1e-5)

    def test_numeric_failure_exit_code(self, tmp_path):
        # scale integral diverges: r - sigma_R^2/2 <= 0 is a numeric error
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["model"]["r"] = 0.05
        cfg["task"] = {"type": "closed-form", "formula": "ruin-corr1", "u": [1.0]}
        del cfg["numerics"]
        rc = cli.main(["--config", str(write_cfg(tmp_path, cfg)),
                       "--out", str(tmp_path / "o"), "--quiet"])
        assert rc == 3

    def test_solve_ide_task(self, tmp_path):
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["model"].update({"r": 0.05, "rho": 0.3, "delta": 0.1})
        cfg["task"] = {"type": "solve-ide", "variant": "phi", "u": [0.5, 1.0]}
        cfg["numerics"] = {"grid": {"u_max": 50.0, "n": 2001}}
        out = tmp_path / "o"
        rc = cli.main(["--config", str(write_cfg(tmp_path, cfg)),
                       "--out", str(out), "--quiet"])
        assert rc == 0
        rows = read_rows(out)
        assert rows[0]["method"] == "ide"
        assert 0.0 < float(rows[0]["value"]) <= 1.0

    def test_gerber_and_dividend_tasks(self, tmp_path):
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["model"].update({"delta": 0.2, "r": 0.05})
        cfg["task"] = {"type": "dividends-threshold", "u": [0.5], "b": 1.0,
                       "mu": 0.5, "k_max": 2, "y_grid": [0.0, 0.1]}
        out = tmp_path / "o"
        rc = cli.main(["--config", str(write_cfg(tmp_path, cfg)),
                       "--out", str(out), "--quiet"])
        assert rc == 0
        rows = read_rows(out)
        kinds = {r["scenario"] for r in rows}
        assert "threshold:V1" in kinds and "threshold:V2" in kinds
        mgf0 = [r for r in rows if r["scenario"] == "threshold:mgf@y=0.0"][0]
        assert float(mgf0["value"]) == 1.0


class TestCrosscheckTask:
    def _fake_report(self, passed):
        comp = Comparison("psi(1)", "mc", 0.5, "closed", 0.5 if passed else 0.4,
                          0.0 if passed else 0.1, 0.01, passed)
        row = ResultRow(1.0, 0.5, 0.01, "mc", "psi", 100)
        return CrosscheckReport("fake-scenario", (row,), (comp,))

    def test_exit_code_four_on_failure(self, tmp_path, monkeypatch):
        import jdrisk.cli as cli_mod
        monkeypatch.setattr(cli_mod, "run_scenario",
                            lambda name, **kw: self._fake_report(False))
        monkeypatch.setattr(cli_mod, "scenario_names", lambda: ["fake-scenario"])
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["task"] = {"type": "crosscheck", "scenario": "fake-scenario"}
        rc = cli_mod.main(["--config", str(write_cfg(tmp_path, cfg)),
                           "--out", str(tmp_path / "o"), "--quiet"])
        assert rc == 4

    def test_pass_writes_comparisons(self, tmp_path, monkeypatch):
        import jdrisk.cli as cli_mod
        monkeypatch.setattr(cli_mod, "run_scenario",
                            lambda name, **kw: self._fake_report(True))
        monkeypatch.setattr(cli_mod, "scenario_names", lambda: ["fake-scenario"])
        cfg = yaml.safe_load(yaml.safe_dump(BASE))
        cfg["task"] = {"type": "crosscheck", "scenario": "fake-scenario"}
        out = tmp_path / "o"
        rc = cli_mod.main(["--config", str(write_cfg(tmp_path, cfg)),
                           "--out", str(out), "--quiet"])
        assert rc == 0
        manifest = yaml.safe_load((out / "manifest.yaml").read_text())
        assert manifest["extras"]["comparisons"][0]["passed"] is True
