"""Tests for configuration ingestion, CLI behavior, and artifact persistence."""

import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from rieszlab.cli import main
from rieszlab.config import RunConfig, apply_overrides, default_config, load_config
from rieszlab.errors import ConfigError


def write_config(tmp_path: Path, body: str) -> str:
    path = tmp_path / "run.toml"
    path.write_text(body)
    return str(path)


class TestConfigLoading:
    def test_defaults_validate(self):
        cfg = RunConfig.from_file(None)
        assert cfg.scenario == "simulate"
        assert cfg.grid().n_points == 128
        assert cfg.params().gamma == 2.0

    def test_file_merge(self, tmp_path):
        path = write_config(
            tmp_path,
            """
            output_dir = "out"
            [params]
            gamma = 1.5
            lambda = 0.02
            [stepper]
            t_end = 0.25
            """,
        )
        cfg = RunConfig.from_file(path)
        assert cfg.params().gamma == 1.5
        assert cfg.params().lam == 0.02
        assert cfg.stepper().t_end == 0.25
        # untouched keys keep defaults
        assert cfg.params().nu == 1.0

    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, "[params]\nviscosity = 0.1\n")
        with pytest.raises(ConfigError, match="params.viscosity"):
            load_config(path)

    def test_unknown_table_rejected(self, tmp_path):
        path = write_config(tmp_path, "[forcing]\nkind = 'none'\n")
        with pytest.raises(ConfigError, match="forcing"):
            load_config(path)

    def test_invalid_toml_reported(self, tmp_path):
        path = write_config(tmp_path, "params = (broken\n")
        with pytest.raises(ConfigError, match="invalid TOML"):
            load_config(path)

    def test_overrides(self):
        doc = apply_overrides(default_config(), ["params.nu=0.25", "grid.n_points=64"])
        assert doc["params"]["nu"] == 0.25
        assert doc["grid"]["n_points"] == 64

    def test_override_unknown_key(self):
        with pytest.raises(ConfigError):
            apply_overrides(default_config(), ["params.mass=1"])

    def test_override_string_value(self):
        doc = apply_overrides(default_config(), ['stepper.dt="auto"'])
        assert doc["stepper"]["dt"] == "auto"

    def test_alpha_constraint_cited(self):
        with pytest.raises(ConfigError, match=r"max\(d-2, 0\) <= alpha < d"):
            RunConfig.from_file(None, ["params.alpha=1.0"])  # d = 1

    def test_eps_list_validation(self):
        cfg = RunConfig.from_file(None, ["relax_limit.eps=[0.1, 0.2]"])
        with pytest.raises(ConfigError, match="decreasing"):
            _ = cfg.relax_eps

    def test_dt_auto_or_number(self):
        cfg = RunConfig.from_file(None, ["stepper.dt=0.001"])
        assert cfg.stepper().dt == 0.001
        cfg2 = RunConfig.from_file(None, ['stepper.dt="auto"'])
        assert cfg2.stepper().dt is None
        with pytest.raises(ConfigError):
            RunConfig.from_file(None, ['stepper.dt="fast"']).stepper()


class TestCliExitCodes:
    def test_config_error_exit_2(self, capsys):
        code = main(["simulate", "--set", "params.alpha=1.0"])
        assert code == 2
        assert "alpha" in capsys.readouterr().err

    def test_unknown_key_exit_2(self, capsys):
        code = main(["simulate", "--set", "params.bogus=1"])
        assert code == 2

    def test_dry_run_prints_resolved_config(self, capsys, tmp_path):
        code = main(
            ["simulate", "--dry-run", "-o", str(tmp_path), "--set", "params.nu=0.5"]
        )
        assert code == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["params"]["nu"] == 0.5
        assert doc["output_dir"] == str(tmp_path)
        assert not (tmp_path / "summary.json").exists()

    def test_selftest_exit_codes(self, capsys):
        assert main(["selftest"]) == 0
        out = capsys.readouterr().out
        assert "checks passed" in out
        assert main(["selftest", "--sabotage", "riesz-force-sign"]) == 4
        out = capsys.readouterr().out
        assert "FAIL riesz-force-sign" in out

    def test_selftest_check_count(self, capsys):
        main(["selftest"])
        out = capsys.readouterr().out
        n = int(out.strip().splitlines()[-1].split("/")[1].split()[0])
        assert n >= 30

    def test_numerical_failure_exit_3(self, capsys, tmp_path):
        # pressureless attractive blowup trips the guard -> exit 3
        code = main(
            [
                "simulate",
                "-o",
                str(tmp_path / "blow"),
                "--set", "params.pressure=false",
                "--set", "params.nu=0.0",
                "--set", "params.lambda=5.0",
                "--set", "initial.amplitude=0.3",
                "--set", "initial.mode=4",
                "--set", "stepper.t_end=50.0",
                "--set", "stepper.dt=0.01",
                "--set", 'stepper.scheme="rk4"',
                "--set", "grid.n_points=64",
            ]
        )
        assert code == 3
        assert "numerical failure" in capsys.readouterr().err


class TestArtifacts:
    def test_simulate_writes_artifacts(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(
            [
                "simulate",
                "-o", str(out),
                "--set", "stepper.t_end=0.2",
                "--set", "grid.n_points=64",
                "--set", "snapshots.count=3",
            ]
        )
        assert code == 0
        csv_path = out / "timeseries.csv"
        summary_path = out / "summary.json"
        assert csv_path.exists() and summary_path.exists()

        header = csv_path.read_text().splitlines()[0].split(",")
        assert header == [
            "t", "mass", "neutrality_residual", "mc_0",
            "norm_h_Hm", "norm_u_Hm", "L", "E", "E_mu", "X_m", "D", "min_rho",
        ]

        summary = json.loads(summary_path.read_text())
        assert summary["scenario"] == "simulate"
        assert summary["package"]["name"] == "rieszlab"
        assert "conventions" in summary and "volume" in summary["conventions"]
        assert summary["config"]["stepper"]["t_end"] == 0.2

        def walk(node):
            if isinstance(node, dict):
                for v in node.values():
                    walk(v)
            elif isinstance(node, list):
                for v in node:
                    walk(v)
            elif isinstance(node, float):
                assert np.isfinite(node)

        walk(summary["results"])

        snaps = sorted((out / "snapshots").glob("*.json"))
        assert snaps
        sidecar = json.loads(snaps[0].read_text())
        raw = (out / "snapshots" / sidecar["fields"][0]["file"]).read_bytes()
        arr = np.frombuffer(raw, dtype="<f8")
        assert arr.size == sidecar["n_points"] ** sidecar["d"]
        assert np.all(np.isfinite(arr))

    def test_reproducible_timeseries(self, tmp_path):
        base = [
            "simulate",
            "--set", "stepper.t_end=0.2",
            "--set", "grid.n_points=64",
            "--set", 'initial.family="random-band"',
            "--set", "initial.seed=3",
            "--set", "initial.amplitude=0.05",
        ]
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(base + ["-o", str(a)]) == 0
        assert main(base + ["-o", str(b)]) == 0
        assert (a / "timeseries.csv").read_bytes() == (b / "timeseries.csv").read_bytes()

    def test_equilibrium_scenario_all_zero_diagnostics(self, tmp_path):
        out = tmp_path / "equil"
        code = main(
            [
                "simulate",
                "-o", str(out),
                "--set", 'initial.family="equilibrium"',
                "--set", "stepper.t_end=0.3",
                "--set", "grid.n_points=32",
            ]
        )
        assert code == 0
        rows = (out / "timeseries.csv").read_text().splitlines()
        header = rows[0].split(",")
        for row in rows[1:]:
            vals = dict(zip(header, map(float, row.split(","))))
            for name in ("E", "D", "L", "X_m"):
                assert abs(vals[name]) <= 1e-12

    def test_constants_artifact(self, tmp_path):
        out = tmp_path / "const"
        code = main(
            [
                "constants",
                "-o", str(out),
                "--set", "grid.d=2",
                "--set", "params.alpha=1.5",
            ]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["results"]["k_0"] == 2

    def test_dispersion_artifact(self, tmp_path):
        out = tmp_path / "disp"
        code = main(["dispersion", "-o", str(out), "--set", "dispersion.modes=[1,8]"])
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert len(summary["results"]["modes"]) == 2
        m8 = summary["results"]["modes"][1]
        assert m8["max_growth_without_pressure"] > 0


class TestConsoleEntryPoint:
    def test_installed_script(self):
        proc = subprocess.run(
            [sys.executable, "-m", "rieszlab.cli", "selftest"],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert proc.returncode == 0
        assert "checks passed" in proc.stdout
