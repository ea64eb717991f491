import json

import numpy as np
import pandas as pd
import pytest

from nsklimit.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, cli_main
from nsklimit.config import Formulation
from nsklimit.core import Grid1D, State
from nsklimit.reports import load_trajectory, save_trajectory
from nsklimit.solver import Trajectory

from conftest import make_constant_trajectory


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("NSKLIMIT_OUTPUT_DIR", "NSKLIMIT_LOG_LEVEL", "NSKLIMIT_MAX_WORKERS"):
        monkeypatch.delenv(name, raising=False)


class TestRiemann:
    def test_stdout(self, capsys):
        code = cli_main(["riemann", "--gamma", "2", "--rho-left", "1", "--u-left", "-0.5",
                         "--rho-right", "1", "--u-right", "0.5", "--points", "5"])
        assert code == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("# {")
        header = json.loads(lines[0][2:])
        assert header["wave1"] == "rarefaction"
        assert lines[1] == "xi,rho,u"
        assert len(lines) == 7

    def test_file_output(self, tmp_path):
        out = tmp_path / "profiles" / "sod.csv"
        code = cli_main(["riemann", "--gamma", "1.4", "--a", "1.0", "--rho-left", "2", "--rho-right", "1",
                         "--xi-min", "-3", "--xi-max", "3", "--points", "11", "--out", str(out)])
        assert code == EXIT_OK
        frame = pd.read_csv(out, comment="#")
        assert list(frame.columns) == ["xi", "rho", "u"]
        assert frame["rho"].iloc[0] == pytest.approx(2.0)
        assert frame["rho"].iloc[-1] == pytest.approx(1.0)

    def test_sampling_time_adds_positions(self, tmp_path):
        out = tmp_path / "at_t.csv"
        code = cli_main(["riemann", "--gamma", "2", "--rho-left", "1", "--u-left", "-0.5",
                         "--rho-right", "1", "--u-right", "0.5", "--xi-min", "-1", "--xi-max", "1",
                         "--points", "5", "--t", "0.5", "--out", str(out)])
        assert code == EXIT_OK
        header = json.loads(out.read_text().splitlines()[0][2:])
        assert header["t"] == 0.5
        frame = pd.read_csv(out, comment="#")
        assert list(frame.columns) == ["xi", "rho", "u", "x"]
        assert frame["x"].tolist() == pytest.approx([-0.5, -0.25, 0.0, 0.25, 0.5])
        # kinetic a at γ = 2: v + √ρ is constant across the 1-fan, so ρ* = 0.25
        assert frame["rho"].iloc[2] == pytest.approx(0.25, rel=1e-10)
        assert frame["u"].iloc[2] == pytest.approx(0.0, abs=1e-11)

    def test_nonpositive_sampling_time(self):
        code = cli_main(["riemann", "--gamma", "2", "--rho-left", "1", "--rho-right", "1", "--t", "0"])
        assert code == EXIT_USAGE

    def test_nonpositive_density_is_a_usage_error(self, capsys):
        code = cli_main(["riemann", "--gamma", "2", "--rho-left", "0", "--rho-right", "1"])
        assert code == EXIT_USAGE
        assert "error:" in capsys.readouterr().err


def test_argument_errors():
    assert cli_main(["riemann", "--gamma", "2"]) == EXIT_USAGE
    assert cli_main(["bogus"]) == EXIT_USAGE
    assert cli_main(["--help"]) == EXIT_OK


class TestSimulate:
    def test_writes_run_directory(self, config_file, tmp_path):
        out = tmp_path / "sim"
        assert cli_main(["simulate", "--config", str(config_file), "--out", str(out)]) == EXIT_OK
        assert sorted(p.name for p in out.glob("snapshot_*.csv")) == [f"snapshot_{k:03d}.csv" for k in range(4)]
        meta = json.loads((out / "run.json").read_text())
        assert meta["times"] == pytest.approx([0.0, 0.1, 0.2, 0.3])
        assert meta["formulation"] == "effective"
        assert meta["bounds"]["window"] == [-1.0, 1.0]
        assert meta["condition_h"]["passed"] is True
        assert (out / "series.csv").is_file()
        assert "epsilon = 0.1" in (out / "config.cfg").read_text()

        traj = load_trajectory(out)
        assert traj.grid.n == 120
        assert traj.mass_balance_error < 1e-10

    def test_default_output_dir_from_environment(self, config_file, tmp_path, monkeypatch):
        monkeypatch.setenv("NSKLIMIT_OUTPUT_DIR", str(tmp_path / "runs"))
        assert cli_main(["--log-level", "DEBUG", "simulate", "--config", str(config_file)]) == EXIT_OK
        assert (tmp_path / "runs" / "simulate" / "run.json").is_file()

    def test_missing_config(self, tmp_path):
        assert cli_main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == EXIT_USAGE

    def test_bad_config(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("gamma = 2\nrho_minus = 1\nrho_plus = 1\nt_end = 0.1\nviscosity = 3\n")
        assert cli_main(["simulate", "--config", str(path)]) == EXIT_USAGE


class TestCheck:
    def test_simulated_run(self, config_file, tmp_path):
        out = tmp_path / "sim"
        assert cli_main(["simulate", "--config", str(config_file), "--out", str(out)]) == EXIT_OK
        code = cli_main(["check", "--dir", str(out), "--psi", "half_square"])
        report = json.loads((out / "check.json").read_text())
        assert code == (EXIT_OK if report["verdict"] == "PASS" else EXIT_FAILURE)
        assert report["invariant_violation"] <= 1e-3 * report["invariant_spread"]
        assert report["mass_balance_error"] < 1e-10
        assert set(report["entropy_residuals"]) == {"mechanical", "half_square"}
        assert report["contaminated"] is False

    def test_constant_run_passes(self, kinetic2, uniform_far, tmp_path):
        traj = make_constant_trajectory(Grid1D(-1.0, 1.0, 64), kinetic2, uniform_far, [0.0, 0.5, 1.0])
        save_trajectory(traj, tmp_path / "const")
        code = cli_main(["check", "--dir", str(tmp_path / "const"), "--psi", "compact_bump", "--bump", "-0.5", "2"])
        assert code == EXIT_OK
        report = json.loads((tmp_path / "const" / "check.json").read_text())
        assert report["verdict"] == "PASS"
        assert "compact_bump[-0.5,2]" in report["entropy_residuals"]

    def test_invariant_violation_fails(self, kinetic2, uniform_far, tmp_path):
        grid = Grid1D(-1.0, 1.0, 32)
        bumped = np.where(np.abs(grid.x) < 0.25, 0.2, 0.0)
        snaps = [
            State(np.ones(32), np.zeros(32), Formulation.EFFECTIVE_V, 0.0),
            State(np.ones(32), bumped, Formulation.EFFECTIVE_V, 0.5),
            State(np.ones(32), np.zeros(32), Formulation.EFFECTIVE_V, 1.0),
        ]
        save_trajectory(Trajectory(grid, uniform_far, kinetic2, Formulation.EFFECTIVE_V, snaps), tmp_path / "bad")
        assert cli_main(["check", "--dir", str(tmp_path / "bad")]) == EXIT_FAILURE
        report = json.loads((tmp_path / "bad" / "check.json").read_text())
        assert report["verdict"] == "FAIL"
        assert any("invariant region" in f for f in report["failures"])

    def test_missing_directory(self, tmp_path):
        assert cli_main(["check", "--dir", str(tmp_path / "absent")]) == EXIT_USAGE


class TestConverge:
    def test_two_row_sweep(self, config_file, tmp_path):
        out = tmp_path / "conv"
        code = cli_main(["converge", "--config", str(config_file), "--epsilons", "0.125,0.0625", "--out", str(out)])
        assert code == EXIT_OK
        frame = pd.read_csv(out / "convergence.csv")
        assert frame["epsilon"].tolist() == [0.125, 0.0625]
        assert (frame["status"] == "ok").all()
        table = json.loads((out / "convergence.json").read_text())
        assert len(table["rows"]) == 2
        assert (out / "report_eps_1.json").is_file()

    def test_increasing_epsilons_rejected(self, config_file, tmp_path):
        code = cli_main(["converge", "--config", str(config_file), "--epsilons", "0.1,0.2", "--out", str(tmp_path / "c")])
        assert code == EXIT_USAGE

    def test_malformed_epsilon_list(self, config_file):
        assert cli_main(["converge", "--config", str(config_file), "--epsilons", "0.1,abc"]) == EXIT_USAGE
