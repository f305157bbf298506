"""
Tests for the command-line surface: outputs, exit codes and bound parsing
"""

import json
import math
import os

import coupling
import pytest
from cli import evaluate_bound, main, parse_bound_parameters
from errors import ConfigError

SMALL = "N_GRID=16\nK_GRID=2\nTRIALS=2\nSEED=3\nWINDOW=100\n"


@pytest.mark.unit
class TestBoundsCommand:
    """bounds KIND NAME=VALUE..."""

    def test_parameter_aliases(self):
        parameters = parse_bound_parameters(["X0=0.5", "EX0sq=1", "VarX=2", "T=10"])
        assert parameters == {"x0": 0.5, "ex0_sq": 1.0, "var_x": 2.0, "T": 10}
        assert isinstance(parameters["T"], int)

    @pytest.mark.parametrize("pairs", [["lam"], ["lam=abc"]])
    def test_malformed_parameters(self, pairs):
        with pytest.raises(ConfigError):
            parse_bound_parameters(pairs)

    def test_calculator_errors_are_config_errors(self):
        """Missing parameters and out-of-range values both exit with code 2"""
        with pytest.raises(ConfigError):
            evaluate_bound("freedman", {"lam": 1.0})
        with pytest.raises(ConfigError):
            evaluate_bound("gambler-ruin", {"x0": 9, "L": 0, "U": 1, "D": 1, "S": 1, "theta": 1})

    def test_freedman_from_command_line(self, capsys):
        assert main(["bounds", "freedman", "lam=10", "W=50", "D=1"]) == 0
        printed = json.loads(capsys.readouterr().out)
        assert printed["kind"] == "freedman"
        assert printed["value"] == pytest.approx(math.exp(-100 / 120))

    def test_gambler_ruin_from_command_line(self, capsys):
        code = main(
            ["bounds", "gambler-ruin", "X0=0", "L=-5", "U=5", "D=1", "S=1", "theta=0.5"]
        )
        assert code == 0
        assert json.loads(capsys.readouterr().out)["phi"] == pytest.approx(0.75)

    def test_bad_bound_exit_code(self, capsys):
        assert main(["bounds", "variance-stop", "S=1", "EX0sq=4", "EXtausq=1"]) == 2
        assert "error" in capsys.readouterr().err


@pytest.mark.integration
class TestExperimentCommands:
    """Subcommands write their outputs and map failures to exit codes"""

    def test_simulate_json(self, config_file, temp_dir):
        assert main(["--config", config_file(SMALL), "--out", temp_dir, "simulate"]) == 0
        with open(os.path.join(temp_dir, "simulate.json"), encoding="utf-8") as handle:
            report = json.load(handle)
        assert report["n"] == 16
        assert report["snapshots"][0][1] == [8, 8]

    def test_simulate_csv(self, config_file, temp_dir):
        args = ["--config", config_file(SMALL), "--out", temp_dir, "--format", "csv", "simulate"]
        assert main(args) == 0
        with open(os.path.join(temp_dir, "simulate.csv"), encoding="utf-8") as handle:
            assert handle.readline().strip() == "step,gamma,counts"

    def test_sweep_writes_csv_and_json(self, config_file, temp_dir):
        assert main(["--config", config_file(SMALL), "--out", temp_dir, "sweep"]) == 0
        assert os.path.isfile(os.path.join(temp_dir, "sweep.csv"))
        assert os.path.isfile(os.path.join(temp_dir, "sweep.json"))

    def test_drift_check_outputs(self, config_file, temp_dir):
        assert main(["--config", config_file(SMALL), "--out", temp_dir, "drift-check"]) == 0
        with open(os.path.join(temp_dir, "drift.csv"), encoding="utf-8") as handle:
            assert handle.readline().strip() == "t,statistic,predicted,empirical,bound,violation"
        assert os.path.isfile(os.path.join(temp_dir, "drift.json"))

    def test_missed_window_exit_code(self, config_file, temp_dir):
        """--check turns a missed acceptance window into exit code 3"""
        path = config_file(SMALL.replace("K_GRID=2", "K_GRID=2,4") + "SLOPE_WINDOW=100,200\n")
        assert main(["--config", path, "--out", temp_dir, "sweep"]) == 0
        assert main(["--config", path, "--out", temp_dir, "sweep", "--check"]) == 3

    def test_config_error_exit_code(self, config_file, temp_dir):
        path = config_file("N_GRID=16\nUNKNOWN=1\n")
        assert main(["--config", path, "--out", temp_dir, "simulate"]) == 2

    def test_missing_kappa_exit_code(self, config_file, temp_dir):
        assert main(["--config", config_file(SMALL), "--out", temp_dir, "many-opinions"]) == 2

    def test_budget_exit_code(self, config_file, temp_dir, monkeypatch):
        """Coupling more opinions than the budget allows exits with code 4"""
        monkeypatch.setattr(coupling.config, "COUPLING_MAX_K", 16)
        path = config_file("INIT=all-distinct\nN_GRID=20\nTRIALS=1\n")
        assert main(["--config", path, "--out", temp_dir, "couple", "--skip-duality"]) == 4

    def test_seed_flag_overrides_file(self, config_file, temp_dir):
        """Different --seed values give different simulations"""
        path = config_file(SMALL)
        outputs = []
        for seed in ("1", "2"):
            assert main(["--config", path, "--out", temp_dir, "--seed", seed, "simulate"]) == 0
            with open(os.path.join(temp_dir, "simulate.json"), encoding="utf-8") as handle:
                outputs.append(json.load(handle)["seed"])
        assert outputs[0] != outputs[1]

    def test_value_error_exit_code(self, config_file, temp_dir, monkeypatch, capsys):
        """A ValueError raised inside a command exits with code 2, not a traceback"""
        import cli

        def broken(cfg, args):
            raise ValueError("counts must be non-negative")

        monkeypatch.setitem(cli.COMMANDS, "simulate", broken)
        assert main(["--config", config_file(SMALL), "--out", temp_dir, "simulate"]) == 2
        assert "non-negative" in capsys.readouterr().err
