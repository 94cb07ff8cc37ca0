"""
Unit tests for the command-line interface
"""
import io
import json

import pandas as pd
import pytest

from src.main import EXIT_INPUT_ERROR, EXIT_OK, EXIT_PROPERTY_VIOLATED, main
from src.schemas import SweepConfig
from src.services.experiment import counterexample_model, instance_model
from src.services.model_io import load_model, save_model


@pytest.fixture
def poisson_file(tmp_path):
    path = tmp_path / "poisson.json"
    path.write_text('{"C": [[-1.0]], "D": [[1.0]]}')
    return path


@pytest.fixture
def mmpp2_file(tmp_path, mmpp2):
    path = tmp_path / "mmpp2.json"
    save_model(mmpp2, path)
    return path


@pytest.fixture
def counterexample_file(tmp_path, counterexample):
    path = tmp_path / "cyclic.json"
    save_model(counterexample, path)
    return path


class TestAnalyze:
    """analyze subcommand"""

    def test_poisson_all_hold(self, poisson_file, capsys):
        """Exit 0 and a full JSON report"""
        assert main(["analyze", str(poisson_file)]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["scv"] == pytest.approx(1.0)
        assert all(v["holds"] for v in report["verdicts"])

    def test_counterexample_violates(self, counterexample_file, capsys):
        """Hazard violation exits 2"""
        assert main(["analyze", str(counterexample_file)]) == EXIT_PROPERTY_VIOLATED
        report = json.loads(capsys.readouterr().out)
        verdicts = {v["property"]: v["holds"] for v in report["verdicts"]}
        assert verdicts == {"I": True, "II": False, "III": True, "IV": True}

    def test_malformed_json(self, tmp_path, capsys):
        """Exit 1 without partial output"""
        path = tmp_path / "bad.json"
        path.write_text('{"C": [[-1.0]], ')
        assert main(["analyze", str(path)]) == EXIT_INPUT_ERROR
        assert capsys.readouterr().out == ""

    def test_invalid_model(self, tmp_path, capsys):
        """Rule violations exit 1"""
        path = tmp_path / "bad.json"
        path.write_text('{"C": [[-1.0]], "D": [[3.0]]}')
        assert main(["analyze", str(path)]) == EXIT_INPUT_ERROR
        assert capsys.readouterr().out == ""

    def test_missing_file(self, tmp_path):
        """Unreadable input exits 1"""
        assert main(["analyze", str(tmp_path / "absent.json")]) == EXIT_INPUT_ERROR

    def test_output_file(self, poisson_file, tmp_path, capsys):
        """--output writes the report to disk"""
        out = tmp_path / "report.json"
        assert main(["analyze", str(poisson_file), "--output", str(out)]) == EXIT_OK
        assert capsys.readouterr().out == ""
        assert json.loads(out.read_text())["order"] == 1


class TestSweep:
    """sweep subcommand"""

    def test_small_sweep(self, capsys):
        """Exit 0 with every instance recorded"""
        assert main(["sweep", "--order", "3", "--n", "20", "--seed", "1"]) == EXIT_OK
        outcome = json.loads(capsys.readouterr().out)
        assert len(outcome["instances"]) == 20
        assert outcome["config"]["seed"] == 1
        assert outcome["hard_violations"] == 0

    def test_cyclic_generator(self, capsys):
        """--generator cyclic --order 4"""
        assert main(["sweep", "--generator", "cyclic", "--order", "4", "--n", "20"]) == EXIT_OK
        outcome = json.loads(capsys.readouterr().out)
        assert outcome["config"]["generator"] == "cyclic"
        assert outcome["config"]["orders"] == [4]

    def test_zero_instances(self, capsys):
        """--n 0 is a usage error"""
        assert main(["sweep", "--n", "0"]) == EXIT_INPUT_ERROR
        assert capsys.readouterr().out == ""

    def test_config_file_with_override(self, tmp_path, capsys):
        """Flags override config file values"""
        config = tmp_path / "sweep.json"
        config.write_text(json.dumps({"orders": [3], "n_instances": 50, "seed": 9}))
        assert main(["sweep", "--config", str(config), "--n", "5"]) == EXIT_OK
        outcome = json.loads(capsys.readouterr().out)
        assert outcome["config"]["n_instances"] == 5
        assert outcome["config"]["seed"] == 9

    def test_csv_export(self, tmp_path, capsys):
        """Per-instance margins as CSV"""
        csv_path = tmp_path / "margins.csv"
        assert main(["sweep", "--order", "3", "--n", "5", "--csv", str(csv_path)]) == EXIT_OK
        frame = pd.read_csv(csv_path)
        assert list(frame.columns[:5]) == ["order", "index", "scv_margin", "min_gap", "argmin_t"]
        assert len(frame) == 5

    def test_save_flagged_models(self, tmp_path, capsys):
        """Flagged instances are written as model files that reload to the same model"""
        models_dir = tmp_path / "flagged"
        args = ["sweep", "--order", "3", "--n", "4", "--seed", "2", "--tolerance", "-1", "--save-flagged", str(models_dir)]
        assert main(args) == EXIT_OK
        outcome = json.loads(capsys.readouterr().out)
        assert outcome["flagged"] == 4
        cfg = SweepConfig(orders=[3], n_instances=4, seed=2, tolerance=-1.0)
        for index in range(4):
            restored = load_model(models_dir / f"order3_{index}.json")
            assert restored == instance_model(cfg, 3, index)

    def test_deterministic_output(self, capsys):
        """Identical seeds give byte-identical JSON"""
        main(["sweep", "--order", "3", "--n", "10", "--seed", "4"])
        first = capsys.readouterr().out
        main(["sweep", "--order", "3", "--n", "10", "--seed", "4"])
        assert capsys.readouterr().out == first


class TestCurves:
    """hazard, gap and variance subcommands"""

    def test_gap_poisson_is_zero(self, poisson_file, capsys):
        """All-zero gap column"""
        assert main(["gap", str(poisson_file)]) == EXIT_OK
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert list(frame.columns) == ["t", "value"]
        assert len(frame) == 51
        assert (frame["value"].abs() < 1e-15).all()

    def test_hazard_columns(self, mmpp2_file, capsys):
        """t, value, derivative"""
        assert main(["hazard", str(mmpp2_file), "--t-step", "0.5"]) == EXIT_OK
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert list(frame.columns) == ["t", "value", "derivative"]
        assert frame["value"].iloc[0] == pytest.approx(2.5)

    def test_hazard_time_stationary(self, mmpp2_file, capsys):
        """--start time_stationary uses pi"""
        assert main(["hazard", str(mmpp2_file), "--start", "time_stationary", "--t-stop", "0"]) == EXIT_OK
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert frame["value"].iloc[0] == pytest.approx(2.0)

    def test_variance_json(self, mmpp2_file, capsys):
        """Var/E at t = 50 is 3/2 - 1/200"""
        argv = ["variance", str(mmpp2_file), "--t-start", "50", "--t-stop", "50", "--format", "json"]
        assert main(argv) == EXIT_OK
        (row,) = json.loads(capsys.readouterr().out)
        assert row["t"] == 50.0
        assert row["value"] == pytest.approx(1.495, rel=1e-9)


class TestCounterexampleCommand:
    """counterexample subcommand"""

    def test_emits_hazard_samples(self, capsys):
        """1001 samples on [0, 10]"""
        assert main(["counterexample"]) == EXIT_OK
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert len(frame) == 1001
        assert (frame["derivative"] > 0).any()

    def test_model_out_round_trip(self, tmp_path, capsys):
        """The written model reloads unchanged and analyzes as a hazard violation"""
        path = tmp_path / "cyclic.json"
        assert main(["counterexample", "--model-out", str(path)]) == EXIT_OK
        capsys.readouterr()
        assert load_model(path) == counterexample_model()
        assert main(["analyze", str(path)]) == EXIT_PROPERTY_VIOLATED
        report = json.loads(capsys.readouterr().out)
        holds = {v["property"]: v["holds"] for v in report["verdicts"]}
        assert list(holds.values()).count(False) == 1


class TestSimulateCommand:
    """simulate subcommand"""

    def test_poisson(self, poisson_file, capsys, tmp_path):
        """Report carries the seed and analytic values"""
        events = tmp_path / "events.csv"
        argv = [
            "simulate",
            str(poisson_file),
            "--n-events",
            "20000",
            "--ks-samples",
            "2000",
            "--seed",
            "5",
            "--events-csv",
            str(events),
        ]
        assert main(argv) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["seed"] == 5
        assert report["scv_analytic"] == pytest.approx(1.0)
        assert report["d2_analytic"] == pytest.approx(1.0)
        frame = pd.read_csv(events)
        assert list(frame.columns) == ["event_index", "time", "phase_after_event"]
        assert len(frame) == 20000


class TestUsage:
    """Parser errors"""

    def test_unknown_command(self):
        """Exit 1"""
        assert main(["plot"]) == EXIT_INPUT_ERROR

    def test_missing_command(self):
        """A subcommand is required"""
        assert main([]) == EXIT_INPUT_ERROR
