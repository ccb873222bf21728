"""Tests for the shapeci command line."""

import json
from pathlib import Path

import pandas as pd
import pytest
from pytest_mock import MockerFixture

from shapeci import __version__
from shapeci.cli import main, parse_config_file
from shapeci.config import ShapeCISettings
from shapeci.core.errors import ConvergenceError, InvalidInputError
from shapeci.estimators import CharacterizationReport


@pytest.fixture(autouse=True)
def isolated_settings(clean_env: None, monkeypatch: pytest.MonkeyPatch) -> ShapeCISettings:
    """Settings that ignore any .env file and never draw progress bars."""
    settings = ShapeCISettings(_env_file=None, progress=False)  # type: ignore[call-arg]
    monkeypatch.setattr("shapeci.cli.get_settings", lambda: settings)
    return settings


@pytest.fixture(autouse=True)
def workdir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Run every command from a scratch directory so default manifests stay contained."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


@pytest.fixture
def regression_fit(tmp_path: Path, regression_csv: Path) -> Path:
    """Convex regression fit file of the quadratic fixture data."""
    out = tmp_path / "fit.json"
    assert main(["fit", str(regression_csv), "--out", str(out)]) == 0
    return out


class TestGlobalOptions:
    """Tests for parser-level behaviour."""

    def test_version(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that --version prints the package version."""
        with pytest.raises(SystemExit) as exc_info:
            main(["--version"])
        assert exc_info.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_no_subcommand_prints_help(self, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a bare invocation shows usage and fails."""
        assert main([]) == 2
        assert "usage: shapeci" in capsys.readouterr().err

    def test_unknown_model_is_a_usage_error(self, regression_csv: Path) -> None:
        """Test that argparse rejects an unknown --model."""
        with pytest.raises(SystemExit) as exc_info:
            main(["fit", str(regression_csv), "--model", "spline"])
        assert exc_info.value.code == 2

    def test_log_file(self, tmp_path: Path, regression_csv: Path) -> None:
        """Test that --log-file receives debug records."""
        log_path = tmp_path / "logs" / "run.log"
        out = tmp_path / "fit.json"
        argv = ["--debug", "--log-file", str(log_path), "fit", str(regression_csv)]
        argv += ["--out", str(out)]
        assert main(argv) == 0
        assert "Logging initialized" in log_path.read_text(encoding="utf-8")


class TestFitCommand:
    """Tests for 'shapeci fit'."""

    def test_fit_to_stdout(
        self, regression_csv: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that the fit JSON goes to stdout without --out."""
        assert main(["fit", str(regression_csv)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["model"] == "convex-regression"
        assert payload["meta"]["n"] == 200
        assert len(payload["knots"]) == len(payload["values"])

    def test_fit_to_stdout_writes_default_manifest(
        self, regression_csv: Path, workdir: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that printing the fit still leaves a manifest in the working directory."""
        assert main(["fit", str(regression_csv)]) == 0
        capsys.readouterr()
        manifest = json.loads((workdir / "shapeci-fit.manifest.json").read_text())
        assert manifest["command"] == "fit"
        assert manifest["outputs"] == []
        assert manifest["config"]["model"] == "convex-regression"

    def test_explicit_manifest_path(self, tmp_path: Path, regression_csv: Path) -> None:
        """Test that --manifest overrides the location beside --out."""
        out = tmp_path / "fit.json"
        target = tmp_path / "runs" / "fit-run.json"
        assert main(["fit", str(regression_csv), "--out", str(out), "--manifest", str(target)]) == 0
        assert json.loads(target.read_text())["outputs"] == [str(out)]
        assert not Path(f"{out}.manifest.json").exists()

    def test_failed_characterization_exits_3(
        self,
        tmp_path: Path,
        regression_csv: Path,
        mocker: MockerFixture,
        capsys: pytest.CaptureFixture[str],
    ) -> None:
        """Test that an uncertified fit is an error and is not written."""
        mocker.patch(
            "shapeci.cli.check_lse_characterization",
            return_value=CharacterizationReport(
                min_gap=-1e-3, max_kink_gap=0.0, boundary_gap=0.0, tolerance=1e-9, passed=False
            ),
        )
        out = tmp_path / "fit.json"
        assert main(["fit", str(regression_csv), "--out", str(out)]) == 3
        assert "failed its characterization check" in capsys.readouterr().err
        assert not out.exists()

    def test_fit_to_file_writes_manifest(self, regression_fit: Path) -> None:
        """Test that --out writes the fit and its manifest."""
        assert json.loads(regression_fit.read_text())["model"] == "convex-regression"
        manifest = json.loads(Path(f"{regression_fit}.manifest.json").read_text())
        assert manifest["command"] == "fit"
        assert manifest["outputs"] == [str(regression_fit)]

    @pytest.mark.parametrize("model", ["log-concave", "convex-density"])
    def test_density_models(
        self, model: str, sample_csv: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test fitting both density models from a one-column CSV."""
        assert main(["fit", str(sample_csv), "--model", model]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["model"] == model
        assert payload["meta"]["n"] == 300

    def test_bad_csv(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a malformed CSV exits with the invalid-input code."""
        path = tmp_path / "bad.csv"
        path.write_text("x,z\n1,2\n2,3\n", encoding="utf-8")
        assert main(["fit", str(path)]) == 2
        assert "must have the header" in capsys.readouterr().err

    def test_missing_input(self, tmp_path: Path) -> None:
        """Test that a missing input file exits with code 2."""
        assert main(["fit", str(tmp_path / "absent.csv")]) == 2


class TestCiCommand:
    """Tests for 'shapeci ci'."""

    def test_value_with_known_sigma(
        self, regression_fit: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test a value interval with a user-supplied sigma."""
        argv = ["ci", str(regression_fit), "--target", "value", "--x0", "0.3", "--sigma", "0.1"]
        assert main(argv) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["target"] == "value"
        assert payload["x0"] == 0.3
        assert payload["lower"] <= payload["estimate"] <= payload["upper"]
        assert payload["level"] == pytest.approx(0.95)
        assert payload["piece"]["u"] <= 0.3 <= payload["piece"]["v"]

    def test_derivative_with_estimated_sigma(
        self, regression_fit: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test a derivative interval with the difference-based sigma estimate."""
        code = main(
            ["ci", str(regression_fit), "--target", "derivative", "--x0", "0.7", "--auto-sigma"]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["lower"] < payload["upper"]

    def test_mode_needs_no_sigma(
        self, regression_fit: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that the anti-mode interval is scale free."""
        assert main(["ci", str(regression_fit), "--target", "mode", "--level", "0.9"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert 0.0 <= payload["lower"] <= payload["estimate"] <= payload["upper"] <= 1.0
        assert "bracket" in payload

    def test_missing_sigma(self, regression_fit: Path, capsys: pytest.CaptureFixture[str]) -> None:
        """Test that a regression value interval without sigma exits with code 5."""
        assert main(["ci", str(regression_fit), "--x0", "0.3"]) == 5
        assert "--sigma" in capsys.readouterr().err

    def test_missing_x0(self, regression_fit: Path) -> None:
        """Test that value intervals need --x0."""
        assert main(["ci", str(regression_fit), "--sigma", "1"]) == 2

    def test_x0_outside_fit(self, regression_fit: Path) -> None:
        """Test that a point outside the knot range exits with code 4."""
        assert main(["ci", str(regression_fit), "--x0", "5", "--sigma", "1"]) == 4

    def test_level_without_table_entry(self, regression_fit: Path) -> None:
        """Test that an untabulated level exits with code 5."""
        assert main(["ci", str(regression_fit), "--target", "mode", "--level", "0.999"]) == 5

    def test_mode_of_convex_density(self, tmp_path: Path, sample_csv: Path) -> None:
        """Test that convex densities have no mode interval."""
        out = tmp_path / "density.json"
        assert main(["fit", str(sample_csv), "--model", "convex-density", "--out", str(out)]) == 0
        assert main(["ci", str(out), "--target", "mode"]) == 2

    def test_log_concave_value(
        self, tmp_path: Path, sample_csv: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test a density value interval clamped to nonnegative values."""
        out = tmp_path / "lc.json"
        assert main(["fit", str(sample_csv), "--model", "log-concave", "--out", str(out)]) == 0
        capsys.readouterr()
        assert main(["ci", str(out), "--x0", "0.4"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["lower"] >= 0.0
        assert payload["estimate"] > 0.0

    def test_manifest(self, tmp_path: Path, regression_fit: Path) -> None:
        """Test that --manifest records the table source."""
        manifest_path = tmp_path / "ci.manifest.json"
        code = main(
            ["ci", str(regression_fit), "--target", "mode", "--manifest", str(manifest_path)]
        )
        assert code == 0
        manifest = json.loads(manifest_path.read_text())
        assert manifest["command"] == "ci"
        assert manifest["table_source"] == "builtin"

    def test_default_manifest(
        self, regression_fit: Path, workdir: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that an interval printed to stdout is accompanied by a manifest."""
        assert main(["ci", str(regression_fit), "--target", "mode"]) == 0
        capsys.readouterr()
        manifest = json.loads((workdir / "shapeci-ci.manifest.json").read_text())
        assert manifest["command"] == "ci"
        assert manifest["config"]["target"] == "mode"


class TestSimulateCommand:
    """Tests for 'shapeci simulate-critical-values'."""

    def test_writes_table_ecdf_and_manifest(self, tmp_path: Path) -> None:
        """Test a tiny simulation end to end."""
        out = tmp_path / "table.json"
        code = main(
            [
                "simulate-critical-values",
                "--n", "60",
                "--reps", "6",
                "--seed", "11",
                "--sigma", "0.5",
                "--out", str(out),
            ]
        )  # fmt: skip
        assert code == 0

        table = json.loads(out.read_text())
        assert table
        assert (tmp_path / "table.ecdf.csv").exists()
        manifest = json.loads((tmp_path / "table.json.manifest.json").read_text())
        assert manifest["seed"] == 11
        assert manifest["config"]["B"] == 6

    def test_invalid_size(self, tmp_path: Path) -> None:
        """Test that an out-of-range n exits with code 2."""
        argv = ["simulate-critical-values", "--n", "3", "--out", str(tmp_path / "t.json")]
        assert main(argv) == 2


class TestCoverageCommand:
    """Tests for 'shapeci coverage'."""

    def test_small_experiment(self, tmp_path: Path) -> None:
        """Test a three-replication coverage run from a config file."""
        config = tmp_path / "experiment.cfg"
        config.write_text(
            "# smoke run\nmodel = convex-regression\nn_grid = 50,100\nreplications = 3\n"
            "seed = 3\n",
            encoding="utf-8",
        )
        out = tmp_path / "coverage.csv"
        assert main(["coverage", str(config), "--out", str(out)]) == 0

        frame = pd.read_csv(out)
        assert len(frame) == 6
        summary = json.loads((tmp_path / "coverage.json").read_text())
        assert summary["valid"] is True
        assert summary["failures"] == 0
        assert (tmp_path / "coverage.csv.manifest.json").exists()

    def test_unknown_key(self, tmp_path: Path) -> None:
        """Test that unknown experiment keys exit with code 2."""
        config = tmp_path / "experiment.cfg"
        config.write_text("colour = red\n", encoding="utf-8")
        assert main(["coverage", str(config), "--out", str(tmp_path / "c.csv")]) == 2


class TestParseConfigFile:
    """Tests for the flat experiment file format."""

    def test_key_value_pairs(self, tmp_path: Path) -> None:
        """Test that comments and blank lines are skipped."""
        path = tmp_path / "exp.cfg"
        path.write_text("# comment\n\nmodel = log-concave\nn_grid = 100,200\n", encoding="utf-8")
        assert parse_config_file(path) == {"model": "log-concave", "n_grid": "100,200"}

    def test_line_without_value(self, tmp_path: Path) -> None:
        """Test that a bare word is rejected."""
        path = tmp_path / "exp.cfg"
        path.write_text("model = log-concave\nbogus\n", encoding="utf-8")
        with pytest.raises(InvalidInputError, match="not 'key = value' pairs"):
            parse_config_file(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that an unreadable file raises InvalidInputError."""
        with pytest.raises(InvalidInputError, match="Cannot read config file"):
            parse_config_file(tmp_path / "absent.cfg")


class TestExitCodes:
    """Tests for the top-level exception mapping."""

    def test_keyboard_interrupt(self, regression_csv: Path, mocker: MockerFixture) -> None:
        """Test that Ctrl-C exits with 130."""
        mocker.patch("shapeci.cli.fit_convex_lse", side_effect=KeyboardInterrupt)
        assert main(["fit", str(regression_csv)]) == 130

    def test_unexpected_error(
        self, regression_csv: Path, mocker: MockerFixture, capsys: pytest.CaptureFixture[str]
    ) -> None:
        """Test that an unexpected exception exits with 1."""
        mocker.patch("shapeci.cli.fit_convex_lse", side_effect=RuntimeError("boom"))
        assert main(["fit", str(regression_csv)]) == 1
        assert "Unexpected error: boom" in capsys.readouterr().err

    def test_convergence_failure(self, regression_csv: Path, mocker: MockerFixture) -> None:
        """Test that solver non-convergence exits with 3."""
        mocker.patch(
            "shapeci.cli.fit_convex_lse",
            side_effect=ConvergenceError("no progress", iterations=5, residual=1.0),
        )
        assert main(["fit", str(regression_csv)]) == 3
