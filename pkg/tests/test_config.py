"""Tests for run configuration."""

import json
from pathlib import Path

import pytest

from gurlab.config import ConfigError, RunConfig, build_config, load_config_file, parse_grid
from gurlab.core import HBAR_SI, Constants
from gurlab.searcher import Objective, StateFamily


def test_defaults() -> None:
    """Test the verify defaults."""
    config = build_config("verify", {})
    assert config.engine == "both"
    assert config.hbar == 1.0
    assert config.tol is None
    assert config.seeds == 1000
    assert config.format == "json"
    assert config.constants == Constants(hbar=1.0)


def test_si_units() -> None:
    """Test that --si selects the SI value of ħ."""
    assert build_config("verify", {"si": True}).constants.hbar == HBAR_SI


def test_si_and_hbar_conflict() -> None:
    """Test that --si and --hbar cannot be combined."""
    with pytest.raises(ConfigError, match="mutually exclusive"):
        build_config("verify", {"si": True, "hbar": 2.0})


def test_si_rejects_explicit_default_hbar() -> None:
    """Test that --hbar given at its default value still conflicts with --si."""
    with pytest.raises(ConfigError, match="mutually exclusive"):
        build_config("verify", {"si": True, "hbar": 1.0})


def test_constants_carry_the_given_hbar() -> None:
    """Test that the run constants follow --hbar."""
    assert build_config("sweep", {"family": "two_mode_squeezed", "hbar": 2.5}).constants.hbar == 2.5


def test_none_flags_are_ignored() -> None:
    """Test that flags left at None do not override anything."""
    config = build_config("verify", {"engine": None, "seeds": 5})
    assert config.engine == "both"
    assert config.seeds == 5


class TestCommandRequirements:
    """Tests for per-command required settings."""

    def test_minimize_needs_family_and_objective(self):
        """Verify minimize without an objective is refused."""
        with pytest.raises(ConfigError, match="--objective"):
            build_config("minimize", {"family": "two_mode_squeezed"})

    def test_sweep_needs_family(self):
        """Verify sweep without a family is refused."""
        with pytest.raises(ConfigError, match="--family"):
            build_config("sweep", {})

    def test_report_needs_input(self):
        """Verify report without an input is refused."""
        with pytest.raises(ConfigError, match="input"):
            build_config("report", {})

    def test_minimize(self):
        """Verify enum coercion of family and objective."""
        config = build_config("minimize", {"family": "correlated_triple", "objective": "sum_product_three"})
        assert config.family is StateFamily.CORRELATED_TRIPLE
        assert config.objective is Objective.SUM_PRODUCT_THREE
        assert config.budget == 200

    def test_budget_floor(self):
        """Verify budgets below 10 are refused."""
        with pytest.raises(ConfigError):
            build_config(
                "minimize", {"family": "two_mode_squeezed", "objective": "collective_product", "budget": 5}
            )

    def test_negative_tolerance(self):
        """Verify tolerances must be positive."""
        with pytest.raises(ConfigError):
            build_config("verify", {"tol": -1.0})


class TestConfigFile:
    """Tests for JSON config files."""

    def test_flags_override_file(self, tmp_path):
        """Verify command-line values win over file values."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"engine": "grid", "seeds": 50, "tol": 1e-7}))
        config = build_config("verify", {"seeds": 7}, path)
        assert config.engine == "grid"
        assert config.seeds == 7
        assert config.tol == 1e-7

    def test_unknown_key(self, tmp_path):
        """Verify unknown settings are errors."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"engines": "grid"}))
        with pytest.raises(ConfigError, match="engines"):
            build_config("verify", {}, path)

    def test_command_mismatch(self, tmp_path):
        """Verify a file written for another command is refused."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"command": "sweep", "family": "two_mode_squeezed"}))
        with pytest.raises(ConfigError, match="not 'verify'"):
            build_config("verify", {}, path)

    def test_grid_string_in_file(self, tmp_path):
        """Verify r_grid strings in files are parsed like the flag."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"family": "two_mode_squeezed", "r_grid": "0:1:0.5"}))
        assert build_config("sweep", {}, path).r_grid == [0.0, 0.5, 1.0]

    def test_missing_file(self, tmp_path):
        """Verify a missing config file is a ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            load_config_file(tmp_path / "absent.json")

    @pytest.mark.parametrize("content", ["{broken", "[1, 2]"])
    def test_bad_content(self, tmp_path, content):
        """Verify invalid JSON and non-object files are refused."""
        path = tmp_path / "run.json"
        path.write_text(content)
        with pytest.raises(ConfigError):
            load_config_file(path)


class TestParseGrid:
    """Tests for grid specifications."""

    def test_inclusive_range(self):
        """Verify start:stop:step includes the end point."""
        assert parse_grid("0:2:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]

    def test_range_values_are_rounded(self):
        """Verify accumulated steps do not leak rounding noise."""
        assert parse_grid("0:1:0.1")[3] == 0.3

    def test_list(self):
        """Verify comma lists."""
        assert parse_grid("0.1, 0.2,0.7") == [0.1, 0.2, 0.7]

    def test_vector_points(self):
        """Verify semicolon-separated vector points."""
        assert parse_grid("1,0.5;1.5,-0.2") == [[1.0, 0.5], [1.5, -0.2]]

    @pytest.mark.parametrize("text", ["0:1:0", "1:0:0.1", "a,b", "0:1"])
    def test_malformed(self, text):
        """Verify malformed grids are ConfigErrors."""
        with pytest.raises(ConfigError):
            parse_grid(text)


def test_run_config_is_frozen() -> None:
    """Test that validated settings cannot be reassigned."""
    config = RunConfig(command="report", input=Path("x.jsonl"))
    with pytest.raises(ValueError, match="frozen"):
        config.seeds = 3  # type: ignore[misc]
