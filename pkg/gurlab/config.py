"""Run configuration shared by every CLI subcommand.

A JSON config file uses the flag names with dashes replaced by underscores.
Values given on the command line override values from the file; unknown keys
are errors.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from gurlab.battery import DEFAULT_SEEDS, EngineChoice
from gurlab.core import DEFAULT_HBAR, Constants, GurError
from gurlab.searcher import DEFAULT_BUDGET, DEFAULT_SQUEEZE_MAX, MIN_BUDGET, Objective, StateFamily

logger = logging.getLogger(__name__)

Command = Literal["verify", "sweep", "minimize", "report"]
OutputFormat = Literal["json", "csv"]
GridPoint = float | list[float]


class ConfigError(GurError):
    """Raised for unreadable config files and invalid or unknown settings."""


class RunConfig(BaseModel):
    """Validated settings of one CLI invocation."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Command
    engine: EngineChoice = "both"
    hbar: float = Field(default=DEFAULT_HBAR, gt=0, allow_inf_nan=False)
    si: bool = False
    tol: float | None = Field(default=None, gt=0, allow_inf_nan=False)
    seed: int = Field(default=0, ge=0)
    seeds: int = Field(default=DEFAULT_SEEDS, ge=0, description="Random states per particle count in verify")
    out: Path | None = None
    format: OutputFormat = "json"
    family: StateFamily | None = None
    r_grid: list[GridPoint] | None = None
    objective: Objective | None = None
    n: int | None = Field(default=None, ge=2, le=3)
    squeeze_max: float = Field(default=DEFAULT_SQUEEZE_MAX, ge=0, allow_inf_nan=False)
    budget: int = Field(default=DEFAULT_BUDGET, ge=MIN_BUDGET)
    input: Path | None = None
    verbose: bool = False

    @model_validator(mode="after")
    def _command_requirements(self) -> Self:
        if self.command == "minimize" and (self.family is None or self.objective is None):
            raise ValueError("minimize needs --family and --objective")
        if self.command == "sweep" and self.family is None:
            raise ValueError("sweep needs --family")
        if self.command == "report" and self.input is None:
            raise ValueError("report needs an input file")
        if self.si and "hbar" in self.model_fields_set:
            raise ValueError("--si and --hbar are mutually exclusive")
        return self

    @property
    def constants(self) -> Constants:
        """Physical constants of the run: SI units with --si, else the given ħ."""
        return Constants.si() if self.si else Constants(hbar=self.hbar)


def load_config_file(path: Path) -> dict[str, Any]:
    """Read a JSON config file into a flag-name -> value mapping."""
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    logger.debug(f"Loaded {len(data)} settings from {path}")
    return data


def build_config(command: str, flags: dict[str, Any], config_path: Path | None = None) -> RunConfig:
    """Merge config-file values with explicitly given flags (flags win) and validate.

    Args:
        command: Subcommand name.
        flags: Flag values; None means "not given on the command line".
        config_path: Optional JSON config file.

    Raises:
        ConfigError: On an unreadable file, unknown keys or invalid values.
    """
    merged: dict[str, Any] = load_config_file(config_path) if config_path is not None else {}
    if "command" in merged and merged["command"] != command:
        raise ConfigError(f"config file is for '{merged['command']}', not '{command}'")
    merged.update({key: value for key, value in flags.items() if value is not None})
    merged["command"] = command
    if isinstance(merged.get("r_grid"), str):
        merged["r_grid"] = parse_grid(merged["r_grid"])
    try:
        return RunConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def parse_grid(text: str) -> list[GridPoint]:
    """Parse ``start:stop:step`` (inclusive), ``a,b,c`` or ``a1,b1;a2,b2`` (vector points).

    Raises:
        ConfigError: If the text is malformed or the range is empty.
    """
    try:
        if ";" in text:
            return [[float(v) for v in point.split(",")] for point in text.split(";") if point.strip()]
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"empty range {text!r}")
            count = math.floor((stop - start) / step + 1e-9)
            points: list[GridPoint] = [round(start + k * step, 12) for k in range(count + 1)]
            return points
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"cannot parse grid {text!r}: {e}") from e
