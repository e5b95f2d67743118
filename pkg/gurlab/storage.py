"""Lossless on-disk formats for states, report streams and searcher output.

* GaussianState: JSON with every float written as ``float.hex()``.
* GridState: ``GURG`` binary container, little-endian header then ``<c16``
  amplitudes in row-major order.
* Reports and check results: JSON lines, one record per line.
* SearchResult and sweep tables: indented JSON.

JSON floats are written with ``repr`` (shortest round-trip), so every emitted
number parses back to the same double. Non-finite floats, such as the +inf of a
rejected search point, are written as the strings "Infinity", "-Infinity" and
"NaN" so every file is strict JSON.
"""

import json
import logging
import math
import struct
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import Field, TypeAdapter, ValidationError

from gurlab.core import CheckResult, GurError, InequalityReport
from gurlab.gaussian import GaussianState
from gurlab.grid import GridSpec, GridState, Symmetry
from gurlab.searcher import SearchResult, SweepTable

logger = logging.getLogger(__name__)

GRID_MAGIC = b"GURG"
GRID_VERSION = 1
GRID_HEADER = struct.Struct("<4sHBBIdd")
SYMMETRY_CODES = {Symmetry.NONE: 0, Symmetry.BOSONIC: 1, Symmetry.FERMIONIC: 2}
NON_FINITE = {"Infinity": math.inf, "-Infinity": -math.inf, "NaN": math.nan}

Record = InequalityReport | CheckResult
OutputKind = Literal["reports", "sweep", "search"]

_record_adapter: TypeAdapter[Record] = TypeAdapter(Annotated[Record, Field(discriminator="kind")])


class StorageError(GurError):
    """Raised for missing, truncated or corrupt files."""


def encode_non_finite(value: Any) -> Any:
    """Replace inf and nan floats, at any depth, with their JSON string tokens."""
    if isinstance(value, float) and not math.isfinite(value):
        if math.isnan(value):
            return "NaN"
        return "Infinity" if value > 0 else "-Infinity"
    if isinstance(value, dict):
        return {key: encode_non_finite(v) for key, v in value.items()}
    if isinstance(value, list | tuple):
        return [encode_non_finite(v) for v in value]
    return value


def decode_non_finite(value: Any) -> Any:
    if isinstance(value, str):
        return NON_FINITE.get(value, value)
    if isinstance(value, dict):
        return {key: decode_non_finite(v) for key, v in value.items()}
    if isinstance(value, list):
        return [decode_non_finite(v) for v in value]
    return value


def _write_json(path: Path, data: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        json.dump(encode_non_finite(data), f, indent=2, allow_nan=False)
        f.write("\n")


def _read_json(path: Path) -> Any:
    try:
        with path.open("r", encoding="utf-8") as f:
            return decode_non_finite(json.load(f))
    except FileNotFoundError as e:
        raise StorageError(f"no such file: {path}") from e
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise StorageError(f"{path} is not valid JSON: {e}") from e


def gaussian_to_dict(state: GaussianState) -> dict[str, Any]:
    return {
        "n": state.n,
        "hbar": float(state.hbar).hex(),
        "mean": [float(v).hex() for v in state.mean],
        "sigma": [[float(v).hex() for v in row] for row in state.sigma],
    }


def gaussian_from_dict(data: dict[str, Any]) -> GaussianState:
    """Inverse of :func:`gaussian_to_dict`; validity is re-checked on construction."""
    try:
        return GaussianState(
            n=int(data["n"]),
            mean=np.array([float.fromhex(v) for v in data["mean"]]),
            sigma=np.array([[float.fromhex(v) for v in row] for row in data["sigma"]]),
            hbar=float.fromhex(data["hbar"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise StorageError(f"malformed Gaussian state record: {e}") from e


def save_gaussian_state(state: GaussianState, path: Path) -> None:
    _write_json(path, gaussian_to_dict(state))
    logger.debug(f"Wrote {state.n}-mode Gaussian state to {path}")


def load_gaussian_state(path: Path) -> GaussianState:
    data = _read_json(path)
    if not isinstance(data, dict):
        raise StorageError(f"{path} does not hold a Gaussian state object")
    return gaussian_from_dict(data)


def save_grid_state(state: GridState, path: Path) -> None:
    """Write a GURG container."""
    spec = state.spec
    header = GRID_HEADER.pack(
        GRID_MAGIC,
        GRID_VERSION,
        spec.n_particles,
        SYMMETRY_CODES[state.symmetry],
        spec.points_per_axis,
        spec.x_min,
        spec.x_max,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(state.amps, dtype="<c16").tobytes(order="C"))
    logger.debug(f"Wrote {spec.shape} grid state to {path}")


def load_grid_state(path: Path) -> GridState:
    """Read a GURG container.

    Raises:
        StorageError: On a missing file, wrong magic/version, unknown symmetry code
            or a payload whose size does not match the header.
    """
    try:
        raw = path.read_bytes()
    except FileNotFoundError as e:
        raise StorageError(f"no such file: {path}") from e
    if len(raw) < GRID_HEADER.size:
        raise StorageError(f"{path} is truncated ({len(raw)} bytes, header needs {GRID_HEADER.size})")

    magic, version, n_particles, symmetry_code, points, x_min, x_max = GRID_HEADER.unpack_from(raw)
    if magic != GRID_MAGIC:
        raise StorageError(f"{path} is not a grid container (magic {magic!r})")
    if version != GRID_VERSION:
        raise StorageError(f"{path} has unsupported container version {version}")
    codes = {code: symmetry for symmetry, code in SYMMETRY_CODES.items()}
    if symmetry_code not in codes:
        raise StorageError(f"{path} has unknown symmetry code {symmetry_code}")

    try:
        spec = GridSpec(n_particles=n_particles, points_per_axis=points, x_min=x_min, x_max=x_max)
    except ValidationError as e:
        raise StorageError(f"{path} has an invalid grid header: {e}") from e
    payload = raw[GRID_HEADER.size :]
    expected = int(np.prod(spec.shape)) * 16
    if len(payload) != expected:
        raise StorageError(f"{path} payload is {len(payload)} bytes, header implies {expected}")
    amps = np.frombuffer(payload, dtype="<c16").reshape(spec.shape)
    return GridState(spec=spec, amps=amps.astype(np.complex128), symmetry=codes[symmetry_code])


def write_records_jsonl(records: list[Record], path: Path) -> None:
    """One JSON object per line, in the given order."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(encode_non_finite(record.model_dump()), allow_nan=False))
            f.write("\n")
    logger.info(f"Wrote {len(records)} records to {path}")


def read_records_jsonl(path: Path) -> list[Record]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError as e:
        raise StorageError(f"no such file: {path}") from e
    records: list[Record] = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(_record_adapter.validate_python(decode_non_finite(json.loads(line))))
        except (json.JSONDecodeError, ValidationError, GurError) as e:
            raise StorageError(f"{path}:{number}: corrupt record: {e}") from e
    return records


def save_search_result(result: SearchResult, path: Path) -> None:
    _write_json(path, result.model_dump())
    logger.info(f"Wrote search result ({result.evaluations} evaluations) to {path}")


def load_search_result(path: Path) -> SearchResult:
    try:
        return SearchResult.model_validate(_read_json(path))
    except ValidationError as e:
        raise StorageError(f"{path} is not a search result: {e}") from e


def save_sweep(table: SweepTable, path: Path) -> None:
    _write_json(path, table.model_dump())
    logger.info(f"Wrote {len(table.rows)} sweep rows to {path}")


def load_sweep(path: Path) -> SweepTable:
    try:
        return SweepTable.model_validate(_read_json(path))
    except ValidationError as e:
        raise StorageError(f"{path} is not a sweep table: {e}") from e


def detect_kind(path: Path) -> OutputKind:
    """Guess which command produced an output file from its content."""
    if not path.exists():
        raise StorageError(f"no such file: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            head = f.readline()
    except UnicodeDecodeError as e:
        raise StorageError(f"{path} is not a text output file") from e
    stripped = head.strip()
    if not stripped:
        raise StorageError(f"{path} is empty")
    if stripped.startswith("kind,"):
        return "reports"
    if stripped.startswith("family,"):
        return "sweep"
    if stripped.startswith("index,"):
        raise StorageError(f"{path} is a search trace; report reads the search JSON instead")
    if stripped == "{":
        data = _read_json(path)
        kind = data.get("kind") if isinstance(data, dict) else None
        if kind in ("sweep", "search"):
            return kind
        raise StorageError(f"{path} holds JSON of unknown kind {kind!r}")
    if stripped.startswith("{"):
        return "reports"
    raise StorageError(f"{path} is not a gurlab output file")
