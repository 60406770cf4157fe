"""CSV matrix files, JSON records and run manifests."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from annrr.exceptions import ContractError

FLOAT_FORMAT = "%.17g"


class MatrixParseError(ContractError):
    """A matrix file could not be parsed; carries the 1-based line and column."""

    def __init__(self, path, line: int, column: int | None, message: str):
        where = f"{path}:{line}" + (f":{column}" if column is not None else "")
        super().__init__(f"{where}: {message}")
        self.path, self.line, self.column = str(path), line, column


def read_matrix(path, header: bool = False) -> np.ndarray:
    """Read a comma-separated numeric matrix, one row per line.

    Blank lines are skipped. With ``header`` the first non-blank line is
    discarded. Every row must have the same number of finite fields.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MatrixParseError(path, 0, None, f"cannot read file ({exc.strerror})") from None
    rows: list[list[float]] = []
    width = None
    skipped_header = not header
    for lineno, fields in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        if not skipped_header:
            skipped_header = True
            continue
        values = []
        for col, raw in enumerate(fields, start=1):
            try:
                v = float(raw)
            except ValueError:
                raise MatrixParseError(path, lineno, col, f"not a number: {raw.strip()!r}") from None
            if not math.isfinite(v):
                raise MatrixParseError(path, lineno, col, f"non-finite value {raw.strip()!r}")
            values.append(v)
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise MatrixParseError(path, lineno, None, f"expected {width} fields, found {len(values)}")
        rows.append(values)
    if not rows:
        raise MatrixParseError(path, 1, None, "no data rows")
    return np.array(rows, dtype=np.float64)


def format_matrix(m, header: list[str] | None = None) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    lines = [",".join(header)] if header else []
    lines.extend(",".join(FLOAT_FORMAT % v for v in row) for row in m)
    return "\n".join(lines) + "\n"


def write_matrix(path, m, header: list[str] | None = None) -> Path:
    path = Path(path)
    path.write_text(format_matrix(m, header))
    return path


def to_jsonable(obj):
    """Convert numpy scalars and arrays to plain Python; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps_record(record) -> str:
    return json.dumps(to_jsonable(record), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_record(path, record) -> Path:
    path = Path(path)
    path.write_text(dumps_record(record))
    return path


def read_record(path):
    return json.loads(Path(path).read_text())


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    """Everything needed to replay a command: resolved options, seed, versions and input digests."""

    command: str
    config: dict
    seed: int | None
    version: str
    inputs: dict = field(default_factory=dict)
    wall_time_seconds: float = 0.0
    numpy_version: str = np.__version__
    python_version: str = platform.python_version()
    outputs: list = field(default_factory=list)

    def to_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "RunManifest":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(rec) - known
        if unknown or not {"command", "config", "seed", "version"} <= set(rec):
            raise ContractError(f"not a run manifest (unexpected keys {sorted(unknown)})")
        return cls(**rec)

    def verify_inputs(self) -> None:
        for path, digest in self.inputs.items():
            if not Path(path).exists():
                raise ContractError(f"manifest input {path} is missing")
            if file_digest(path) != digest:
                raise ContractError(f"manifest input {path} changed since the run (sha256 mismatch)")
