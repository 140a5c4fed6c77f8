"""Reading measurement CSVs and writing result tables."""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Malformed or unusable input data."""


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    ages: np.ndarray | None
    source: str = ""

    @property
    def n(self):
        return int(self.y.size)

    def require_ages(self, what="this command"):
        if self.ages is None:
            raise DataError(f"{what} needs an 'age' column in {self.source or 'the data'}")
        return self.ages


def _parse(text, line, column):
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"line {line}: cannot parse {column} value {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"line {line}: {column} value {text!r} is not finite")
    return v


def read_csv(path, log_input=False):
    """Read a ``y[,age]`` CSV.

    Parameters
    ----------
    path : str or Path
    log_input : bool
        Take the natural log of ``y`` (raw optical densities); non-positive
        values are rejected.

    Raises
    ------
    DataError
        With the 1-based line number of the first bad row, or for empty
        files and bad headers.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_csv(text, str(path), log_input)


def parse_csv(text, source="<string>", log_input=False):
    rows = csv.reader(io.StringIO(text))
    header = next(rows, None)
    if header is None or not any(h.strip() for h in header):
        raise DataError(f"{source} is empty")
    cols = [h.strip().lower() for h in header]
    if "y" not in cols:
        raise DataError(f"{source}: header must contain a 'y' column, got {header}")
    unknown = set(cols) - {"y", "age"}
    if unknown or len(set(cols)) != len(cols):
        raise DataError(f"{source}: expected header 'y' or 'y,age', got {','.join(header)}")
    iy = cols.index("y")
    ia = cols.index("age") if "age" in cols else None

    ys, ages = [], []
    for line, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(cols):
            raise DataError(f"line {line}: expected {len(cols)} fields, got {len(row)}")
        y = _parse(row[iy].strip(), line, "y")
        if log_input:
            if y <= 0:
                raise DataError(f"line {line}: --log-input needs positive values, got {y!r}")
            y = math.log(y)
        ys.append(y)
        if ia is not None:
            a = _parse(row[ia].strip(), line, "age")
            if a <= 0:
                raise DataError(f"line {line}: ages must be positive, got {a!r}")
            ages.append(a)
    if not ys:
        raise DataError(f"{source} has no data rows")
    return Dataset(np.array(ys), np.array(ages) if ia is not None else None, source)


def write_data_csv(path, y, ages=None):
    """Write measurements (and ages) in the format ``read_csv`` accepts."""
    cols = ["y"] if ages is None else ["y", "age"]
    rows = [{"y": repr(float(v))} for v in y]
    if ages is not None:
        for r, a in zip(rows, ages):
            r["age"] = repr(float(a))
    write_table(path, rows, cols)


def write_table(path, rows, columns):
    """Write dict rows as CSV to ``path`` (``None`` or ``-`` for stdout)."""
    def emit(handle):
        w = csv.DictWriter(handle, fieldnames=list(columns), lineterminator="\n",
                           extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: _cell(v) for k, v in r.items()})

    if path in (None, "-"):
        emit(sys.stdout)
    else:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            emit(fh)


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def write_json(path, obj):
    text = json.dumps(_jsonable(obj), indent=2, allow_nan=True)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def load_json_arg(value, what="value"):
    """Parse inline JSON (starting with ``{`` or ``[``) or read it from a file."""
    if value is None:
        return None
    text = value.strip()
    if not text.startswith(("{", "[")):
        try:
            text = Path(value).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {what} file {value}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
