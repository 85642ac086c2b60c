"""Reading series files and writing reports: the only module of potdiag touching the filesystem.

Series files are CSV with a header row ``value`` or ``date,value`` (ISO dates), optionally
preceded by ``#`` comment lines. Every output embeds the resolved run configuration: CSV
files in a leading ``# config: {json}`` line, JSON files under ``metadata.config``.
"""
import io
import json
import math
import os
import re
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from potdiag import error
from potdiag.core import TimeSeries
from potdiag.utils import seeding
from potdiag.version import VERSION

CONFIG_PREFIX = "# config: "
INFINITE = "infinite"
MISSING = "NA"

PathLike = Union[str, os.PathLike]


def _comment_lines(path: Path) -> int:
    count = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            count += 1
    return count


def read_series(path: PathLike) -> TimeSeries:
    """Reads a series file.

    Raises:
        DataError: the file cannot be read
        ParseError: malformed header or row, citing the physical line number
    """
    path = Path(path)
    try:
        skipped = _comment_lines(path)
        frame = pd.read_csv(
            path,
            skiprows=skipped,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except OSError as e:
        raise error.DataError(f"Cannot read {path}: {e}")
    except pd.errors.EmptyDataError:
        raise error.ParseError("missing header row `value` or `date,value`", line=skipped + 1)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line = int(match.group(1)) + skipped if match else None
        raise error.ParseError(f"malformed row: {e}", line=line)

    header_line = skipped + 1
    columns = [column.strip() for column in frame.columns]
    if columns not in (["value"], ["date", "value"]):
        raise error.ParseError(
            f"expected header `value` or `date,value`, got `{','.join(columns)}`",
            line=header_line,
        )
    frame.columns = columns

    def line_of(row: int) -> int:
        return header_line + 1 + row

    raw_values = frame["value"].str.strip()
    values = pd.to_numeric(raw_values, errors="coerce")
    bad = np.flatnonzero(~np.isfinite(values.to_numpy(dtype=np.float64)))
    if len(bad):
        row = int(bad[0])
        problem = "cannot parse" if pd.isna(values.iloc[row]) else "non-finite"
        raise error.ParseError(f"{problem} value `{raw_values.iloc[row]}`", line=line_of(row))

    timestamps = None
    if "date" in columns:
        raw_dates = frame["date"].str.strip()
        dates = pd.to_datetime(raw_dates, format="%Y-%m-%d", errors="coerce")
        bad = np.flatnonzero(dates.isna().to_numpy())
        if len(bad):
            row = int(bad[0])
            raise error.ParseError(
                f"cannot parse date `{raw_dates.iloc[row]}`", line=line_of(row)
            )
        timestamps = dates.to_numpy().astype("datetime64[D]")
        decreasing = np.flatnonzero(np.diff(timestamps.astype(np.int64)) <= 0)
        if len(decreasing):
            row = int(decreasing[0]) + 1
            raise error.ParseError("dates must be strictly increasing", line=line_of(row))

    return TimeSeries(
        values.to_numpy(dtype=np.float64),
        timestamps=timestamps,
        meta={"source": str(path)},
    )


def read_config(path: PathLike) -> Dict[str, Any]:
    """Run configuration embedded in a file written by :func:`write_csv` or :func:`write_json`."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise error.DataError(f"Cannot read {path}: {e}")
    if text.startswith(CONFIG_PREFIX):
        return json.loads(text.splitlines()[0][len(CONFIG_PREFIX) :])["config"]
    try:
        return json.loads(text)["metadata"]["config"]
    except (ValueError, KeyError, TypeError):
        raise error.ParseError(f"{path} carries no embedded configuration", line=1)


# Serialization


def to_jsonable(obj: Any) -> Any:
    """Converts numpy scalars and arrays to plain types, ``NaN`` to ``None`` and infinities to
    ``"infinite"``/``"-infinite"``."""
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(value) for value in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return INFINITE if value > 0 else f"-{INFINITE}"
        return value
    if isinstance(obj, np.datetime64):
        return str(obj)
    return obj


def metadata(config: Dict[str, Any]) -> Dict[str, Any]:
    return {
        "config": to_jsonable(config),
        "version": VERSION,
        "generator": seeding.ALGORITHM,
    }


def atomic_write(path: PathLike, text: str):
    """Writes ``text`` to a temporary file beside ``path`` and renames it into place."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, temporary = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise


def _csv_cell(value: Any, float_format: str) -> Any:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return INFINITE if value > 0 else f"-{INFINITE}"
        return float_format % value
    return value


def format_csv(
    rows: Sequence[Dict[str, Any]],
    columns: Sequence[str],
    config: Optional[Dict[str, Any]] = None,
    float_format: str = "%.10g",
) -> str:
    """CSV text with ``NA`` for missing values, preceded by the configuration line if given."""
    frame = pd.DataFrame(
        [[_csv_cell(row.get(column), float_format) for column in columns] for row in rows],
        columns=list(columns),
        dtype=object,
    )
    buffer = io.StringIO()
    if config is not None:
        buffer.write(
            CONFIG_PREFIX + json.dumps(metadata(config), sort_keys=True, allow_nan=False) + "\n"
        )
    frame.to_csv(buffer, index=False, na_rep=MISSING, lineterminator="\n")
    return buffer.getvalue()


def write_csv(
    path: PathLike,
    rows: Sequence[Dict[str, Any]],
    columns: Sequence[str],
    config: Optional[Dict[str, Any]] = None,
    float_format: str = "%.10g",
):
    atomic_write(path, format_csv(rows, columns, config, float_format))


def format_json(payload: Dict[str, Any], config: Dict[str, Any]) -> str:
    document = {"metadata": metadata(config), **to_jsonable(payload)}
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: PathLike, payload: Dict[str, Any], config: Dict[str, Any]):
    atomic_write(path, format_json(payload, config))


def series_rows(series: TimeSeries) -> List[Dict[str, Any]]:
    if series.timestamps is None:
        return [{"value": value} for value in series.values]
    return [
        {"date": str(date), "value": value}
        for date, value in zip(series.timestamps, series.values)
    ]
