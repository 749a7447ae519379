import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import IO, List, Optional, Sequence, Union

import pandas as pd

from .exceptions import FormatError

logger = logging.getLogger(__name__)

TableSource = Union[str, os.PathLike, IO]

# Column holding the 1-based source line of every parsed row.
LINE_COLUMN = "_line"


def clean_column_names(df: pd.DataFrame) -> pd.DataFrame:
    """Clean column names by trimming whitespace."""
    df.columns = [str(col).strip() for col in df.columns]
    return df


def source_name(source: TableSource, name: Optional[str] = None) -> str:
    """Best-effort display name for a path or an uploaded buffer."""
    if name:
        return name
    if isinstance(source, (str, os.PathLike)):
        return str(source)
    return getattr(source, "name", "<buffer>")


def detect_table_format(name: str) -> str:
    """Map a file name onto 'csv' or 'jsonl' by its suffix (csv when unknown)."""
    suffix = Path(name).suffix.lower()
    if suffix in (".jsonl", ".ndjson", ".json"):
        return "jsonl"
    return "csv"


def _read_text(source: TableSource) -> str:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as handle:
            return handle.read()
    raw = source.read()
    if isinstance(raw, bytes):
        return raw.decode("utf-8")
    return raw


def _read_csv(source: TableSource, name: str) -> pd.DataFrame:
    try:
        df = pd.read_csv(source, dtype=str, keep_default_na=False, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise FormatError(f"cannot parse CSV ({e})", source=name)

    df = clean_column_names(df)
    # Header is line 1, so data row i sits on line i + 2
    df[LINE_COLUMN] = range(2, len(df) + 2)
    value_columns = [col for col in df.columns if col != LINE_COLUMN]
    blank = (df[value_columns].fillna("").apply(lambda col: col.str.strip()) == "").all(axis=1)
    return df[~blank].reset_index(drop=True)


def _read_jsonl(source: TableSource, name: str) -> pd.DataFrame:
    records = []
    for line_no, line in enumerate(_read_text(source).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON ({e.msg})", source=name, line=line_no)
        if not isinstance(record, dict):
            raise FormatError("each line must be a JSON object", source=name, line=line_no)
        record[LINE_COLUMN] = line_no
        records.append(record)
    return pd.DataFrame.from_records(records)


def read_table(source: TableSource,
               required_columns: Sequence[str],
               name: Optional[str] = None) -> pd.DataFrame:
    """
    Load a CSV or JSONL table and check its columns.

    Args:
        source: File path or readable buffer (e.g. a Streamlit upload)
        required_columns: Columns every row must carry
        name: Display name, also used for format detection when source is a buffer

    Returns:
        DataFrame with the required columns plus LINE_COLUMN; empty when the file is empty
    """
    display = source_name(source, name)
    fmt = detect_table_format(display)

    if fmt == "jsonl":
        df = _read_jsonl(source, display)
    else:
        df = _read_csv(source, display)

    if df.empty:
        logger.info("%s is empty", display)
        return pd.DataFrame(columns=list(required_columns) + [LINE_COLUMN])

    missing = [col for col in required_columns if col not in df.columns]
    if missing:
        raise FormatError(f"missing required column(s): {', '.join(missing)}", source=display)

    if fmt == "jsonl":
        absent = df[list(required_columns)].isna().any(axis=1)
        if absent.any():
            row = df[absent].iloc[0]
            raise FormatError("row is missing a required key", source=display, line=int(row[LINE_COLUMN]))

    logger.info("Loaded %d rows from %s", len(df), display)
    return df


def parse_float_list(text: str, name: str) -> List[float]:
    """Parse a comma separated list of floats ('0.1,0.2')."""
    try:
        values = [float(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"{name}: expected comma separated numbers, got {text!r}")
    if not values:
        raise ValueError(f"{name}: expected at least one value")
    return values


def parse_int_list(text: str, name: str) -> List[int]:
    """Parse a comma separated list of integers ('1000,10000')."""
    try:
        values = [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"{name}: expected comma separated integers, got {text!r}")
    if not values:
        raise ValueError(f"{name}: expected at least one value")
    return values


def atomic_write_text(path: Union[str, os.PathLike], text: str) -> None:
    """Write text to path via a temp file in the same directory and an atomic rename."""
    target = Path(path)
    directory = target.parent if str(target.parent) else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=f".{target.name}.", dir=directory)
    try:
        with io.open(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_path, target)
    except Exception:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
