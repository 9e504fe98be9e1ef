"""
Plain-text data files

Every result file is a block of "# key = value" header lines followed by
whitespace-separated numeric rows, readable by gnuplot, numpy and pandas.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from utils.errors import DataFileError
from utils.helpers import safe_file_write

logger = logging.getLogger(__name__)

INTEGER_LIMIT = 1.0e15


def _header_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ",".join(_header_value(v) for v in value)
    return str(value).replace("\n", " ")


def format_number(value: float) -> str:
    """Shortest text that reads back to the same double; whole numbers without a point."""
    value = float(value)
    if value.is_integer() and abs(value) < INTEGER_LIMIT:
        return str(int(value))
    return repr(value)


def format_table(header: Mapping[str, Any], columns: Sequence[Sequence[float]]) -> str:
    """Render header and columns exactly as write_table stores them."""
    arrays = [np.asarray(c, dtype=float) for c in columns]
    if not arrays:
        raise DataFileError("<table>", "no columns to write")
    lengths = {a.size for a in arrays}
    if len(lengths) != 1:
        raise DataFileError("<table>", f"columns have different lengths {sorted(lengths)}")

    lines = [f"# {key} = {_header_value(value)}" for key, value in header.items()]
    for row in np.column_stack(arrays):
        lines.append(" ".join(format_number(v) for v in row))
    return "\n".join(lines) + "\n"


def write_table(path: Union[str, Path], header: Mapping[str, Any], columns: Sequence[Sequence[float]]) -> Path:
    """Write a header block and numeric columns to `path`."""
    path = Path(path)
    written = safe_file_write(path, format_table(header, columns))
    logger.info(f"Wrote {len(columns)} columns to {written}")
    return written


def read_table(path: Union[str, Path]) -> Tuple[Dict[str, str], pd.DataFrame]:
    """Parse a file produced by write_table into (header, DataFrame)."""
    path = Path(path)
    header: Dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                key, sep, value = line[1:].strip().partition(" = ")
                if sep:
                    header[key] = value
        frame = pd.read_csv(path, comment="#", sep=r"\s+", header=None, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataFileError(path, str(e)) from e
    return header, frame


def write_manifest(path: Union[str, Path], manifest: Mapping[str, Any]) -> Path:
    """Run manifest as indented JSON."""
    return safe_file_write(path, json.dumps(manifest, indent=2, ensure_ascii=False, default=str) + "\n")
