"""
Reading and writing the plain-text tables every command exchanges.

All CSV files start with a single comment line naming the table kind and the schema version, followed by a pandas
header row. Floats use a fixed format and there are no timestamps, so equal inputs give byte-identical files.
"""
import io
import json
from pathlib import Path

import numpy as np
import pandas

from . import __version__
from .errors import DataFormatError, UsageError

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.12g"


def header_line(kind):
    return "# hemifss {} schema={} version={}\n".format(kind, SCHEMA_VERSION, __version__)


def csv_bytes(df: pandas.DataFrame, kind: str) -> bytes:
    buffer = io.StringIO()
    df.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return (header_line(kind) + buffer.getvalue()).encode("utf-8")


def write_csv(df: pandas.DataFrame, path, kind: str) -> Path:
    path = Path(path)
    path.write_bytes(csv_bytes(df, kind))
    return path


def read_csv(path, required) -> pandas.DataFrame:
    """
    Load a CSV table, skipping comment lines, and check that every required column is present and numeric.
    """
    path = Path(path)
    if not path.is_file():
        raise UsageError("input file not found: {}".format(path))
    try:
        df = pandas.read_csv(path, comment="#", skipinitialspace=True)
    except (pandas.errors.ParserError, pandas.errors.EmptyDataError, UnicodeDecodeError) as err:
        raise DataFormatError("cannot parse {}: {}".format(path, err)) from err

    missing = [column for column in required if column not in df.columns]
    if missing:
        raise DataFormatError("{} lacks column(s) {}".format(path, ", ".join(missing)))
    for column in required:
        if not pandas.api.types.is_numeric_dtype(df[column]):
            raise DataFormatError("column {} of {} is not numeric".format(column, path))
    if len(df) == 0:
        raise DataFormatError("{} holds no rows".format(path))
    return df


def json_bytes(document) -> bytes:
    return (json.dumps(document, sort_keys=True, indent=1, default=_jsonable) + "\n").encode("utf-8")


def write_json(document, path) -> Path:
    path = Path(path)
    path.write_bytes(json_bytes(document))
    return path


def rounded(points, decimals=6):
    """Coordinates as nested lists rounded for serialization; -0.0 is normalized to 0.0."""
    return (np.round(np.asarray(points, dtype=float), decimals) + 0.0).tolist()


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError("cannot serialize {!r}".format(value))
