"""CSV ingestion and output."""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from .model import Dataset


class DataError(ValueError):
    """Malformed or inconsistent input data; message carries line and column."""


def read_table(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file, expected a header row")
    header = [h.strip() for h in rows[0]]
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"{path}: line {lineno}: expected {len(header)} fields, found {len(row)}")
        body.append((lineno, row))
    return header, body


def numeric_column(path: str, header, body, name: str) -> np.ndarray:
    try:
        j = header.index(name)
    except ValueError:
        raise DataError(f"{path}: no column named {name!r} (columns: {', '.join(header)})") from None
    out = np.empty(len(body))
    for k, (lineno, row) in enumerate(body):
        cell = row[j].strip()
        try:
            value = float(cell)
        except ValueError:
            raise DataError(
                f"{path}: line {lineno}, column {j + 1} ({name}): non-numeric value {cell!r}"
            ) from None
        if not math.isfinite(value):
            raise DataError(f"{path}: line {lineno}, column {j + 1} ({name}): non-finite value {cell!r}")
        out[k] = value
    return out


def load_dataset(path: str, response: str, covariates) -> Dataset:
    header, body = read_table(path)
    y = numeric_column(path, header, body, response)
    cols = [numeric_column(path, header, body, c) for c in covariates]
    X = np.column_stack(cols) if cols else np.zeros((y.size, 0))
    return Dataset(y, X, tuple(covariates))


def format_float(x: float) -> str:
    return repr(float(x))


def write_csv(columns: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(names)
    for row in zip(*(columns[name] for name in names)):
        writer.writerow([format_float(v) for v in row])
    return buf.getvalue()
