"""CSV result tables with a ``#`` metadata header.

Floats are written with 17 significant digits so a write/read round trip is
bit exact.  Files are written to a temporary name and renamed into place.
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

CODE_VERSION = "0.1.0"


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, table has {len(self.columns)} columns")
        self.rows.append(list(values))

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def array(self, name: str) -> np.ndarray:
        return np.array(self.column(name), dtype=float)

    @property
    def has_nan(self) -> bool:
        return any(isinstance(v, float) and math.isnan(v) for r in self.rows for v in r)


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        s = format(v, ".17g")
        # keep integral floats (and -0.0) distinguishable from ints on read-back
        return s if any(c in s for c in ".en") else s + ".0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def render_table(table: ResultTable) -> str:
    buf = io.StringIO()
    meta = dict(table.metadata)
    meta.setdefault("code_version", CODE_VERSION)
    meta["nan_present"] = "true" if table.has_nan else "false"
    for k, v in meta.items():
        for i, line in enumerate(str(v).splitlines() or [""]):
            buf.write(f"# {k}: {line}\n" if i == 0 else f"#   {line}\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_table(table: ResultTable, path) -> str:
    """Atomically write ``table`` to ``path`` and return the path."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(render_table(table))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _parse(s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_table(path) -> ResultTable:
    with open(path, newline="") as fh:
        text = fh.read()
    meta = {}
    body = []
    key = None
    for line in text.splitlines(keepends=True):
        if line.startswith("#   ") and key is not None:
            meta[key] += "\n" + line[4:].rstrip("\r\n")
        elif line.startswith("# "):
            key, _, val = line[2:].rstrip("\r\n").partition(": ")
            meta[key] = val
        else:
            body.append(line)
    rd = csv.reader(io.StringIO("".join(body)))
    columns = next(rd)
    rows = [[_parse(c) for c in r] for r in rd]
    return ResultTable(columns, rows, meta)
