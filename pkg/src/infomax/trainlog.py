"""Metric rows with a stable CSV encoding."""
from __future__ import annotations

import csv
import io
import math


class NumericalAbort(RuntimeError):
    """A metric row contained NaN or Inf."""


def fmt(value) -> str:
    if isinstance(value, (bool,)):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    try:
        f = float(value)
    except (TypeError, ValueError):
        return str(value)
    if f.is_integer() and abs(f) < 2**53 and not isinstance(value, float):
        return str(int(f))
    return format(f, ".17g")


class TrainLog:
    """Ordered metric rows keyed by a monotone index (the first column)."""

    def __init__(self, columns):
        self.columns = list(columns)
        self.rows: list[dict] = []
        self.final_state = None

    def append(self, **row):
        missing = set(self.columns) - set(row)
        if missing:
            raise KeyError(f"missing columns {sorted(missing)}")
        for k, v in row.items():
            if isinstance(v, (int, float)) and not math.isfinite(v):
                raise NumericalAbort(f"non-finite {k}={v!r} in row {row}")
        idx = row[self.columns[0]]
        if self.rows and idx <= self.rows[-1][self.columns[0]]:
            raise ValueError(f"index {idx} is not increasing")
        self.rows.append({c: row[c] for c in self.columns})

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, i):
        return self.rows[i]

    def column(self, name):
        return [r[name] for r in self.rows]

    def last(self) -> dict:
        return self.rows[-1]

    def to_csv(self, fh=None) -> str | None:
        out = io.StringIO() if fh is None else fh
        w = csv.writer(out, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([fmt(r[c]) for c in self.columns])
        return out.getvalue() if fh is None else None
