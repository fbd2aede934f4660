"""Metrics CSV with a versioned header; bit-stable formatting."""

from __future__ import annotations

import csv
import io

SCHEMA_LINE = "# lagrange-rl-metrics v1"


def format_value(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".12g")


class MetricsWriter:
    """Row-oriented CSV writer with a fixed column set declared up front."""

    def __init__(self, path, columns: list[str]):
        self.columns = list(columns)
        self._fh = open(path, "w", newline="")
        self._fh.write(SCHEMA_LINE + "\n")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.columns)
        self._fh.flush()

    def write_row(self, row: dict) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise KeyError(f"metrics row has undeclared columns {sorted(unknown)}")
        self._writer.writerow([format_value(row.get(c, "")) for c in self.columns])

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path) -> tuple[list[str], list[dict]]:
    """Parse a metrics file: returns (columns, rows) with floats where possible."""
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != SCHEMA_LINE:
            raise ValueError(f"unrecognized metrics schema line {first!r}")
        reader = csv.reader(fh)
        columns = next(reader)
        rows = []
        for rec in reader:
            row = {}
            for key, val in zip(columns, rec):
                if val == "":
                    row[key] = None
                else:
                    try:
                        row[key] = float(val)
                    except ValueError:
                        row[key] = val
            rows.append(row)
    return columns, rows


def metrics_to_string(columns: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    writer = csv.writer(buf)
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row.get(c)) for c in columns])
    return buf.getvalue()
