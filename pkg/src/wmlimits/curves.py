"""Ordered result tables written as CSV or JSON."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

from wmlimits.errors import AuditError


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class TradeoffCurve:
    """One curve: ``rows`` share ``columns``; column ``x_name`` strictly increases."""

    panel: str
    x_name: str
    y_name: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    series: str = ""

    def column(self, name: str) -> list:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def validate(self) -> None:
        xs = self.column(self.x_name)
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise AuditError(f"panel {self.panel}: {self.x_name} is not strictly increasing")
        ys = self.column(self.y_name)
        if not all(isinstance(y, (int, float)) and math.isfinite(y) for y in ys):
            raise AuditError(f"panel {self.panel}: non-finite {self.y_name}")

    def sorted(self) -> "TradeoffCurve":
        index = self.columns.index(self.x_name)
        rows = sorted(self.rows, key=lambda row: row[index])
        return TradeoffCurve(self.panel, self.x_name, self.y_name, self.columns, rows, self.series)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([format_value(v) for v in row])

    def to_records(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def to_json(self, path: Union[str, Path]) -> None:
        payload = {
            "panel": self.panel,
            "series": self.series,
            "x": self.x_name,
            "y": self.y_name,
            "columns": list(self.columns),
            "rows": [list(row) for row in self.rows],
        }
        Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def is_nonincreasing(values: Sequence[float], slack: float = 0.0) -> bool:
    return all(b <= a + slack for a, b in zip(values, values[1:]))


def is_strictly_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))
