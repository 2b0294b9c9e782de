"""Machine-readable result records and their serialisation."""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from typing import IO

import numpy as np


def _clean(v):
    """Make a value JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, complex):
        return [_clean(v.real), _clean(v.imag)]
    return v


@dataclass
class ResultRecord:
    command: str
    quantity: str
    value: float | int | None
    parameters: dict = field(default_factory=dict)
    expected: float | None = None
    tolerance: float | None = None
    passed: bool | None = None
    provenance: str = ""
    runtime_ms: int | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, command, quantity, value, expected, tolerance, **kw) -> "ResultRecord":
        """Record with ``pass = |value - expected| <= tolerance``."""
        ok = None
        if expected is not None and tolerance is not None and value is not None:
            ok = bool(abs(value - expected) <= tolerance)
        return cls(command, quantity, value, expected=expected, tolerance=tolerance,
                   passed=ok, **kw)

    def as_dict(self) -> dict:
        d = {"command": self.command, "parameters": self.parameters,
             "quantity": self.quantity, "value": self.value, "expected": self.expected,
             "tolerance": self.tolerance, "pass": self.passed,
             "runtime_ms": self.runtime_ms, "provenance": self.provenance}
        if self.extra:
            d["extra"] = self.extra
        return _clean(d)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, separators=(", ", ": "))


class RecordWriter:
    """Single writer: records go to ``out`` in the order they are emitted."""

    def __init__(self, out: IO | None = None):
        self.out = out if out is not None else sys.stdout
        self.records: list[ResultRecord] = []

    def emit(self, rec: ResultRecord) -> None:
        self.records.append(rec)
        self.out.write(rec.to_json() + "\n")

    @property
    def failed(self) -> list[ResultRecord]:
        return [r for r in self.records if r.passed is False]


def write_columns(path, header: list[str], columns) -> None:
    """Whitespace-separated columns with one header line of names."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else \
        np.zeros((0, len(header)))
    np.savetxt(path, data, header=" ".join(header), comments="", fmt="%.12g")
