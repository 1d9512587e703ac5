"""Structured result records shared by the numerical modules and the CLI."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, field, is_dataclass
from fractions import Fraction
from typing import Any

import numpy as np


def _jsonable(obj: Any) -> Any:
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


@dataclass
class RunReport:
    """One command's parameters, results and timing."""

    command: str
    parameters: dict[str, Any] = field(default_factory=dict)
    results: dict[str, Any] = field(default_factory=dict)
    rows: list[dict[str, Any]] = field(default_factory=list)
    ok: bool = True
    elapsed: float = 0.0

    @property
    def input_hash(self) -> str:
        blob = json.dumps(_jsonable(self.parameters), sort_keys=True).encode()
        return hashlib.sha1(b"blob %d\0" % len(blob) + blob).hexdigest()

    def to_dict(self, timing: bool = True) -> dict[str, Any]:
        out = {
            "command": self.command,
            "parameters": _jsonable(self.parameters),
            "input_hash": self.input_hash,
            "ok": bool(self.ok),
            "results": _jsonable(self.results),
        }
        if self.rows:
            out["rows"] = _jsonable(self.rows)
        if timing:
            out["elapsed_s"] = round(self.elapsed, 3)
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(self.rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, float):
        return repr(v)
    return v


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0
        return False
