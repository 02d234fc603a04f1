"""Aggregation registers.

One register per aggregate occurrence.  Registers accumulate locally, merge
across contributors, and finalize to the SQL value, so a federated
aggregate equals the same aggregate over the union of all rows.  The JSON
form travels in contributor responses; cell payloads are tagged to survive
the trip exactly (big integers and decimals as strings).
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass
from typing import Optional

from ..errors import SqlRuntimeError
from ..values import Real, compare, num_add, num_div

KINDS = ("SUM", "COUNT", "AVG", "MIN", "MAX")


def _tag_cell(v):
    if v is None:
        return {"t": "null", "v": None}
    if isinstance(v, bool):
        return {"t": "bool", "v": v}
    if isinstance(v, int):
        return {"t": "int", "v": str(v)}
    if isinstance(v, Real):
        return {"t": "real", "v": [str(v.mantissa), v.scale]}
    if isinstance(v, str):
        return {"t": "str", "v": v}
    if isinstance(v, datetime.date):
        return {"t": "date", "v": v.isoformat()}
    raise SqlRuntimeError(f"untaggable cell {v!r}")


def _untag_cell(d):
    t = d["t"]
    if t == "null":
        return None
    if t == "bool":
        return d["v"]
    if t == "int":
        return int(d["v"])
    if t == "real":
        return Real(int(d["v"][0]), d["v"][1])
    if t == "str":
        return d["v"]
    if t == "date":
        return datetime.date.fromisoformat(d["v"])
    raise SqlRuntimeError(f"unknown cell tag {t!r}")


@dataclass
class Register:
    kind: str
    total: object = None       # SUM / AVG partial sum
    count: int = 0             # COUNT / AVG row count
    extremum: object = None    # MIN / MAX

    def feed(self, value):
        """Accumulate one row's argument (None = SQL NULL, ignored;
        COUNT(*) feeds a non-null marker for every row)."""
        if value is None:
            return
        if self.kind == "COUNT":
            self.count += 1
        elif self.kind in ("SUM", "AVG"):
            self.total = value if self.total is None \
                else num_add(self.total, value)
            self.count += 1
        elif self.kind == "MIN":
            if self.extremum is None or compare(value, self.extremum) < 0:
                self.extremum = value
        else:
            if self.extremum is None or compare(value, self.extremum) > 0:
                self.extremum = value

    def merge(self, other: "Register"):
        if other.kind != self.kind:
            raise SqlRuntimeError("register kind mismatch")
        self.count += other.count
        if other.total is not None:
            self.total = other.total if self.total is None \
                else num_add(self.total, other.total)
        if other.extremum is not None:
            if self.extremum is None:
                self.extremum = other.extremum
            elif self.kind == "MIN" and compare(other.extremum, self.extremum) < 0:
                self.extremum = other.extremum
            elif self.kind == "MAX" and compare(other.extremum, self.extremum) > 0:
                self.extremum = other.extremum

    def finalize(self):
        if self.kind == "COUNT":
            return self.count
        if self.kind == "SUM":
            return self.total
        if self.kind == "AVG":
            if self.count == 0:
                return None
            return num_div(self.total, self.count)
        return self.extremum

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "COUNT":
            out["count"] = self.count
        elif self.kind in ("SUM", "AVG"):
            out["sum"] = _tag_cell(self.total)
            out["count"] = self.count
        else:
            out["extremum"] = _tag_cell(self.extremum)
        return out

    @classmethod
    def from_json(cls, d: dict) -> "Register":
        r = cls(d["kind"])
        if r.kind == "COUNT":
            r.count = d["count"]
        elif r.kind in ("SUM", "AVG"):
            r.total = _untag_cell(d["sum"])
            r.count = d["count"]
        else:
            r.extremum = _untag_cell(d["extremum"])
        return r
