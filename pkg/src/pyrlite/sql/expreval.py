"""Scalar expression evaluation with SQL three-valued logic.

This core is subquery-free: the executor layers subquery handling on top,
and the engine uses ``eval_check`` for CHECK constraints (which see only
their own row's columns).  NULL is Python None; comparisons and arithmetic
over NULL yield NULL, and WHERE-style consumers keep only True.
"""

from __future__ import annotations

import datetime

from ..errors import SqlRuntimeError
from ..values import (Real, compare, format_cell, num_add, num_div, num_mul,
                      num_sub, real_round)
from .ast import BinOp, Case, Cast, ColRef, Expr, FuncCall, IsNull, Lit, UnOp


def sql_compare(a, b) -> int:
    try:
        return compare(a, b)
    except TypeError as e:
        raise SqlRuntimeError(str(e)) from None


def _arith(op: str, a, b):
    if isinstance(a, str) or isinstance(b, str):
        raise SqlRuntimeError(f"cannot apply {op} to strings")
    if isinstance(a, bool) or isinstance(b, bool):
        raise SqlRuntimeError(f"cannot apply {op} to booleans")
    if op == "+":
        if isinstance(a, datetime.date) or isinstance(b, datetime.date):
            raise SqlRuntimeError("date arithmetic is not supported")
        return num_add(a, b)
    if op == "-":
        return num_sub(a, b)
    if op == "*":
        return num_mul(a, b)
    return num_div(a, b)


def apply_binop(op: str, a, b):
    if op in ("AND", "OR"):
        # Kleene logic
        if op == "AND":
            if a is False or b is False:
                return False
            if a is None or b is None:
                return None
            return _truth(a) and _truth(b)
        if a is True or b is True:
            return True
        if a is None or b is None:
            return None
        return _truth(a) or _truth(b)
    if a is None or b is None:
        return None
    if op == "||":
        if not isinstance(a, str) or not isinstance(b, str):
            raise SqlRuntimeError("|| requires character operands")
        return a + b
    if op in ("+", "-", "*", "/"):
        return _arith(op, a, b)
    c = sql_compare(a, b)
    return {"=": c == 0, "<>": c != 0, "<": c < 0, "<=": c <= 0,
            ">": c > 0, ">=": c >= 0}[op]


def _truth(v):
    if isinstance(v, bool):
        return v
    raise SqlRuntimeError(f"not a boolean: {v!r}")


def cast_value(v, base: str, precision: int, scale):
    if v is None:
        return None
    if base == "INT":
        if isinstance(v, bool):
            raise SqlRuntimeError("cannot cast boolean to INT")
        if isinstance(v, int):
            return v
        if isinstance(v, Real):
            r = real_round(v, 0)
            return r.mantissa * 10 ** r.scale if r.scale >= 0 else r.mantissa
        if isinstance(v, str):
            try:
                return int(v.strip())
            except ValueError:
                raise SqlRuntimeError(f"cannot cast {v!r} to INT") from None
        raise SqlRuntimeError(f"cannot cast {v!r} to INT")
    if base == "NUMERIC":
        if isinstance(v, bool):
            raise SqlRuntimeError("cannot cast boolean to NUMERIC")
        if isinstance(v, int):
            v = Real(v, 0)
        elif isinstance(v, str):
            v = Real.from_string(v)
        if not isinstance(v, Real):
            raise SqlRuntimeError(f"cannot cast {v!r} to NUMERIC")
        if scale is not None:
            v = real_round(v, scale)
        if precision and len(str(abs(v.mantissa))) > precision:
            raise SqlRuntimeError(f"numeric overflow casting to "
                                  f"NUMERIC({precision},{scale})")
        return v
    if base == "CHAR":
        s = format_cell(v)
        return s[:precision] if precision else s
    if base == "BOOLEAN":
        if isinstance(v, bool):
            return v
        raise SqlRuntimeError(f"cannot cast {v!r} to BOOLEAN")
    if base == "DATE":
        if isinstance(v, datetime.date):
            return v
        if isinstance(v, str):
            try:
                return datetime.date.fromisoformat(v.strip())
            except ValueError:
                pass
        raise SqlRuntimeError(f"cannot cast {v!r} to DATE")
    raise SqlRuntimeError(f"unknown cast target {base}")


def eval_expr(e: Expr, lookup):
    """Evaluate with ``lookup(expr) -> value`` handling column references
    and anything else the caller binds (subqueries, bound columns)."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, BinOp):
        if e.op in ("AND", "OR"):
            return apply_binop(e.op, eval_expr(e.left, lookup),
                               eval_expr(e.right, lookup))
        return apply_binop(e.op, eval_expr(e.left, lookup),
                           eval_expr(e.right, lookup))
    if isinstance(e, UnOp):
        v = eval_expr(e.operand, lookup)
        if v is None:
            return None
        if e.op == "NOT":
            return not _truth(v)
        if isinstance(v, (int, Real)) and not isinstance(v, bool):
            return num_sub(0, v)
        raise SqlRuntimeError(f"cannot negate {v!r}")
    if isinstance(e, IsNull):
        v = eval_expr(e.operand, lookup)
        return (v is not None) if e.negated else (v is None)
    if isinstance(e, Case):
        for cond, result in e.whens:
            if eval_expr(cond, lookup) is True:
                return eval_expr(result, lookup)
        return eval_expr(e.otherwise, lookup) if e.otherwise is not None else None
    if isinstance(e, Cast):
        v = eval_expr(e.operand, lookup)
        return cast_value(v, e.typespec.base, e.typespec.precision,
                          e.typespec.scale)
    if isinstance(e, FuncCall):
        raise SqlRuntimeError(f"aggregate {e.name} is not allowed here")
    return lookup(e)


def eval_check(e: Expr, row: dict):
    """CHECK evaluation: names resolve against the row's own columns."""
    def lookup(node):
        if isinstance(node, ColRef):
            name = node.parts[-1]
            if name not in row:
                raise SqlRuntimeError(f"unknown column {name} in check")
            return row[name]
        raise SqlRuntimeError("subqueries are not allowed in checks")
    return eval_expr(e, lookup)
