"""RESTView resolution: contributor selection, remote fetch, registers.

A query over a RESTView makes at most one HTTP request per contributor,
and only to contributors that survive filters on the using-table columns
(those are decided locally, with no roundtrip).  Each request carries the
projected remote columns, the pushable filter conjuncts, and any pushed
aggregate list; aggregate responses are registers that merge across
contributors before finalizing.

An unreachable contributor fails the whole fetch with a structured error
naming it; results are never silently partial.
"""

from __future__ import annotations

import datetime
import urllib.parse
from typing import Dict, List, Optional, Tuple

from .. import uids
from ..engine import RemoteWrite, Transaction, coerce_cell
from ..errors import RestViewError, SqlRuntimeError, StatementError
from ..snapshot import RestViewObj
from ..values import Real, json_ready
from ..sql.aggregates import Register
from ..sql.ast import ColRef, Delete, Expr, Insert, Update
from ..sql.expreval import eval_expr
from ..sql.planner import RestAggregate, RestRowSet
from .client import get_json

AGG_TIMEOUT = 10.0


def _base_domain_of(snap, domain_uid: int) -> int:
    if domain_uid < 0:
        return domain_uid
    d = snap.obj(domain_uid)
    return d.base if d is not None else uids.DOM_CHAR


def cell_from_json(snap, domain_uid: int, v):
    """Map a contributor's JSON value into an exact cell per the declared
    view column domain."""
    if v is None:
        return None
    base = _base_domain_of(snap, domain_uid)
    if base == uids.DOM_INTEGER:
        if isinstance(v, bool):
            raise SqlRuntimeError("boolean where integer expected")
        if isinstance(v, (int, str)):
            return int(v)
        if isinstance(v, float) and v.is_integer():
            return int(v)
    elif base == uids.DOM_NUMERIC:
        if isinstance(v, bool):
            raise SqlRuntimeError("boolean where numeric expected")
        if isinstance(v, int):
            return Real(v, 0)
        if isinstance(v, str):
            return Real.from_string(v)
        if isinstance(v, float):
            return Real.from_string(repr(v))
    elif base == uids.DOM_CHAR:
        if isinstance(v, str):
            return v
    elif base == uids.DOM_BOOLEAN:
        if isinstance(v, bool):
            return v
    elif base == uids.DOM_DATE:
        if isinstance(v, str):
            return datetime.date.fromisoformat(v)
    raise SqlRuntimeError(f"contributor value {v!r} does not fit the view column")


def _fetch(url: str, select: Tuple[str, ...] = (), where: Tuple[str, ...] = (),
           aggs: Tuple[str, ...] = (), etags: bool = False,
           credentials=None):
    params = {}
    if select:
        params["select"] = ",".join(select)
    if where:
        params["where"] = " AND ".join(where)
    if aggs:
        params["agg"] = ",".join(aggs)
    if etags:
        params["etags"] = "1"
    full = url
    if params:
        full += "?" + urllib.parse.urlencode(params)
    status, headers, data = get_json(full, credentials=credentials,
                                     timeout=AGG_TIMEOUT)
    if status != 200:
        raise RestViewError(
            f"contributor at {url} answered HTTP {status}", unreachable=[url])
    return headers, data


def _contributors(rest: RestRowSet, runner, env) -> List[Tuple[str, Dict[int, object]]]:
    """(url, copied-using-values) per contributor after using-col filters."""
    if rest.using_table is None:
        return [(rest.url, {})]
    snap = runner.tx.effective
    td = snap.table_data(rest.using_table)
    read_cols = frozenset(cu for _, cu in rest.using_map) | {rest.url_col}
    runner.notes.append((rest.using_table, read_cols, frozenset(), True,
                         rest.access_role))
    out = []
    for _, row in td.rows.items():
        copied = {inst: row.cells.get(cu) for inst, cu in rest.using_map}
        url = row.cells.get(rest.url_col)
        if url is None:
            continue
        keep = True
        for c in rest.using_filters:
            merged = {**env, **copied}
            if runner.eval(c, merged) is not True:
                keep = False
                break
        if keep:
            out.append((url, copied))
    return out


def run_rest_node(plan, runner, env) -> List[dict]:
    if isinstance(plan, RestAggregate):
        return _run_rest_aggregate(plan, runner, env)
    return _run_rest_rows(plan, runner, env)


def _run_rest_rows(rest: RestRowSet, runner, env) -> List[dict]:
    snap = runner.tx.effective
    where = tuple(c.to_sql() for c in rest.remote_filters)
    domains = {c.name: c.domain for c in rest.remote_cols}
    by_name = {c.name: c.uid for c in rest.remote_cols}
    out = []
    for url, copied in _contributors(rest, runner, env):
        _, data = _fetch(url, select=rest.remote_select, where=where,
                         etags=rest.with_etags, credentials=rest.credentials)
        for obj in data or []:
            row = dict(copied)
            for name, uid in by_name.items():
                if name in obj:
                    row[uid] = cell_from_json(snap, domains[name], obj[name])
                else:
                    row[uid] = None
            out.append(row)
    return out


def _run_rest_aggregate(node: RestAggregate, runner, env) -> List[dict]:
    rest = node.rest
    agg_texts = tuple(f"{kind}(*)" if name is None else f"{kind}({name})"
                      for kind, name in node.aggs)
    merged: Optional[List[Register]] = None
    for url, _copied in _contributors(rest, runner, env):
        _, data = _fetch(url, where=tuple(c.to_sql() for c in rest.remote_filters),
                         aggs=agg_texts, credentials=rest.credentials)
        if not isinstance(data, dict) or "$registers" not in data:
            raise RestViewError(f"contributor at {url} returned no registers")
        regs = [Register.from_json(data["$registers"][str(i)])
                for i in range(len(node.aggs))]
        if merged is None:
            merged = regs
        else:
            for m, r in zip(merged, regs):
                m.merge(r)
    if merged is None:
        merged = [Register(kind) for kind, _ in node.aggs]
    return [{c.uid: reg.finalize() for c, reg in zip(node.columns, merged)}]


# ---------------------------------------------------------------------------
# Updatable RESTViews (single contributor, all base key columns exposed)

def _single_url(view: RestViewObj) -> str:
    if view.using_table is not None or not view.url:
        raise StatementError(
            f"view {view.name} is not updatable: multiple contributors")
    return view.url


def _credentials(view: RestViewObj):
    u = view.meta("USER")
    if u:
        return (u, view.meta("PASSWORD") or "")
    return None


def _origin(url: str) -> str:
    parts = urllib.parse.urlsplit(url)
    return f"{parts.scheme}://{parts.netloc}"


def _remote_key_columns(view: RestViewObj, url: str) -> List[str]:
    base, _, table = url.rpartition("/")
    class_url = f"{base}/$class/{urllib.parse.quote(table)}"
    status, _, model = get_json(class_url, credentials=_credentials(view))
    if status != 200 or not isinstance(model, dict):
        raise StatementError(
            f"view {view.name} is not updatable: contributor model unavailable")
    keys = [c["name"] for c in model.get("columns", ()) if c.get("key")]
    declared = {c.name for c in view.columns}
    if not keys or not set(keys) <= declared:
        raise StatementError(
            f"view {view.name} is not updatable: key columns not exposed")
    return keys


def _eval_named(e: Expr, env: Dict[str, object]):
    def lookup(node):
        if isinstance(node, ColRef):
            name = node.parts[-1]
            if name not in env:
                raise StatementError(f"unknown column {name} in view")
            return env[name]
        raise StatementError("subqueries are not supported on remote views")
    return eval_expr(e, lookup)


def _expr_names(e: Expr) -> set:
    out = set()

    def walk(x):
        if isinstance(x, ColRef):
            out.add(x.parts[-1])
        for attr in ("left", "right", "operand", "arg", "otherwise"):
            child = getattr(x, attr, None)
            if isinstance(child, Expr):
                walk(child)
        for c, r in getattr(x, "whens", ()):
            walk(c)
            walk(r)

    walk(e)
    return out


def _matching_remote_rows(tx: Transaction, view: RestViewObj, where):
    url = _single_url(view)
    names = {c.name for c in view.columns}
    push = where is not None and _expr_names(where) <= names \
        and not _has_subquery_ast(where)
    where_texts = (where.to_sql(),) if push else ()
    _, data = _fetch(url, where=where_texts, etags=True,
                     credentials=_credentials(view))
    snap = tx.effective
    rows = []
    for obj in data or []:
        env = {c.name: cell_from_json(snap, c.domain, obj.get(c.name))
               for c in view.columns}
        if where is not None and not push:
            if _eval_named(where, env) is not True:
                continue
        etag = obj.get("$etag")
        if not etag:
            raise StatementError(
                f"contributor for {view.name} did not supply row versions")
        rows.append((env, etag))
    return url, rows


def _has_subquery_ast(e: Expr) -> bool:
    from ..sql.ast import Subquery
    found = []

    def walk(x):
        if isinstance(x, Subquery):
            found.append(x)
            return
        for attr in ("left", "right", "operand", "arg", "otherwise"):
            child = getattr(x, attr, None)
            if isinstance(child, Expr):
                walk(child)
        for c, r in getattr(x, "whens", ()):
            walk(c)
            walk(r)

    walk(e)
    return bool(found)


def _key_segment(env: Dict[str, object], keys: List[str]) -> str:
    parts = [urllib.parse.quote(str(env[k]), safe="") for k in keys]
    return ",".join(parts)


def stage_remote_update(tx: Transaction, view: RestViewObj, stmt: Update):
    from ..sql.executor import Result
    url, rows = _matching_remote_rows(tx, view, stmt.where)
    if len(rows) != 1:
        raise StatementError(
            f"single remote update: {len(rows)} rows match; exactly one is allowed")
    keys = _remote_key_columns(view, url)
    env, etag = rows[0]
    snap = tx.effective
    domains = {c.name: c.domain for c in view.columns}
    body = {}
    for cname, e in stmt.assignments:
        if cname not in domains:
            raise StatementError(f"unknown column {cname} in {view.name}")
        v = _eval_named(e, env)
        body[cname] = json_ready(coerce_cell(snap, domains[cname], v, cname))
    write = RemoteWrite(_origin(url), "PUT",
                        f"{url}/{_key_segment(env, keys)}", body, etag,
                        _credentials(view))
    tx = tx.note_object_read(view.uid).stage_remote(write)
    return Result([], None, 1, tx)


def stage_remote_delete(tx: Transaction, view: RestViewObj, stmt: Delete):
    from ..sql.executor import Result
    url, rows = _matching_remote_rows(tx, view, stmt.where)
    if len(rows) != 1:
        raise StatementError(
            f"single remote update: {len(rows)} rows match; exactly one is allowed")
    keys = _remote_key_columns(view, url)
    env, etag = rows[0]
    write = RemoteWrite(_origin(url), "DELETE",
                        f"{url}/{_key_segment(env, keys)}", None, etag,
                        _credentials(view))
    tx = tx.note_object_read(view.uid).stage_remote(write)
    return Result([], None, 1, tx)


def stage_remote_insert(tx: Transaction, view: RestViewObj, stmt: Insert):
    from ..sql.executor import Result
    url = _single_url(view)
    if len(stmt.rows) != 1:
        raise StatementError("single remote update: insert one row at a time")
    by_name = {c.name: c for c in view.columns}
    if stmt.columns:
        order = []
        for n in stmt.columns:
            if n not in by_name:
                raise StatementError(f"unknown column {n} in {view.name}")
            order.append(by_name[n])
    else:
        order = list(view.columns)
    row = stmt.rows[0]
    if len(row) != len(order):
        raise StatementError("value count does not match column count")
    snap = tx.effective
    body = {}
    for col, e in zip(order, row):
        v = _eval_named(e, {})
        body[col.name] = json_ready(coerce_cell(snap, col.domain, v, col.name))
    write = RemoteWrite(_origin(url), "POST", url, body, None,
                        _credentials(view))
    tx = tx.note_object_read(view.uid).stage_remote(write)
    return Result([], None, 1, tx)
