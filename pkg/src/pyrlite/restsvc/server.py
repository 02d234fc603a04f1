"""HTTP resource service: rows addressable by URL with strong ETags.

Paths: ``/{database}/{role}/{table-or-view}[/{key}]``.  GET returns JSON
rows (column names as keys); table GETs accept ``select=``, ``where=``,
``agg=`` and ``etags=1`` query parameters, which also make any database a
federation contributor.  POST inserts, PUT/DELETE are conditional on
If-Match.  ``POST /{db}/{role}`` executes one SQL statement (the remote
shell).  ``GET /{db}/{role}/$class/{table}`` serves the typed-record model.

Visualization selectors (``?PIE(X,Y)...``) are parsed and answered 501:
the URL grammar is honored, chart rendering is out of scope.
"""

from __future__ import annotations

import base64
import datetime
import json
import os
import re
import threading
import urllib.parse
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Dict, List, Optional, Tuple

from .. import uids
from ..engine import (Database, check_privilege, generate_class_model)
from ..errors import (AuthorizationError, CardinalityError, ConstraintError,
                      NameError_, PyrliteError, RestViewError, SqlRuntimeError,
                      SqlSyntaxError, StatementError, TransactionConflict)
from ..physical import PDelete, PUpdate, Priv
from ..session import Session
from ..snapshot import NS_REL, NS_ROLE, RestViewObj, TableObj, ViewObj
from ..sql.aggregates import Register
from ..sql.ast import FuncCall, Select, SelectItem, TableRef
from ..sql.executor import Binder, Filter, Runner, execute_statement, review
from ..sql.parser import parse_expression
from ..values import Real, json_ready
from .etags import row_etag, rowset_etag
from .federation import cell_from_json

_VIZ_RE = re.compile(r"^(PIE|HISTOGRAM|LINE|POINTS)\(", re.IGNORECASE)
_VIZ_WORDS = re.compile(r"([A-Za-z]+)(?:\(([^)]*)\))?")


class _HttpReply(Exception):
    def __init__(self, status: int, body=None, headers=None):
        super().__init__(f"HTTP {status}")
        self.status = status
        self.body = body
        self.headers = headers or {}


def _error_body(kind: str, message: str) -> dict:
    return {"error": kind, "message": message}


class ResourceService:
    """Threaded HTTP server over one or more databases."""

    def __init__(self, databases: Optional[Dict[str, Database]] = None,
                 data_dir: Optional[str] = None, port: int = 0,
                 host: str = "127.0.0.1", fsync: bool = False):
        self.databases: Dict[str, Database] = dict(databases or {})
        self.data_dir = data_dir
        self.fsync = fsync
        self.request_log: List[Tuple[str, str]] = []
        self._lock = threading.Lock()
        service = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def do_GET(self):
                service._handle(self, "GET")

            def do_POST(self):
                service._handle(self, "POST")

            def do_PUT(self):
                service._handle(self, "PUT")

            def do_DELETE(self):
                service._handle(self, "DELETE")

        self.httpd = ThreadingHTTPServer((host, port), Handler)
        self.port = self.httpd.server_address[1]
        self.base_url = f"http://{host}:{self.port}"
        self._thread: Optional[threading.Thread] = None

    def start(self) -> "ResourceService":
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread:
            self._thread.join(timeout=5)

    def serve_forever(self):
        self.httpd.serve_forever()

    def db(self, name: str) -> Optional[Database]:
        with self._lock:
            if name in self.databases:
                return self.databases[name]
            if self.data_dir is not None:
                path = os.path.join(self.data_dir, f"{name}.pyl")
                if os.path.exists(path):
                    d = Database(path, fsync=self.fsync)
                    self.databases[name] = d
                    return d
        return None

    # -- request handling ---------------------------------------------------

    def _handle(self, h: BaseHTTPRequestHandler, method: str):
        self.request_log.append((method, h.path))
        try:
            reply = self._route(h, method)
        except _HttpReply as r:
            reply = r
        except TransactionConflict as e:
            reply = _HttpReply(409, _error_body("conflict", str(e)))
        except ConstraintError as e:
            reply = _HttpReply(409, _error_body("constraint", str(e)))
        except (NameError_,) as e:
            reply = _HttpReply(404, _error_body("not found", str(e)))
        except AuthorizationError as e:
            reply = _HttpReply(403, _error_body("forbidden", str(e)))
        except RestViewError as e:
            reply = _HttpReply(409, _error_body("federation", str(e)))
        except (StatementError, SqlSyntaxError, SqlRuntimeError,
                CardinalityError) as e:
            reply = _HttpReply(409, _error_body("statement", str(e)))
        except PyrliteError as e:
            reply = _HttpReply(409, _error_body("error", str(e)))
        body = b""
        if reply.body is not None:
            body = json.dumps(reply.body).encode("utf-8")
        h.send_response(reply.status)
        h.send_header("Content-Type", "application/json")
        h.send_header("Content-Length", str(len(body)))
        for k, v in reply.headers.items():
            h.send_header(k, v)
        h.end_headers()
        if method != "HEAD":
            h.wfile.write(body)

    def _auth_user(self, h: BaseHTTPRequestHandler) -> str:
        header = h.headers.get("Authorization", "")
        if not header.startswith("Basic "):
            raise _HttpReply(401, _error_body("auth", "Basic credentials required"),
                             {"WWW-Authenticate": "Basic realm=pyrlite"})
        try:
            raw = base64.b64decode(header[6:]).decode("utf-8")
        except Exception:
            raise _HttpReply(401, _error_body("auth", "bad credentials")) from None
        return raw.split(":", 1)[0]

    def _route(self, h: BaseHTTPRequestHandler, method: str) -> _HttpReply:
        split = urllib.parse.urlsplit(h.path)
        segs = [urllib.parse.unquote(s) for s in split.path.strip("/").split("/")
                if s != ""]
        if not segs:
            raise _HttpReply(404, _error_body("not found", "no database in path"))
        raw_query = split.query
        user = self._auth_user(h)
        db = self.db(segs[0])
        if db is None:
            raise _HttpReply(404, _error_body("not found",
                                              f"unknown database {segs[0]}"))
        snap = db.snapshot
        if snap.owner is not None and snap.user_by_name(user) is None:
            raise _HttpReply(401, _error_body("auth", f"unknown user {user}"))
        if len(segs) < 2:
            raise _HttpReply(404, _error_body("not found", "no role in path"))
        role = segs[1]
        if role.upper() != "PUBLIC" and snap.resolve(NS_ROLE, role) is None:
            raise _HttpReply(404, _error_body("not found",
                                              f"unknown role {role}"))
        if raw_query and _VIZ_RE.match(urllib.parse.unquote(raw_query)):
            q = urllib.parse.unquote(raw_query)
            parsed = [[w, args or ""] for w, args in _VIZ_WORDS.findall(q)]
            return _HttpReply(501, {"error": "not implemented",
                                    "selector": q, "parsed": parsed})
        params = dict(urllib.parse.parse_qsl(raw_query))
        if len(segs) == 2:
            if method == "POST":
                return self._post_sql(h, db, user, role)
            raise _HttpReply(404, _error_body("not found", "no table in path"))
        if len(segs) == 4 and segs[2] == "$class":
            if method != "GET":
                raise _HttpReply(405, _error_body("method", "GET only"))
            return self._class_model(db, user, role, segs[3])
        if len(segs) == 3:
            if method == "GET":
                return self._collection_get(h, db, user, role, segs[2], params)
            if method == "POST":
                return self._insert(h, db, user, role, segs[2])
            raise _HttpReply(405, _error_body("method",
                                              "POST/GET on collections"))
        if len(segs) == 4:
            if method == "GET":
                return self._row_get(h, db, user, role, segs[2], segs[3])
            if method == "PUT":
                return self._row_put(h, db, user, role, segs[2], segs[3])
            if method == "DELETE":
                return self._row_delete(h, db, user, role, segs[2], segs[3])
            raise _HttpReply(405, _error_body("method", "GET/PUT/DELETE on rows"))
        raise _HttpReply(404, _error_body("not found", "bad path"))

    # -- endpoint implementations ---------------------------------------------

    def _begin(self, db: Database, user: str, role: str):
        try:
            return db.begin(user, role)
        except AuthorizationError as e:
            if "unknown user" in str(e):
                raise _HttpReply(401, _error_body("auth", str(e))) from None
            raise _HttpReply(403, _error_body("forbidden", str(e))) from None

    def _post_sql(self, h, db: Database, user: str, role: str) -> _HttpReply:
        length = int(h.headers.get("Content-Length") or 0)
        text = h.rfile.read(length).decode("utf-8")
        session = Session(db, user, role)
        try:
            result = session.run(text)
        except PyrliteError as e:
            return _HttpReply(200, {"error": type(e).__name__, "message": str(e)})
        body = {"columns": result.columns,
                "rows": [[json_ready(v) for v in row] for row in result.rows()],
                "affected": result.affected,
                "message": result.message}
        return _HttpReply(200, body)

    def _resolve_rel(self, db: Database, name: str):
        snap = db.snapshot
        uid = snap.resolve(NS_REL, name)
        if uid is None:
            raise _HttpReply(404, _error_body("not found",
                                              f"unknown table or view {name}"))
        return snap.obj(uid)

    def _collection_get(self, h, db, user, role, name, params) -> _HttpReply:
        obj = self._resolve_rel(db, name)
        tx = self._begin(db, user, role)
        etag = rowset_etag(tx.base)
        if h.headers.get("If-None-Match") == etag:
            return _HttpReply(304, None, {"ETag": etag})
        if isinstance(obj, TableObj):
            return self._table_get(tx, obj, params, etag)
        # views and restviews execute as SELECT
        items = self._select_items(params)
        sel = Select(items, (TableRef(name),),
                     parse_expression(params["where"])
                     if params.get("where") else None)
        result = execute_statement(tx, sel)
        if params.get("agg"):
            regs = self._aggregate_rows(params["agg"], result.columns,
                                        result.rows())
            return _HttpReply(200, {"$registers": regs}, {"ETag": etag})
        rows = [
            {c: json_ready(v) for c, v in zip(result.columns, row)}
            for row in result.rows()
        ]
        return _HttpReply(200, rows, {"ETag": etag})

    def _select_items(self, params) -> tuple:
        if params.get("select"):
            from ..sql.ast import ColRef
            names = [s.strip().upper() for s in params["select"].split(",")
                     if s.strip()]
            return tuple(SelectItem(ColRef((n,))) for n in names)
        return (SelectItem(star=True),)

    def _table_get(self, tx, table: TableObj, params, etag) -> _HttpReply:
        binder = Binder(tx)
        src = binder.from_source(table.name, None, tx.role)
        plan = src.plan
        if params.get("where"):
            pred = binder.bind_expr(parse_expression(params["where"]),
                                    ((src,),), tx.role)
            plan = Filter(plan.columns, plan, (pred,))
        tx = binder.tx
        plan = review(plan, tx)
        runner = Runner(tx)
        rows = runner.run(plan)
        tx = runner.finish()
        snap = tx.effective
        out_cols = list(src.plan.columns)
        if params.get("select"):
            wanted = [s.strip().upper() for s in params["select"].split(",")
                      if s.strip()]
            by_name = {c.name: c for c in out_cols}
            missing = [w for w in wanted if w not in by_name]
            if missing:
                raise _HttpReply(404, _error_body(
                    "not found", f"unknown column {missing[0]}"))
            out_cols = [by_name[w] for w in wanted]
        if params.get("agg"):
            regs = self._aggregate_rows(
                params["agg"], [c.name for c in src.plan.columns],
                [[r.get(c.uid) for c in src.plan.columns] for r in rows])
            return _HttpReply(200, {"$registers": regs}, {"ETag": etag})
        with_etags = params.get("etags") == "1"
        td = snap.table_data(table.uid)
        scan = src.plan
        body = []
        for r in rows:
            obj = {c.name: json_ready(r.get(c.uid)) for c in out_cols}
            if with_etags:
                row_uid = r[scan.rowid_uid]
                stored = td.rows.get(row_uid)
                if stored is not None:
                    obj["$etag"] = row_etag(row_uid, stored)
            body.append(obj)
        return _HttpReply(200, body, {"ETag": etag})

    def _aggregate_rows(self, agg_param: str, colnames, rows) -> dict:
        specs = []
        for text in agg_param.split(","):
            e = parse_expression(text.strip())
            if not isinstance(e, FuncCall):
                raise _HttpReply(409, _error_body("statement",
                                                  f"bad aggregate {text!r}"))
            specs.append(e)
        idx = {n: i for i, n in enumerate(colnames)}
        regs = []
        for e in specs:
            reg = Register(e.name)
            for row in rows:
                if e.star:
                    reg.feed(1)
                else:
                    name = e.arg.parts[-1]
                    if name not in idx:
                        raise _HttpReply(404, _error_body(
                            "not found", f"unknown column {name}"))
                    reg.feed(row[idx[name]])
            regs.append(reg)
        return {str(i): r.to_json() for i, r in enumerate(regs)}

    # -- row addressing --------------------------------------------------------

    def _pk_lookup(self, tx, table: TableObj, key_seg: str):
        snap = tx.effective
        pk = snap.primary_index(table)
        if pk is None:
            raise _HttpReply(404, _error_body("not found",
                                              f"{table.name} has no primary key"))
        parts = key_seg.split(",")
        if len(parts) != len(pk.columns):
            raise _HttpReply(404, _error_body("not found", "bad key"))
        key = []
        for cu, part in zip(pk.columns, parts):
            col = snap.obj(cu)
            try:
                key.append(cell_from_json(snap, col.domain, part))
            except (SqlRuntimeError, ValueError):
                raise _HttpReply(404, _error_body("not found",
                                                  "key does not match the "
                                                  "primary-key domain")) from None
        tree = snap.table_data(table.uid).indexes.get(pk.uid)
        row_uid = tree.get(tuple(key)) if tree is not None else None
        if row_uid is None:
            raise _HttpReply(404, _error_body("not found", "no such row"))
        return pk, tuple(key), row_uid

    def _row_json(self, snap, table: TableObj, row_uid: int) -> dict:
        row = snap.table_data(table.uid).rows.get(row_uid)
        out = {}
        for cu in table.columns:
            col = snap.obj(cu)
            out[col.name] = json_ready(row.cells.get(cu))
        out["$etag"] = row_etag(row_uid, row)
        return out

    def _row_get(self, h, db, user, role, name, key_seg) -> _HttpReply:
        obj = self._resolve_rel(db, name)
        if not isinstance(obj, TableObj):
            raise _HttpReply(405, _error_body("method",
                                              "row addressing needs a base table"))
        tx = self._begin(db, user, role)
        pk, key, row_uid = self._pk_lookup(tx, obj, key_seg)
        row = tx.effective.table_data(obj.uid).rows.get(row_uid)
        etag = row_etag(row_uid, row)
        if h.headers.get("If-None-Match") == etag:
            return _HttpReply(304, None, {"ETag": etag})
        tx.note_read(obj.uid, frozenset(obj.columns), {row_uid})
        return _HttpReply(200, self._row_json(tx.effective, obj, row_uid),
                          {"ETag": etag})

    def _read_body_json(self, h) -> dict:
        length = int(h.headers.get("Content-Length") or 0)
        try:
            data = json.loads(h.rfile.read(length).decode("utf-8"))
        except Exception:
            raise _HttpReply(409, _error_body("statement", "bad JSON body")) \
                from None
        if not isinstance(data, dict):
            raise _HttpReply(409, _error_body("statement",
                                              "body must be a JSON object"))
        return data

    def _insert(self, h, db, user, role, name) -> _HttpReply:
        from ..sql.ast import Insert, Lit
        obj = self._resolve_rel(db, name)
        body = self._read_body_json(h)
        tx = self._begin(db, user, role)
        snap = tx.effective
        if isinstance(obj, TableObj):
            by_name = {snap.obj(c).name: snap.obj(c) for c in obj.columns}
            cols, vals = [], []
            for k, v in body.items():
                if k.startswith("$"):
                    continue
                if k not in by_name:
                    raise _HttpReply(404, _error_body("not found",
                                                      f"unknown column {k}"))
                cols.append(k)
                vals.append(Lit(cell_from_json(snap, by_name[k].domain, v)))
            stmt = Insert(name, tuple(cols), (tuple(vals),))
        elif isinstance(obj, RestViewObj):
            by_name = {c.name: c for c in obj.columns}
            cols, vals = [], []
            for k, v in body.items():
                if k.startswith("$"):
                    continue
                if k not in by_name:
                    raise _HttpReply(404, _error_body("not found",
                                                      f"unknown column {k}"))
                cols.append(k)
                vals.append(Lit(cell_from_json(snap, by_name[k].domain, v)))
            stmt = Insert(name, tuple(cols), (tuple(vals),))
        else:
            raise _HttpReply(405, _error_body("method", "view is not insertable"))
        result = execute_statement(tx, stmt)
        from ..session import _remote_sender
        snap2, _ = db.commit(result.tx, send_remote=_remote_sender())
        if isinstance(obj, RestViewObj):
            return _HttpReply(201, {"inserted": 1})
        keys = result.extra.get("keys") if hasattr(result, "extra") else None
        row_uid = keys[0] if keys else None
        if row_uid is None:
            raise _HttpReply(409, _error_body("error", "insert lost its row"))
        row = snap2.table_data(obj.uid).rows.get(row_uid)
        return _HttpReply(201, self._row_json(snap2, obj, row_uid),
                          {"ETag": row_etag(row_uid, row)})

    def _conditional(self, h, db, user, role, name, key_seg, method) -> _HttpReply:
        obj = self._resolve_rel(db, name)
        if not isinstance(obj, TableObj):
            raise _HttpReply(405, _error_body("method",
                                              "conditional writes need a base table"))
        if_match = h.headers.get("If-Match")
        if not if_match:
            raise _HttpReply(412, _error_body("precondition",
                                              "If-Match is required"))
        tx = self._begin(db, user, role)
        action = Priv.UPDATE if method == "PUT" else Priv.DELETE
        if not check_privilege(tx.effective, tx.user, tx.role, obj.uid, action):
            raise _HttpReply(403, _error_body("forbidden",
                                              f"no privilege on {name}"))
        pk, key, row_uid = self._pk_lookup(tx, obj, key_seg)
        snap = tx.effective
        row = snap.table_data(obj.uid).rows.get(row_uid)
        current = row_etag(row_uid, row)
        if if_match != current:
            raise _HttpReply(412, _error_body("precondition", "stale ETag"),
                             {"ETag": current})
        tx = tx.note_read(obj.uid, frozenset(obj.columns), {row_uid})
        if method == "PUT":
            body = self._read_body_json(h)
            by_name = {snap.obj(c).name: snap.obj(c) for c in obj.columns}
            fields = []
            for k, v in body.items():
                if k.startswith("$"):
                    continue
                if k not in by_name:
                    raise _HttpReply(404, _error_body("not found",
                                                      f"unknown column {k}"))
                col = by_name[k]
                fields.append((col.uid, cell_from_json(snap, col.domain, v)))
            tx = tx.stage(PUpdate(table=obj.uid, row=row_uid,
                                  prev=row.last_change, fields=tuple(fields)))
        else:
            tx = tx.stage(PDelete(table=obj.uid, row=row_uid,
                                  prev=row.last_change))
        try:
            snap2, _ = db.commit(tx)
        except TransactionConflict:
            latest = db.snapshot.table_data(obj.uid).rows.get(row_uid)
            if latest is None or row_etag(row_uid, latest) != if_match:
                hdrs = {} if latest is None else \
                    {"ETag": row_etag(row_uid, latest)}
                raise _HttpReply(412, _error_body("precondition",
                                                  "row changed"), hdrs) from None
            raise
        if method == "DELETE":
            return _HttpReply(204, None)
        new_row = snap2.table_data(obj.uid).rows.get(row_uid)
        return _HttpReply(200, self._row_json(snap2, obj, row_uid),
                          {"ETag": row_etag(row_uid, new_row)})

    def _row_put(self, h, db, user, role, name, key_seg) -> _HttpReply:
        return self._conditional(h, db, user, role, name, key_seg, "PUT")

    def _row_delete(self, h, db, user, role, name, key_seg) -> _HttpReply:
        return self._conditional(h, db, user, role, name, key_seg, "DELETE")

    def _class_model(self, db, user, role, name) -> _HttpReply:
        snap = db.snapshot
        uid = snap.resolve(NS_REL, name)
        if uid is None or not isinstance(snap.obj(uid), TableObj):
            raise _HttpReply(404, _error_body("not found",
                                              f"unknown table {name}"))
        tx = self._begin(db, user, role)
        model = generate_class_model(snap, tx.role, uid, user=tx.user)
        return _HttpReply(200, model)
