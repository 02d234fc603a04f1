"""Plan execution and statement dispatch.

Execution walks the reviewed plan against the transaction's effective
snapshot.  Every base-table access is recorded at the narrowest granularity
the plan proves: an index seek notes just the rows it touched, a scan notes
the whole table; a seek that finds nothing also notes the whole table, so a
later re-run cannot be changed by a row appearing in the gap.  Results are
materialized into a bookmark-traversable rowset.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

from ..engine import (RemoteWrite, Transaction, check_privilege, coerce_cell,
                      next_autokey)
from ..errors import (AuthorizationError, CardinalityError, NameError_,
                      SqlRuntimeError, StatementError)
from ..pbtree import PTree
from ..physical import (Action, IndexKind, PAlter, PColumn, PDelete, PDomain,
                        PDrop, PGrant, PIndex, PMetadata, PRecord, PRestView,
                        PRole, PTable, PUpdate, PUser, PView, Priv)
from ..snapshot import (NS_REL, NS_ROLE, NS_USER, DomainObj, RestViewObj,
                        RoleObj, TableObj, UserObj, ViewObj)
from .. import uids
from .aggregates import Register
from .ast import (AlterTableAdd, AlterView, CreateRole, CreateTable,
                  CreateUser, CreateView, Delete, DropStmt, Expr, Grant,
                  Insert, Select, SetRole, Statement, TableCmd, TxCmd,
                  TypeSpec, Update)
from .expreval import eval_expr
from .planner import (Aggregate, Binder, BoundCol, BoundSubquery, Filter,
                      IndexSeek, OrderBy, OutCol, Plan, Product, Project,
                      RestAggregate, RestRowSet, TableScan, ViewInstance,
                      review)


class Rowset:
    """Query results in a positional PTree, traversed by cursors."""

    def __init__(self, columns: Tuple[OutCol, ...], tree: PTree):
        self.columns = columns
        self._tree = tree

    @classmethod
    def build(cls, columns, dict_rows) -> "Rowset":
        t = PTree.empty()
        for i, r in enumerate(dict_rows):
            t = t.add(i, tuple(r.get(c.uid) for c in columns))
        return cls(tuple(columns), t)

    def __len__(self):
        return self._tree.count

    def rows(self) -> List[tuple]:
        return [v for _, v in self._tree.items()]

    def cursor(self) -> Optional["Cursor"]:
        bm = self._tree.first()
        return Cursor(self, bm) if bm is not None else None


class Cursor:
    """Two-way position over a rowset, stable under later commits."""

    def __init__(self, rowset: Rowset, bm):
        self._rowset = rowset
        self._bm = bm

    @property
    def row(self) -> tuple:
        return self._bm.value

    def step(self, direction: int) -> Optional["Cursor"]:
        nxt = self._bm.step(direction)
        return Cursor(self._rowset, nxt) if nxt is not None else None

    def next(self):
        return self.step(1)

    def prev(self):
        return self.step(-1)


@dataclass
class Result:
    columns: List[str]
    rowset: Optional[Rowset]
    affected: Optional[int]
    tx: Transaction
    message: str = ""

    def rows(self) -> List[tuple]:
        return self.rowset.rows() if self.rowset is not None else []


class Runner:
    """Evaluates plans, collecting read notes to fold into the transaction."""

    def __init__(self, tx: Transaction):
        self.tx = tx
        self.notes: List[tuple] = []
        self._subcache: Dict[int, object] = {}

    def finish(self) -> Transaction:
        tx = self.tx
        for table_uid, cols, rows, whole, role in self.notes:
            tx = tx.note_read(table_uid, cols, rows, whole, access_role=role)
        return tx

    # -- expression evaluation -------------------------------------------

    def eval(self, e: Expr, env: dict):
        def lookup(node):
            if isinstance(node, BoundCol):
                if node.uid not in env:
                    raise SqlRuntimeError(f"unresolved column {node.name}")
                return env[node.uid]
            if isinstance(node, BoundSubquery):
                return self.scalar_subquery(node, env)
            raise SqlRuntimeError(f"unexpected expression {node!r}")
        return eval_expr(e, lookup)

    def scalar_subquery(self, sub: BoundSubquery, env: dict):
        from .planner import plan_free_uids
        key = id(sub.plan)
        correlated = bool(plan_free_uids(sub.plan))
        if not correlated and key in self._subcache:
            return self._subcache[key]
        rows = self.run(sub.plan, env)
        if len(rows) > 1:
            raise CardinalityError("scalar subquery returned more than one row")
        col = sub.plan.columns[0].uid
        value = rows[0].get(col) if rows else None
        if not correlated:
            self._subcache[key] = value
        return value

    # -- plan walking -------------------------------------------------------

    def run(self, plan: Plan, env: Optional[dict] = None) -> List[dict]:
        env = env or {}
        if isinstance(plan, TableScan):
            return self._scan(plan)
        if isinstance(plan, IndexSeek):
            return self._seek(plan, env)
        if isinstance(plan, Filter):
            out = []
            for r in self.run(plan.src, env):
                merged = {**env, **r}
                if all(self.eval(c, merged) is True for c in plan.conjuncts):
                    out.append(r)
            return out
        if isinstance(plan, Product):
            left = self.run(plan.left, env)
            right = self.run(plan.right, env)
            return [{**l, **r} for l in left for r in right]
        if isinstance(plan, Project):
            src_rows = self.run(plan.src, env) if plan.src is not None else [{}]
            out = []
            for r in src_rows:
                merged = {**env, **r}
                out.append({c.uid: self.eval(e, merged)
                            for c, e in zip(plan.columns, plan.exprs)})
            return out
        if isinstance(plan, OrderBy):
            rows = self.run(plan.src, env)
            return self._order(plan, rows, env)
        if isinstance(plan, Aggregate):
            rows = self.run(plan.src, env)
            regs = [Register(kind) for kind, _ in plan.aggs]
            for r in rows:
                merged = {**env, **r}
                for reg, (kind, arg) in zip(regs, plan.aggs):
                    reg.feed(1 if arg is None else self.eval(arg, merged))
            return [{c.uid: reg.finalize()
                     for c, reg in zip(plan.columns, regs)}]
        if isinstance(plan, ViewInstance):
            return self.run(plan.src, env)
        if isinstance(plan, (RestRowSet, RestAggregate)):
            from ..restsvc.federation import run_rest_node
            return run_rest_node(plan, self, env)
        raise SqlRuntimeError(f"unexecutable plan node {type(plan).__name__}")

    def _order(self, plan: OrderBy, rows: List[dict], env: dict) -> List[dict]:
        import functools
        from ..values import compare

        keyed = []
        for r in rows:
            merged = {**env, **r}
            keyed.append((tuple(self.eval(k, merged) for k, _ in plan.keys), r))

        def cmp(a, b):
            for (va, vb), (_, asc) in zip(zip(a[0], b[0]), plan.keys):
                if va is None and vb is None:
                    continue
                if va is None:
                    c = 1      # NULLs sort as greatest
                elif vb is None:
                    c = -1
                else:
                    c = compare(va, vb)
                if c:
                    return c if asc else -c
            return 0

        keyed.sort(key=functools.cmp_to_key(cmp))
        return [r for _, r in keyed]

    def _scan(self, scan: TableScan) -> List[dict]:
        snap = self.tx.effective
        td = snap.table_data(scan.table_uid)
        out = []
        for row_uid, row in td.rows.items():
            d = {inst: row.cells.get(base) for inst, base in scan.col_map}
            d[scan.rowid_uid] = row_uid
            out.append(d)
        self.notes.append((scan.table_uid, scan.accessed, frozenset(), True,
                           scan.access_role))
        return out

    def _seek(self, seek: IndexSeek, env: dict) -> List[dict]:
        scan = seek.scan
        snap = self.tx.effective
        td = snap.table_data(scan.table_uid)
        key_vals = tuple(self.eval(e, env) for e in seek.key)
        if any(v is None for v in key_vals):
            return []   # = NULL matches nothing, independent of data
        tree = td.indexes.get(seek.index_uid, PTree.empty())
        row_uids = []
        if seek.prefix:
            bm = tree.seek(key_vals)
            while bm is not None and bm.key[:len(key_vals)] == key_vals:
                row_uids.append(bm.value)
                bm = bm.next()
        else:
            hit = tree.get(key_vals)
            if hit is not None:
                row_uids.append(hit)
        out = []
        for row_uid in row_uids:
            row = td.rows.get(row_uid)
            if row is None:
                continue
            d = {inst: row.cells.get(base) for inst, base in scan.col_map}
            d[scan.rowid_uid] = row_uid
            out.append(d)
        if out:
            self.notes.append((scan.table_uid, scan.accessed,
                               frozenset(r[scan.rowid_uid] for r in out),
                               False, scan.access_role))
        else:
            # a miss depends on the key's absence: guard the whole table
            self.notes.append((scan.table_uid, scan.accessed, frozenset(),
                               True, scan.access_role))
        return out


# ---------------------------------------------------------------------------
# Statement execution

def execute_statement(tx: Transaction, stmt: Statement) -> Result:
    if isinstance(stmt, (SetRole, TxCmd)):
        raise StatementError(f"{type(stmt).__name__} is a session command")
    if isinstance(stmt, TableCmd):
        from .ast import SelectItem, TableRef
        stmt = Select((SelectItem(star=True),), (TableRef(stmt.name),))
    if isinstance(stmt, Select):
        return _run_select(tx, stmt)
    if isinstance(stmt, Insert):
        return _run_insert(tx, stmt)
    if isinstance(stmt, Update):
        return _run_update(tx, stmt)
    if isinstance(stmt, Delete):
        return _run_delete(tx, stmt)
    if isinstance(stmt, CreateTable):
        return _run_create_table(tx, stmt)
    if isinstance(stmt, CreateView):
        return _run_create_view(tx, stmt)
    if isinstance(stmt, CreateRole):
        tx = tx.stage(PRole(name=stmt.name))
        return Result([], None, 0, tx)
    if isinstance(stmt, CreateUser):
        tx = tx.stage(PUser(name=stmt.name))
        return Result([], None, 0, tx)
    if isinstance(stmt, Grant):
        return _run_grant(tx, stmt)
    if isinstance(stmt, DropStmt):
        return _run_drop(tx, stmt)
    if isinstance(stmt, AlterView):
        return _run_alter_view(tx, stmt)
    if isinstance(stmt, AlterTableAdd):
        return _run_alter_table_add(tx, stmt)
    raise StatementError(f"unsupported statement {type(stmt).__name__}")


def _run_select(tx: Transaction, sel: Select) -> Result:
    binder = Binder(tx)
    plan, names = binder.bind_select(sel, tx.role)
    tx = binder.tx
    plan = review(plan, tx)
    runner = Runner(tx)
    rows = runner.run(plan)
    tx = runner.finish()
    return Result(names, Rowset.build(plan.columns, rows), None, tx)


def bind_and_review(tx: Transaction, sel: Select):
    """Plan without executing (plan-shape tests, EXPLAIN-style tooling)."""
    binder = Binder(tx)
    plan, names = binder.bind_select(sel, tx.role)
    return review(plan, binder.tx), names, binder.tx


def _resolve_table(tx: Transaction, name: str):
    uid = tx.effective.resolve(NS_REL, name)
    if uid is None:
        raise NameError_(f"unknown table {name}")
    return tx.effective.obj(uid)


def _domain_uid_for(tx: Transaction, spec: TypeSpec):
    """Builtin domain, an existing parameterized one, or a fresh PDomain."""
    base = {"INT": uids.DOM_INTEGER, "CHAR": uids.DOM_CHAR,
            "BOOLEAN": uids.DOM_BOOLEAN, "DATE": uids.DOM_DATE,
            "NUMERIC": uids.DOM_NUMERIC}[spec.base]
    if not spec.precision and spec.scale is None:
        return tx, base
    for duid, obj in tx.effective.objects.items():
        if isinstance(obj, DomainObj) and obj.name == "" and obj.base == base \
                and obj.precision == spec.precision and obj.scale == spec.scale:
            return tx, duid
    tx = tx.stage(PDomain(name="", base=base, precision=spec.precision,
                          scale=spec.scale))
    return tx, tx.last_staged_uid()


def _run_create_table(tx: Transaction, stmt: CreateTable) -> Result:
    checks = tuple(c.check.to_sql() for c in stmt.constraints
                   if c.kind == "CHECK")
    tx = tx.stage(PTable(name=stmt.name, checks=checks))
    table_uid = tx.last_staged_uid()
    coluids: Dict[str, int] = {}
    domains: Dict[str, int] = {}
    for seq, col in enumerate(stmt.columns):
        tx, duid = _domain_uid_for(tx, col.typespec)
        tx = tx.stage(PColumn(table=table_uid, name=col.name, domain=duid,
                              seq=seq, notnull=col.notnull or col.primary_key,
                              check_source=col.check.to_sql()
                              if col.check is not None else ""))
        coluids[col.name] = tx.last_staged_uid()
        domains[col.name] = duid
    pk_cols: Tuple[str, ...] = ()
    for col in stmt.columns:
        if col.primary_key:
            pk_cols += (col.name,)
    for c in stmt.constraints:
        if c.kind == "PRIMARY":
            pk_cols += tuple(n for n in c.columns if n not in pk_cols)
    if pk_cols:
        tx = tx.stage(PIndex(table=table_uid, index_kind=IndexKind.PRIMARY,
                             columns=tuple(coluids[n] for n in pk_cols)))
    for col in stmt.columns:
        if col.unique:
            tx = tx.stage(PIndex(table=table_uid, index_kind=IndexKind.UNIQUE,
                                 columns=(coluids[col.name],)))
    for c in stmt.constraints:
        if c.kind == "UNIQUE":
            tx = tx.stage(PIndex(table=table_uid, index_kind=IndexKind.UNIQUE,
                                 columns=tuple(coluids[n] for n in c.columns)))
    for col in stmt.columns:
        if col.references is not None:
            tx = _stage_fk(tx, table_uid, (coluids[col.name],),
                           col.references)
    for c in stmt.constraints:
        if c.kind == "FOREIGN":
            tx = _stage_fk(tx, table_uid,
                           tuple(coluids[n] for n in c.columns), c.fk)
    return Result([], None, 0, tx)


def _stage_fk(tx: Transaction, table_uid: int, cols: Tuple[int, ...], fk):
    parent = _resolve_table(tx, fk.table)
    if not isinstance(parent, TableObj):
        raise StatementError(f"{fk.table} is not a table")
    snap = tx.effective
    if fk.columns:
        name_to_uid = {snap.obj(c).name: c for c in parent.columns}
        try:
            ref_cols = tuple(name_to_uid[n] for n in fk.columns)
        except KeyError as e:
            raise NameError_(f"no column {e.args[0]} in {fk.table}") from None
    else:
        pk = snap.primary_index(parent)
        if pk is None:
            raise StatementError(f"{fk.table} has no primary key to reference")
        ref_cols = pk.columns
    actions = {"CASCADE": Action.CASCADE, "RESTRICT": Action.RESTRICT,
               "SET_NULL": Action.SET_NULL}
    return tx.stage(PIndex(table=table_uid, index_kind=IndexKind.FOREIGN,
                           columns=cols, ref_table=parent.uid,
                           ref_columns=ref_cols,
                           update_action=actions[fk.on_update],
                           delete_action=actions[fk.on_delete]))


def _run_create_view(tx: Transaction, stmt: CreateView) -> Result:
    if stmt.get:
        return _run_create_restview(tx, stmt)
    if stmt.query is None:
        raise StatementError("view requires a query or GET")
    binder = Binder(tx)
    plan, names = binder.bind_select(stmt.query, tx.role)   # validates
    colnames = stmt.colnames or tuple(names)
    if len(colnames) != len(plan.columns):
        raise StatementError("view column list does not match the query")
    if stmt.colnames and any(i.star for i in stmt.query.items):
        raise StatementError("cannot rename the columns of a SELECT * view")
    if stmt.colnames:
        items = tuple(replace(it, alias=cn)
                      for it, cn in zip(stmt.query.items, colnames))
        source = replace(stmt.query, items=items).to_sql()
    else:
        source = stmt.query.to_sql()
    tx = tx.stage(PView(name=stmt.name, source=source))
    if stmt.metadata:
        tx = tx.stage(PMetadata(object=tx.last_staged_uid(),
                                words=stmt.metadata))
    return Result([], None, 0, tx)


def _run_create_restview(tx: Transaction, stmt: CreateView) -> Result:
    if not stmt.of_columns:
        raise StatementError("a GET view declares its columns with OF (...)")
    meta = dict(stmt.metadata)
    using_uid = None
    if stmt.using is not None:
        using = _resolve_table(tx, stmt.using)
        if not isinstance(using, TableObj):
            raise StatementError(f"{stmt.using} is not a table")
        if len(using.columns) < 1:
            raise StatementError("using-table needs at least a url column")
        snap = tx.effective
        last = snap.obj(using.columns[-1])
        from ..engine import _base_domain
        if _base_domain(snap, last.domain) != uids.DOM_CHAR:
            raise StatementError("using-table's last column must hold URLs")
        declared = {n for n, _ in stmt.of_columns}
        for cu in using.columns[:-1]:
            cname = snap.obj(cu).name
            if cname not in declared:
                raise StatementError(
                    f"using-table column {cname} is not a view column")
        using_uid = using.uid
    elif "URL" not in meta:
        raise StatementError("a single-contributor GET view needs a URL")
    cols = []
    for cname, spec in stmt.of_columns:
        tx, duid = _domain_uid_for(tx, spec)
        cols.append((cname, duid))
    tx = tx.stage(PRestView(name=stmt.name, columns=tuple(cols),
                            url=meta.get("URL", ""), using_table=using_uid,
                            metadata=stmt.metadata))
    return Result([], None, 0, tx)



def _run_insert(tx: Transaction, stmt: Insert) -> Result:
    target = _resolve_table(tx, stmt.table)
    if isinstance(target, RestViewObj):
        from ..restsvc.federation import stage_remote_insert
        return stage_remote_insert(tx, target, stmt)
    if not isinstance(target, TableObj):
        raise StatementError(f"{stmt.table} does not accept inserts")
    if not check_privilege(tx.effective, tx.user, tx.role, target.uid,
                           Priv.INSERT):
        raise AuthorizationError(f"no INSERT privilege on {stmt.table}")
    snap = tx.effective
    by_name = {snap.obj(c).name: snap.obj(c) for c in target.columns}
    if stmt.columns:
        for n in stmt.columns:
            if n not in by_name:
                raise NameError_(f"no column {n} in {stmt.table}")
        col_order = [by_name[n] for n in stmt.columns]
    else:
        col_order = [snap.obj(c) for c in target.columns]
    pk = snap.primary_index(target)
    autokey_col = None
    if pk is not None and len(pk.columns) == 1:
        from ..engine import _base_domain
        pk_col = snap.obj(pk.columns[0])
        if _base_domain(snap, pk_col.domain) == uids.DOM_INTEGER \
                and pk_col.name not in [c.name for c in col_order]:
            autokey_col = pk_col
    runner = Runner(tx)
    count = 0
    for row in stmt.rows:
        if len(row) != len(col_order):
            raise StatementError("value count does not match column count")
        fields = []
        for col, e in zip(col_order, row):
            v = runner.eval(_bind_const(e, runner), {})
            fields.append((col.uid, coerce_cell(runner.tx.effective,
                                                col.domain, v, col.name)))
        if autokey_col is not None:
            fields.append((autokey_col.uid,
                           next_autokey(runner.tx.effective, target)))
        runner.tx = runner.tx.stage(PRecord(table=target.uid,
                                            fields=tuple(fields)))
        count += 1
    tx = runner.finish()
    return Result([], None, count, tx)


def _bind_const(e: Expr, runner: Runner) -> Expr:
    """VALUES expressions: no table scope, but subqueries are allowed."""
    binder = Binder(runner.tx)
    bound = binder.bind_expr(e, (), runner.tx.role)
    runner.tx = binder.tx
    return bound


def _dml_rows(tx: Transaction, table_name: str, where):
    """Target rows for UPDATE/DELETE with read notes applied."""
    binder = Binder(tx)
    src = binder.from_source(table_name, None, tx.role)
    plan = src.plan
    if where is not None:
        pred = binder.bind_expr(where, ((src,),), tx.role)
        plan = Filter(plan.columns, plan, (pred,))
    tx = binder.tx
    plan = review(plan, tx)
    runner = Runner(tx)
    rows = runner.run(plan)
    return runner, src, plan, rows


def _run_update(tx: Transaction, stmt: Update) -> Result:
    target = _resolve_table(tx, stmt.table)
    if isinstance(target, RestViewObj):
        from ..restsvc.federation import stage_remote_update
        return stage_remote_update(tx, target, stmt)
    if not isinstance(target, TableObj):
        raise StatementError(f"{stmt.table} does not accept updates")
    if not check_privilege(tx.effective, tx.user, tx.role, target.uid,
                           Priv.UPDATE):
        raise AuthorizationError(f"no UPDATE privilege on {stmt.table}")
    binder = Binder(tx)
    src = binder.from_source(stmt.table, None, tx.role)
    scan: TableScan = src.plan
    plan = scan
    if stmt.where is not None:
        pred = binder.bind_expr(stmt.where, ((src,),), tx.role)
        plan = Filter(plan.columns, plan, (pred,))
    sets = []
    snap = tx.effective
    by_name = {snap.obj(c).name: snap.obj(c) for c in target.columns}
    for cname, e in stmt.assignments:
        if cname not in by_name:
            raise NameError_(f"no column {cname} in {stmt.table}")
        sets.append((by_name[cname], binder.bind_expr(e, ((src,),), tx.role)))
    tx = binder.tx
    plan = review(plan, tx)
    runner = Runner(tx)
    rows = runner.run(plan)
    for r in rows:
        fields = []
        for col, e in sets:
            v = runner.eval(e, r)
            fields.append((col.uid, coerce_cell(runner.tx.effective,
                                                col.domain, v, col.name)))
        row_uid = r[scan.rowid_uid]
        old = runner.tx.effective.table_data(target.uid).rows.get(row_uid)
        runner.tx = runner.tx.stage(PUpdate(table=target.uid, row=row_uid,
                                            prev=old.last_change,
                                            fields=tuple(fields)))
    tx = runner.finish()
    return Result([], None, len(rows), tx)


def _run_delete(tx: Transaction, stmt: Delete) -> Result:
    target = _resolve_table(tx, stmt.table)
    if isinstance(target, RestViewObj):
        from ..restsvc.federation import stage_remote_delete
        return stage_remote_delete(tx, target, stmt)
    if not isinstance(target, TableObj):
        raise StatementError(f"{stmt.table} does not accept deletes")
    if not check_privilege(tx.effective, tx.user, tx.role, target.uid,
                           Priv.DELETE):
        raise AuthorizationError(f"no DELETE privilege on {stmt.table}")
    runner, src, plan, rows = _dml_rows(tx, stmt.table, stmt.where)
    scan: TableScan = src.plan
    for r in rows:
        row_uid = r[scan.rowid_uid]
        old = runner.tx.effective.table_data(target.uid).rows.get(row_uid)
        runner.tx = runner.tx.stage(PDelete(table=target.uid, row=row_uid,
                                            prev=old.last_change))
    tx = runner.finish()
    return Result([], None, len(rows), tx)


def _run_grant(tx: Transaction, stmt: Grant) -> Result:
    snap = tx.effective
    priv_bits = {"SELECT": Priv.SELECT, "INSERT": Priv.INSERT,
                 "UPDATE": Priv.UPDATE, "DELETE": Priv.DELETE,
                 "OWNER": Priv.OWNER, "USAGE": Priv.USAGE}
    if stmt.role is not None:
        role_uid = snap.resolve(NS_ROLE, stmt.role)
        if role_uid is None:
            raise NameError_(f"unknown role {stmt.role}")
        bits = Priv.USAGE
        object_uid = role_uid
    else:
        object_uid = snap.resolve(NS_REL, stmt.object)
        if object_uid is None:
            object_uid = snap.resolve(NS_ROLE, stmt.object)
        if object_uid is None:
            raise NameError_(f"unknown object {stmt.object}")
        bits = 0
        for p in stmt.privileges:
            bits |= priv_bits[p]
    obj = snap.obj(object_uid)
    granter_ok = isinstance(tx.user, str) or snap.owner == tx.user \
        or getattr(obj, "owner", None) == tx.user \
        or getattr(obj, "definer_role", None) == tx.role
    if not granter_ok:
        raise AuthorizationError("only the owner or definer role may grant")
    count = 0
    for g in stmt.grantees:
        if g == "PUBLIC":
            grantee_uid = uids.PUBLIC_ROLE
            grantee_obj = snap.obj(grantee_uid)
        else:
            grantee_uid = tx.effective.resolve(NS_ROLE, g)
            if grantee_uid is None:
                grantee_uid = tx.effective.resolve(NS_USER, g)
            if grantee_uid is None:
                if bits & (Priv.OWNER | Priv.USAGE):
                    # users are created on their first grant
                    tx = tx.stage(PUser(name=g))
                    grantee_uid = tx.last_staged_uid()
                else:
                    raise NameError_(f"unknown role or user {g}")
            grantee_obj = tx.effective.obj(grantee_uid)
        is_role = isinstance(grantee_obj, RoleObj) or grantee_uid == uids.PUBLIC_ROLE
        if bits & (Priv.OWNER | Priv.USAGE) and is_role:
            raise StatementError(
                "ownership and role usage cannot be granted to roles")
        if not (bits & (Priv.OWNER | Priv.USAGE)) and not is_role:
            raise StatementError(
                "table privileges are granted to roles, not users")
        if bits & Priv.OWNER:
            mask = Priv.OWNER
        else:
            existing = tx.effective.privilege_mask(grantee_uid, object_uid)
            mask = existing & ~bits if stmt.revoke else existing | bits
        tx = tx.stage(PGrant(privileges=int(mask), object=object_uid,
                             grantee=grantee_uid))
        count += 1
    return Result([], None, count, tx)


def _owner_only(tx: Transaction, obj, what: str):
    snap = tx.effective
    if isinstance(tx.user, str) or snap.owner == tx.user \
            or getattr(obj, "owner", None) == tx.user:
        return
    raise AuthorizationError(f"only the owner may {what}")


def _run_drop(tx: Transaction, stmt: DropStmt) -> Result:
    snap = tx.effective
    ns = {"TABLE": NS_REL, "VIEW": NS_REL, "ROLE": NS_ROLE,
          "USER": NS_USER}[stmt.kind]
    uid = snap.resolve(ns, stmt.name)
    if uid is None:
        raise NameError_(f"unknown {stmt.kind.lower()} {stmt.name}")
    obj = snap.obj(uid)
    expected = {"TABLE": TableObj, "VIEW": (ViewObj, RestViewObj),
                "ROLE": RoleObj, "USER": UserObj}[stmt.kind]
    if not isinstance(obj, expected):
        raise StatementError(f"{stmt.name} is not a {stmt.kind.lower()}")
    _owner_only(tx, obj, f"drop {stmt.name}")
    tx = tx.stage(PDrop(object=uid))
    return Result([], None, 0, tx)


def _run_alter_view(tx: Transaction, stmt: AlterView) -> Result:
    snap = tx.effective
    uid = snap.resolve(NS_REL, stmt.name)
    obj = snap.obj(uid) if uid is not None else None
    if not isinstance(obj, ViewObj):
        raise NameError_(f"unknown view {stmt.name}")
    _owner_only(tx, obj, f"alter {stmt.name}")
    binder = Binder(tx)
    binder.bind_select(stmt.query, tx.role)   # validate
    tx = binder.tx
    tx = tx.stage(PAlter(object=uid, source=stmt.query.to_sql()))
    return Result([], None, 0, tx)


def _run_alter_table_add(tx: Transaction, stmt: AlterTableAdd) -> Result:
    target = _resolve_table(tx, stmt.table)
    if not isinstance(target, TableObj):
        raise StatementError(f"{stmt.table} is not a table")
    _owner_only(tx, target, f"alter {stmt.table}")
    col = stmt.column
    if col.primary_key:
        raise StatementError("cannot add a primary key column")
    tx, duid = _domain_uid_for(tx, col.typespec)
    if col.notnull and tx.effective.table_data(target.uid).rows.count:
        raise StatementError("cannot add NOT NULL column to a non-empty table")
    tx = tx.stage(PColumn(table=target.uid, name=col.name, domain=duid,
                          seq=len(target.columns), notnull=col.notnull,
                          check_source=col.check.to_sql()
                          if col.check is not None else ""))
    col_uid = tx.last_staged_uid()
    if col.unique:
        tx = tx.stage(PIndex(table=target.uid, index_kind=IndexKind.UNIQUE,
                             columns=(col_uid,)))
    if col.references is not None:
        tx = _stage_fk(tx, target.uid, (col_uid,), col.references)
    return Result([], None, 0, tx)
