"""Binding, instancing and RowSet review.

Binding resolves every identifier against the transaction's effective
schema; each table or view reference is *instanced*, receiving fresh
heap-range uids for itself and its columns, so the same table can appear
any number of times in one plan without collision.  Views are replaced by
instanced copies of their definitions, bound under the view's definer role
while the invoker needs only SELECT on the view itself.

Review simplifies the bound pipeline: filters split into conjuncts and sink
to the row source they mention, single-source equality filters over indexed
columns become index seeks, and filters/projections/aggregations that a
remote contributor can evaluate are absorbed into the RestRowSet so the
fetch transmits as little as possible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, List, Optional, Tuple

from ..engine import Transaction, check_privilege
from ..errors import AuthorizationError, NameError_, StatementError
from ..physical import IndexKind, Priv
from ..snapshot import NS_REL, RestViewObj, TableObj, ViewObj
from .ast import (AGGREGATES, BinOp, Case, Cast, ColRef, Expr, FuncCall,
                  IsNull, Lit, Select, Subquery, UnOp, contains_aggregate)
from .parser import parse_statement


# -- bound expression leaves --------------------------------------------------

@dataclass(frozen=True)
class BoundCol(Expr):
    uid: int            # heap instance uid
    name: str
    domain: Optional[int] = None

    def to_sql(self):
        from .ast import quote_ident
        return quote_ident(self.name)


@dataclass(frozen=True)
class BoundSubquery(Expr):
    plan: "Plan"

    def to_sql(self):
        return "(subquery)"


@dataclass(frozen=True)
class OutCol:
    uid: int
    name: str
    domain: Optional[int] = None


# -- plan nodes ---------------------------------------------------------------

@dataclass(frozen=True)
class Plan:
    columns: Tuple[OutCol, ...]


@dataclass(frozen=True)
class TableScan(Plan):
    table_uid: int = 0
    rowid_uid: int = 0
    col_map: Tuple[Tuple[int, int], ...] = ()   # (instance uid, base col uid)
    access_role: int = 0
    accessed: FrozenSet[int] = frozenset()      # base cols the plan touches


@dataclass(frozen=True)
class IndexSeek(Plan):
    scan: TableScan = None
    index_uid: int = 0
    key: Tuple[Expr, ...] = ()
    prefix: bool = False        # non-unique index: walk all prefix matches


@dataclass(frozen=True)
class Filter(Plan):
    src: Plan = None
    conjuncts: Tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Product(Plan):
    left: Plan = None
    right: Plan = None


@dataclass(frozen=True)
class Project(Plan):
    src: Plan = None
    exprs: Tuple[Expr, ...] = ()


@dataclass(frozen=True)
class OrderBy(Plan):
    src: Plan = None
    keys: Tuple[Tuple[Expr, bool], ...] = ()


@dataclass(frozen=True)
class Aggregate(Plan):
    src: Plan = None
    aggs: Tuple[Tuple[str, Optional[Expr]], ...] = ()   # (kind, arg)


@dataclass(frozen=True)
class ViewInstance(Plan):
    view_uid: int = 0
    src: Plan = None


@dataclass(frozen=True)
class RestRowSet(Plan):
    view_uid: int = 0
    url: str = ""                                   # single-contributor mode
    using_table: Optional[int] = None
    using_map: Tuple[Tuple[int, int], ...] = ()     # (inst uid, using col uid)
    remote_cols: Tuple[OutCol, ...] = ()
    url_col: int = 0                                # using-table url column
    remote_filters: Tuple[Expr, ...] = ()           # pushed, remote names only
    using_filters: Tuple[Expr, ...] = ()            # contributor elimination
    remote_select: Tuple[str, ...] = ()             # projection pushdown
    with_etags: bool = False
    credentials: Optional[Tuple[str, str]] = None
    access_role: int = 0


@dataclass(frozen=True)
class RestAggregate(Plan):
    rest: RestRowSet = None
    aggs: Tuple[Tuple[str, Optional[str]], ...] = ()    # (kind, remote col)


# -- binding -------------------------------------------------------------------

@dataclass
class _Source:
    alias: str
    plan: Plan
    by_name: Dict[str, OutCol]
    order: List[OutCol]


class Binder:
    def __init__(self, tx: Transaction):
        self.tx = tx

    def alloc(self) -> int:
        self.tx, uid = self.tx.alloc_heap()
        return uid

    # -- schema access ----------------------------------------------------

    def _resolve_rel(self, name: str):
        snap = self.tx.effective
        uid = snap.resolve(NS_REL, name)
        if uid is None:
            raise NameError_(f"unknown table or view {name}")
        return snap.obj(uid)

    def instance_table(self, table: TableObj, role: int) -> TableScan:
        snap = self.tx.effective
        cols, col_map = [], []
        rowid = self.alloc()
        for cu in table.columns:
            c = snap.obj(cu)
            inst = self.alloc()
            cols.append(OutCol(inst, c.name, c.domain))
            col_map.append((inst, cu))
        # conservative until review narrows it to the columns actually used
        return TableScan(tuple(cols), table.uid, rowid, tuple(col_map), role,
                         frozenset(table.columns))

    def instance_view(self, view: ViewObj, role: int) -> ViewInstance:
        stmt = parse_statement(view.source)
        if not isinstance(stmt, Select):
            raise StatementError(f"view {view.name} has a non-query source")
        inner, names = self.bind_select(stmt, view.definer_role, outer=())
        self.tx = self.tx.note_object_read(view.uid)
        if not check_privilege(self.tx.effective, self.tx.user, role,
                               view.uid, Priv.SELECT):
            raise AuthorizationError(f"no SELECT privilege on view {view.name}")
        renamed = tuple(OutCol(c.uid, n, c.domain)
                        for c, n in zip(inner.columns, names))
        return ViewInstance(renamed, view.uid, inner)

    def instance_restview(self, view: RestViewObj, role: int) -> RestRowSet:
        snap = self.tx.effective
        self.tx = self.tx.note_object_read(view.uid)
        if not check_privilege(snap, self.tx.user, role, view.uid, Priv.SELECT):
            raise AuthorizationError(f"no SELECT privilege on view {view.name}")
        using_names = {}
        url_col = 0
        using_uid = view.using_table
        if using_uid is not None:
            ut = snap.obj(using_uid)
            if not isinstance(ut, TableObj):
                raise StatementError(f"using-table of {view.name} is gone")
            *copy_cols, last = ut.columns
            url_col = last
            using_names = {snap.obj(cu).name: cu for cu in copy_cols}
        cols, using_map, remote = [], [], []
        for vc in view.columns:
            inst = self.alloc()
            out = OutCol(inst, vc.name, vc.domain)
            cols.append(out)
            if vc.name in using_names:
                using_map.append((inst, using_names[vc.name]))
            else:
                remote.append(out)
        creds = None
        u, pw = view.meta("USER"), view.meta("PASSWORD")
        if u:
            creds = (u, pw or "")
        return RestRowSet(tuple(cols), view.uid, view.url, using_uid,
                          tuple(using_map), tuple(remote), url_col,
                          remote_select=tuple(c.name for c in remote),
                          with_etags=view.meta("ETAG") is not None,
                          credentials=creds, access_role=view.definer_role)

    def from_source(self, name: str, alias: Optional[str], role: int) -> _Source:
        obj = self._resolve_rel(name)
        if isinstance(obj, TableObj):
            if not check_privilege(self.tx.effective, self.tx.user, role,
                                   obj.uid, Priv.SELECT):
                raise AuthorizationError(f"no SELECT privilege on {name}")
            plan = self.instance_table(obj, role)
        elif isinstance(obj, ViewObj):
            plan = self.instance_view(obj, role)
        elif isinstance(obj, RestViewObj):
            plan = self.instance_restview(obj, role)
        else:
            raise NameError_(f"{name} is not a table or view")
        order = list(plan.columns)
        return _Source(alias or name, plan,
                       {c.name: c for c in plan.columns}, order)

    # -- expression binding -------------------------------------------------

    def _lookup_col(self, ref: ColRef, scopes) -> BoundCol:
        if len(ref.parts) == 2:
            qual, name = ref.parts
            for scope in scopes:
                for src in scope:
                    if src.alias == qual:
                        if name not in src.by_name:
                            raise NameError_(f"no column {name} in {qual}")
                        c = src.by_name[name]
                        return BoundCol(c.uid, c.name, c.domain)
            raise NameError_(f"unknown alias {qual}")
        name = ref.parts[0]
        for scope in scopes:
            hits = [src.by_name[name] for src in scope if name in src.by_name]
            if len(hits) > 1:
                raise NameError_(f"ambiguous column {name}")
            if hits:
                c = hits[0]
                return BoundCol(c.uid, c.name, c.domain)
        raise NameError_(f"unknown column {name}")

    def bind_expr(self, e: Expr, scopes, role: int) -> Expr:
        if isinstance(e, Lit):
            return e
        if isinstance(e, ColRef):
            return self._lookup_col(e, scopes)
        if isinstance(e, BinOp):
            return BinOp(e.op, self.bind_expr(e.left, scopes, role),
                         self.bind_expr(e.right, scopes, role))
        if isinstance(e, UnOp):
            return UnOp(e.op, self.bind_expr(e.operand, scopes, role))
        if isinstance(e, IsNull):
            return IsNull(self.bind_expr(e.operand, scopes, role), e.negated)
        if isinstance(e, Case):
            whens = tuple((self.bind_expr(c, scopes, role),
                           self.bind_expr(r, scopes, role))
                          for c, r in e.whens)
            other = self.bind_expr(e.otherwise, scopes, role) \
                if e.otherwise is not None else None
            return Case(whens, other)
        if isinstance(e, Cast):
            return Cast(self.bind_expr(e.operand, scopes, role), e.typespec)
        if isinstance(e, FuncCall):
            if e.star:
                return e
            return FuncCall(e.name, self.bind_expr(e.arg, scopes, role))
        if isinstance(e, Subquery):
            plan, _ = self.bind_select(e.select, role, outer=scopes)
            if len(plan.columns) != 1:
                raise StatementError("scalar subquery must have one column")
            return BoundSubquery(plan)
        raise StatementError(f"unbindable expression {e!r}")

    # -- SELECT ---------------------------------------------------------------

    def bind_select(self, sel: Select, role: int, outer=()) -> Tuple[Plan, List[str]]:
        sources = [self.from_source(f.name, f.alias, role) for f in sel.froms]
        scopes = (sources,) + tuple(outer)
        plan: Optional[Plan] = None
        for src in sources:
            plan = src.plan if plan is None else Product(
                plan.columns + src.plan.columns, plan, src.plan)
        # expand items
        items: List[Tuple[Optional[str], Expr]] = []
        for item in sel.items:
            if item.star:
                if not sources:
                    raise StatementError("* requires a FROM clause")
                for src in sources:
                    for c in src.order:
                        items.append((c.name, BoundCol(c.uid, c.name, c.domain)))
            else:
                bound = self.bind_expr(item.expr, scopes, role)
                name = item.alias
                if name is None:
                    name = item.expr.parts[-1] \
                        if isinstance(item.expr, ColRef) else None
                items.append((name, bound))
        names = [n if n is not None else f"COL{i + 1}"
                 for i, (n, _) in enumerate(items)]
        if sel.where is not None:
            if contains_aggregate(sel.where):
                raise StatementError("aggregates are not allowed in WHERE")
            pred = self.bind_expr(sel.where, scopes, role)
            if plan is None:
                raise StatementError("WHERE requires a FROM clause")
            plan = Filter(plan.columns, plan, (pred,))
        has_agg = any(contains_aggregate(e) for _, e in items)
        if has_agg:
            if sel.order:
                raise StatementError("ORDER BY with aggregates is not supported")
            aggs: List[Tuple[str, Optional[Expr]]] = []
            rewritten = []
            for name, e in items:
                rewritten.append(self._extract_aggs(e, aggs))
            agg_cols = tuple(OutCol(a[2], f"AGG{i}", None)
                             for i, a in enumerate(aggs))
            if plan is None:
                raise StatementError("aggregates require a FROM clause")
            plan = Aggregate(agg_cols, plan,
                             tuple((k, arg) for k, arg, _ in aggs))
            out_cols = tuple(OutCol(self.alloc(), n, None) for n in names)
            return Project(out_cols, plan, tuple(rewritten)), names
        if sel.order:
            keys = []
            for e, asc in sel.order:
                key = self._order_key(e, items, scopes, role)
                keys.append((key, asc))
            plan = OrderBy(plan.columns, plan, tuple(keys))
        out_cols = tuple(OutCol(self.alloc(), n, _expr_domain(e))
                         for n, (_, e) in zip(names, items))
        if plan is None:
            # FROM-less select: single synthetic row
            return Project(out_cols, None, tuple(e for _, e in items)), names
        return Project(out_cols, plan, tuple(e for _, e in items)), names

    def _order_key(self, e: Expr, items, scopes, role: int) -> Expr:
        if isinstance(e, ColRef) and len(e.parts) == 1:
            for name, bound in items:
                if name == e.parts[0]:
                    return bound
        return self.bind_expr(e, scopes, role)

    def _extract_aggs(self, e: Expr, aggs: list) -> Expr:
        """Replace aggregate calls with references to aggregate outputs."""
        if isinstance(e, FuncCall) and e.name in AGGREGATES:
            uid = self.alloc()
            aggs.append((e.name, e.arg, uid))
            return BoundCol(uid, f"AGG{len(aggs) - 1}")
        if isinstance(e, BinOp):
            return BinOp(e.op, self._extract_aggs(e.left, aggs),
                         self._extract_aggs(e.right, aggs))
        if isinstance(e, UnOp):
            return UnOp(e.op, self._extract_aggs(e.operand, aggs))
        if isinstance(e, IsNull):
            return IsNull(self._extract_aggs(e.operand, aggs), e.negated)
        if isinstance(e, Cast):
            return Cast(self._extract_aggs(e.operand, aggs), e.typespec)
        if isinstance(e, Case):
            whens = tuple((self._extract_aggs(c, aggs),
                           self._extract_aggs(r, aggs)) for c, r in e.whens)
            other = self._extract_aggs(e.otherwise, aggs) \
                if e.otherwise is not None else None
            return Case(whens, other)
        return e


def _expr_domain(e: Expr) -> Optional[int]:
    if isinstance(e, BoundCol):
        return e.domain
    return None


def bind_select(sel: Select, tx: Transaction) -> Tuple[Plan, Transaction]:
    b = Binder(tx)
    plan, _ = b.bind_select(sel, tx.role)
    return plan, b.tx


# -- review ---------------------------------------------------------------------

def expr_uids(e: Expr) -> FrozenSet[int]:
    out = set()

    def walk(x):
        if isinstance(x, BoundCol):
            out.add(x.uid)
        elif isinstance(x, BinOp):
            walk(x.left)
            walk(x.right)
        elif isinstance(x, (UnOp, IsNull)):
            walk(x.operand)
        elif isinstance(x, Cast):
            walk(x.operand)
        elif isinstance(x, Case):
            for c, r in x.whens:
                walk(c)
                walk(r)
            if x.otherwise is not None:
                walk(x.otherwise)
        elif isinstance(x, BoundSubquery):
            out.update(plan_free_uids(x.plan))
        elif isinstance(x, FuncCall) and x.arg is not None:
            walk(x.arg)

    walk(e)
    return frozenset(out)


def plan_own_uids(p: Plan) -> FrozenSet[int]:
    own = {c.uid for c in p.columns}
    if isinstance(p, TableScan):
        own.add(p.rowid_uid)
    for child in _children(p):
        own |= plan_own_uids(child)
    return frozenset(own)


def plan_free_uids(p: Plan) -> FrozenSet[int]:
    """Instance uids a plan references but does not produce (correlation)."""
    used = set()
    for e in _plan_exprs(p):
        used |= expr_uids(e)
    for child in _children(p):
        used |= plan_free_uids(child)
    return frozenset(used) - plan_own_uids(p)


def _children(p: Plan):
    if isinstance(p, (Filter, Project, OrderBy, Aggregate, ViewInstance)):
        return (p.src,) if p.src is not None else ()
    if isinstance(p, Product):
        return (p.left, p.right)
    if isinstance(p, IndexSeek):
        return (p.scan,)
    if isinstance(p, RestAggregate):
        return (p.rest,)
    return ()


def _plan_exprs(p: Plan):
    if isinstance(p, Filter):
        return p.conjuncts
    if isinstance(p, Project):
        return p.exprs
    if isinstance(p, OrderBy):
        return tuple(k for k, _ in p.keys)
    if isinstance(p, Aggregate):
        return tuple(a for _, a in p.aggs if a is not None)
    if isinstance(p, IndexSeek):
        return p.key
    if isinstance(p, RestRowSet):
        return p.remote_filters + p.using_filters
    return ()


def _split_conjuncts(e: Expr) -> List[Expr]:
    if isinstance(e, BinOp) and e.op == "AND":
        return _split_conjuncts(e.left) + _split_conjuncts(e.right)
    return [e]


def _substitute(e: Expr, mapping: Dict[int, Expr]) -> Expr:
    if isinstance(e, BoundCol):
        return mapping.get(e.uid, e)
    if isinstance(e, BinOp):
        return BinOp(e.op, _substitute(e.left, mapping),
                     _substitute(e.right, mapping))
    if isinstance(e, UnOp):
        return UnOp(e.op, _substitute(e.operand, mapping))
    if isinstance(e, IsNull):
        return IsNull(_substitute(e.operand, mapping), e.negated)
    if isinstance(e, Cast):
        return Cast(_substitute(e.operand, mapping), e.typespec)
    if isinstance(e, Case):
        whens = tuple((_substitute(c, mapping), _substitute(r, mapping))
                      for c, r in e.whens)
        other = _substitute(e.otherwise, mapping) \
            if e.otherwise is not None else None
        return Case(whens, other)
    if isinstance(e, FuncCall) and e.arg is not None:
        return FuncCall(e.name, _substitute(e.arg, mapping), e.star)
    return e


def review_plan(plan: Plan, tx: Transaction) -> Plan:
    """Simplify: sink filters, convert to index seeks, absorb remote work."""
    p = _push_filters(plan)
    p = _absorb_rest(p, tx)
    p = _note_accessed(p)
    return p


def _push_filters(p: Plan) -> Plan:
    if isinstance(p, Filter):
        src = _push_filters(p.src)
        conjuncts: List[Expr] = []
        for c in p.conjuncts:
            conjuncts.extend(_split_conjuncts(c))
        # combine with a filter directly below
        if isinstance(src, Filter):
            conjuncts = list(src.conjuncts) + conjuncts
            src = src.src
        if isinstance(src, Product):
            left_uids = plan_own_uids(src.left)
            right_uids = plan_own_uids(src.right)
            left_c, right_c, keep = [], [], []
            for c in conjuncts:
                u = expr_uids(c)
                if u and u <= left_uids:
                    left_c.append(c)
                elif u and u <= right_uids:
                    right_c.append(c)
                else:
                    keep.append(c)
            left = _push_filters(Filter(src.left.columns, src.left,
                                        tuple(left_c))) if left_c else src.left
            right = _push_filters(Filter(src.right.columns, src.right,
                                         tuple(right_c))) if right_c else src.right
            src = Product(p.columns, left, right)
            conjuncts = keep
        if isinstance(src, ViewInstance):
            # the instance shares uids with its inner plan: sink wholesale
            inner = _push_filters(Filter(src.src.columns, src.src,
                                         tuple(conjuncts)))
            return ViewInstance(src.columns, src.view_uid, inner)
        if isinstance(src, Project) and src.src is not None:
            mapping = {out.uid: ex for out, ex in zip(src.columns, src.exprs)
                       if isinstance(ex, BoundCol)}
            down, keep = [], []
            for c in conjuncts:
                u = expr_uids(c)
                if u and u <= set(mapping):
                    down.append(_substitute(c, mapping))
                else:
                    keep.append(c)
            if down:
                inner = _push_filters(Filter(src.src.columns, src.src,
                                             tuple(down)))
                src = Project(src.columns, inner, src.exprs)
            conjuncts = keep
        if isinstance(src, TableScan):
            seek, rest = _try_seek(src, conjuncts)
            if seek is not None:
                return Filter(p.columns, seek, tuple(rest)) if rest else seek
        if not conjuncts:
            return src
        return Filter(p.columns, src, tuple(conjuncts))
    if isinstance(p, Product):
        return Product(p.columns, _push_filters(p.left), _push_filters(p.right))
    if isinstance(p, Project):
        return Project(p.columns, _push_filters(p.src) if p.src else None,
                       p.exprs)
    if isinstance(p, OrderBy):
        return OrderBy(p.columns, _push_filters(p.src), p.keys)
    if isinstance(p, Aggregate):
        return Aggregate(p.columns, _push_filters(p.src), p.aggs)
    if isinstance(p, ViewInstance):
        return ViewInstance(p.columns, p.view_uid, _push_filters(p.src))
    return p


def _try_seek(scan: TableScan, conjuncts: List[Expr]):
    """Equality conjuncts covering an index's columns become a seek."""
    inst_of = {base: inst for inst, base in scan.col_map}
    own = {inst for inst, _ in scan.col_map} | {scan.rowid_uid}
    eqs: Dict[int, Expr] = {}
    used: Dict[int, Expr] = {}
    for c in conjuncts:
        if isinstance(c, BinOp) and c.op == "=":
            for col_side, val_side in ((c.left, c.right), (c.right, c.left)):
                if isinstance(col_side, BoundCol) and col_side.uid in own \
                        and not (expr_uids(val_side) & own):
                    base = next((b for i, b in scan.col_map
                                 if i == col_side.uid), None)
                    if base is not None and base not in eqs:
                        eqs[base] = val_side
                        used[base] = c
                    break
    if not eqs:
        return None, conjuncts
    # pick an index fully covered by equalities (unique first)
    from ..snapshot import IndexObj
    best: Optional[IndexObj] = None
    table = _SCHEMA_LOOKUP(scan.table_uid)
    if table is None:
        return None, conjuncts
    snap, tobj = table
    candidates = [snap.obj(i) for i in tobj.indexes]
    for ix in sorted((i for i in candidates if i is not None),
                     key=lambda i: (i.index_kind != IndexKind.PRIMARY,
                                    i.index_kind == IndexKind.FOREIGN, i.uid)):
        if all(c in eqs for c in ix.columns):
            best = ix
            break
    if best is None:
        return None, conjuncts
    key = tuple(eqs[c] for c in best.columns)
    consumed = {id(used[c]) for c in best.columns}
    rest = [c for c in conjuncts if id(c) not in consumed]
    seek = IndexSeek(scan.columns, scan, best.uid, key,
                     prefix=best.index_kind == IndexKind.FOREIGN)
    return seek, rest


# Review needs schema access for seek conversion but plans must stay
# structurally comparable; the current transaction is installed here for
# the duration of a review call.
_SCHEMA = None


def _SCHEMA_LOOKUP(table_uid):
    if _SCHEMA is None:
        return None
    t = _SCHEMA.obj(table_uid)
    if isinstance(t, TableObj):
        return _SCHEMA, t
    return None


def _absorb_rest(p: Plan, tx: Transaction) -> Plan:
    if isinstance(p, Filter) and isinstance(p.src, RestRowSet):
        rest = p.src
        remote_names = {c.uid: c.name for c in rest.remote_cols}
        using_uids = {inst for inst, _ in rest.using_map}
        remote_uids = set(remote_names)
        remote_f = list(rest.remote_filters)
        using_f = list(rest.using_filters)
        keep = []
        for c in p.conjuncts:
            u = expr_uids(c)
            if u and u <= remote_uids and not _has_subquery(c):
                remote_f.append(c)
            elif u and u <= using_uids and not _has_subquery(c):
                using_f.append(c)
            else:
                keep.append(c)
        rest = replace(rest, remote_filters=tuple(remote_f),
                       using_filters=tuple(using_f))
        if keep:
            return Filter(p.columns, rest, tuple(keep))
        return rest
    if isinstance(p, Aggregate):
        src = _absorb_rest(p.src, tx)
        if isinstance(src, RestRowSet):
            pushed = []
            ok = True
            remote_uids = {c.uid for c in src.remote_cols}
            names = {c.uid: c.name for c in src.remote_cols}
            for kind, arg in p.aggs:
                if arg is None:
                    pushed.append((kind, None))
                elif isinstance(arg, BoundCol) and arg.uid in remote_uids:
                    pushed.append((kind, names[arg.uid]))
                else:
                    ok = False
                    break
            if ok:
                needed = tuple(sorted({n for _, n in pushed if n is not None}))
                src = replace(src, remote_select=needed)
                return RestAggregate(p.columns, src, tuple(pushed))
        return Aggregate(p.columns, src, p.aggs)
    if isinstance(p, Filter):
        return Filter(p.columns, _absorb_rest(p.src, tx), p.conjuncts)
    if isinstance(p, Product):
        return Product(p.columns, _absorb_rest(p.left, tx),
                       _absorb_rest(p.right, tx))
    if isinstance(p, Project):
        src = _absorb_rest(p.src, tx) if p.src is not None else None
        if isinstance(src, RestRowSet):
            src = _project_pushdown(src, p.exprs)
        return Project(p.columns, src, p.exprs)
    if isinstance(p, OrderBy):
        return OrderBy(p.columns, _absorb_rest(p.src, tx), p.keys)
    if isinstance(p, ViewInstance):
        return ViewInstance(p.columns, p.view_uid, _absorb_rest(p.src, tx))
    if isinstance(p, IndexSeek):
        return p
    return p


def _project_pushdown(rest: RestRowSet, exprs) -> RestRowSet:
    """Request only the remote columns the enclosing plan evaluates."""
    needed_uids = set()
    for e in exprs:
        needed_uids |= expr_uids(e)
    for e in rest.remote_filters:
        needed_uids |= expr_uids(e)
    names = tuple(sorted(c.name for c in rest.remote_cols
                         if c.uid in needed_uids))
    return replace(rest, remote_select=names)


def _has_subquery(e: Expr) -> bool:
    return _contains(e, BoundSubquery)


def _contains(e: Expr, cls) -> bool:
    if isinstance(e, cls):
        return True
    if isinstance(e, BinOp):
        return _contains(e.left, cls) or _contains(e.right, cls)
    if isinstance(e, (UnOp, IsNull)):
        return _contains(e.operand, cls)
    if isinstance(e, Cast):
        return _contains(e.operand, cls)
    if isinstance(e, Case):
        for c, r in e.whens:
            if _contains(c, cls) or _contains(r, cls):
                return True
        return e.otherwise is not None and _contains(e.otherwise, cls)
    if isinstance(e, FuncCall) and e.arg is not None:
        return _contains(e.arg, cls)
    return False


def _rewrite_exprs(e: Expr, fn) -> Expr:
    if isinstance(e, BoundSubquery):
        return fn(e)
    if isinstance(e, BinOp):
        return BinOp(e.op, _rewrite_exprs(e.left, fn),
                     _rewrite_exprs(e.right, fn))
    if isinstance(e, UnOp):
        return UnOp(e.op, _rewrite_exprs(e.operand, fn))
    if isinstance(e, IsNull):
        return IsNull(_rewrite_exprs(e.operand, fn), e.negated)
    if isinstance(e, Cast):
        return Cast(_rewrite_exprs(e.operand, fn), e.typespec)
    if isinstance(e, Case):
        whens = tuple((_rewrite_exprs(c, fn), _rewrite_exprs(r, fn))
                      for c, r in e.whens)
        other = _rewrite_exprs(e.otherwise, fn) \
            if e.otherwise is not None else None
        return Case(whens, other)
    if isinstance(e, FuncCall) and e.arg is not None:
        return FuncCall(e.name, _rewrite_exprs(e.arg, fn), e.star)
    return e


def _note_accessed(p: Plan) -> Plan:
    """Record, per scan, which base columns the plan evaluates.

    Subquery plans nested in expressions are narrowed the same way; a
    correlated reference keeps the outer column in the outer scan's set.
    """
    referenced = set()

    def collect(node):
        for e in _plan_exprs(node):
            referenced.update(expr_uids(e))
        for child in _children(node):
            collect(child)

    collect(p)

    def fix_sub(e):
        return BoundSubquery(_note_accessed(e.plan))

    def fix(e):
        return _rewrite_exprs(e, fix_sub)

    def rewrite(node):
        if isinstance(node, TableScan):
            accessed = frozenset(base for inst, base in node.col_map
                                 if inst in referenced)
            return replace(node, accessed=accessed)
        if isinstance(node, IndexSeek):
            return replace(node, scan=rewrite(node.scan),
                           key=tuple(fix(k) for k in node.key))
        if isinstance(node, Filter):
            return replace(node, src=rewrite(node.src),
                           conjuncts=tuple(fix(c) for c in node.conjuncts))
        if isinstance(node, Product):
            return replace(node, left=rewrite(node.left),
                           right=rewrite(node.right))
        if isinstance(node, Project):
            return replace(node, src=rewrite(node.src)
                           if node.src is not None else None,
                           exprs=tuple(fix(e) for e in node.exprs))
        if isinstance(node, OrderBy):
            return replace(node, src=rewrite(node.src),
                           keys=tuple((fix(k), asc) for k, asc in node.keys))
        if isinstance(node, Aggregate):
            return replace(node, src=rewrite(node.src),
                           aggs=tuple((k, fix(a) if a is not None else None)
                                      for k, a in node.aggs))
        if isinstance(node, ViewInstance):
            return replace(node, src=rewrite(node.src))
        if isinstance(node, RestAggregate):
            return replace(node, rest=rewrite(node.rest))
        return node

    return rewrite(p)


class _ReviewContext:
    """Installs the reviewing transaction's schema for seek conversion."""

    def __init__(self, tx: Transaction):
        self.snap = tx.effective

    def __enter__(self):
        global _SCHEMA
        self._saved = _SCHEMA
        _SCHEMA = self.snap
        return self

    def __exit__(self, *exc):
        global _SCHEMA
        _SCHEMA = self._saved


def review(plan: Plan, tx: Transaction) -> Plan:
    with _ReviewContext(tx):
        return review_plan(plan, tx)
