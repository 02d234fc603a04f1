"""Immutable database snapshots and the physical installer.

A snapshot maps uids to schema objects and table data, all held in PTrees,
so "copying the database" for a new transaction is copying one reference.
Installing a physical returns a new snapshot sharing everything untouched.

Rows are stored per table in a PTree keyed by the row's defining position;
index contents are derived state (rebuilt the same way on replay) and are
excluded from the state hash.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Optional, Tuple

from . import uids
from .errors import LogCorruptionError
from .pbtree import PTree
from .physical import (Action, IndexKind, PAlter, PColumn, PDelete, PDomain,
                       PDrop, PGrant, PIndex, PMetadata, PRecord, PRestView,
                       PRole, PTable, PTxHeader, PUpdate, PUser, PView,
                       Physical, Priv, _cell)

# Name namespaces: tables/views share one space, per SQL.
NS_REL = 0
NS_ROLE = 1
NS_USER = 2
NS_DOMAIN = 3


@dataclass(frozen=True)
class TableObj:
    uid: int
    name: str
    owner: int
    definer_role: int
    columns: Tuple[int, ...] = ()
    indexes: Tuple[int, ...] = ()
    checks: Tuple[str, ...] = ()
    metadata: Tuple[Tuple[str, str], ...] = ()
    schema_key: int = 0


@dataclass(frozen=True)
class ColumnObj:
    uid: int
    table: int
    name: str
    domain: int
    seq: int
    notnull: bool = False
    check_source: str = ""
    metadata: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class IndexObj:
    uid: int
    table: int
    index_kind: IndexKind
    columns: Tuple[int, ...]
    ref_table: Optional[int] = None
    ref_columns: Tuple[int, ...] = ()
    update_action: Action = Action.RESTRICT
    delete_action: Action = Action.CASCADE
    metadata: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ViewObj:
    uid: int
    name: str
    source: str
    owner: int
    definer_role: int
    metadata: Tuple[Tuple[str, str], ...] = ()
    schema_key: int = 0


@dataclass(frozen=True)
class RestViewCol:
    uid: int           # compiled-range uid, assigned at install
    name: str
    domain: int


@dataclass(frozen=True)
class RestViewObj:
    uid: int
    name: str
    columns: Tuple[RestViewCol, ...]
    url: str
    using_table: Optional[int]
    owner: int
    definer_role: int
    metadata: Tuple[Tuple[str, str], ...] = ()
    schema_key: int = 0

    def meta(self, word: str) -> Optional[str]:
        for w, v in self.metadata:
            if w == word:
                return v
        return None


@dataclass(frozen=True)
class RoleObj:
    uid: int
    name: str
    owner: int = 0
    metadata: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class UserObj:
    uid: int
    name: str
    metadata: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class DomainObj:
    uid: int
    name: str
    base: int
    precision: int = 0
    scale: Optional[int] = None
    metadata: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True, eq=False)
class Row:
    cells: dict          # col uid -> cell; treated as immutable
    last_change: int


@dataclass(frozen=True)
class TableData:
    rows: PTree          # row uid -> Row
    indexes: PTree       # index uid -> PTree key -> row uid


def _empty_objects() -> PTree:
    t = PTree.empty()
    for uid, name in uids.BUILTIN_DOMAINS.items():
        t = t.add(uid, DomainObj(uid, name, uid))
    t = t.add(uids.PUBLIC_ROLE, RoleObj(uids.PUBLIC_ROLE, "PUBLIC"))
    t = t.add(uids.SCHEMA_ROLE, RoleObj(uids.SCHEMA_ROLE, "$SCHEMA"))
    return t


class DatabaseSnapshot:
    """One immutable version of a database's entire state."""

    __slots__ = ("name", "objects", "names", "tables_data", "grants",
                 "log_watermark", "next_compiled", "owner")

    def __init__(self, name, objects, names, tables_data, grants,
                 log_watermark, next_compiled, owner):
        self.name = name
        self.objects = objects
        self.names = names
        self.tables_data = tables_data
        self.grants = grants
        self.log_watermark = log_watermark
        self.next_compiled = next_compiled
        self.owner = owner

    @classmethod
    def empty(cls, name: str) -> "DatabaseSnapshot":
        names = PTree.empty().add((NS_ROLE, "PUBLIC"), uids.PUBLIC_ROLE)
        names = names.add((NS_ROLE, "$SCHEMA"), uids.SCHEMA_ROLE)
        return cls(name, _empty_objects(), names, PTree.empty(), PTree.empty(),
                   0, uids.COMPILED_BASE, None)

    def _with(self, **kw) -> "DatabaseSnapshot":
        state = {s: getattr(self, s) for s in self.__slots__}
        state.update(kw)
        return DatabaseSnapshot(**state)

    # -- lookup ----------------------------------------------------------

    def obj(self, uid: int):
        return self.objects.get(uid)

    def need(self, uid: int):
        o = self.objects.get(uid)
        if o is None:
            raise LogCorruptionError(f"reference to unknown uid {uid}", offset=uid)
        return o

    def resolve(self, namespace: int, name: str) -> Optional[int]:
        return self.names.get((namespace, name))

    def table_data(self, table_uid: int) -> TableData:
        td = self.tables_data.get(table_uid)
        return td if td is not None else TableData(PTree.empty(), PTree.empty())

    def user_by_name(self, name: str) -> Optional[UserObj]:
        uid = self.resolve(NS_USER, name)
        return self.objects.get(uid) if uid is not None else None

    def grants_for(self, grantee: int) -> PTree:
        g = self.grants.get(grantee)
        return g if g is not None else PTree.empty()

    def privilege_mask(self, grantee: int, object_uid: int) -> int:
        return self.grants_for(grantee).get(object_uid, 0)

    def table_indexes(self, table: TableObj):
        return [self.objects.get(i) for i in table.indexes]

    def primary_index(self, table: TableObj) -> Optional[IndexObj]:
        for i in table.indexes:
            ix = self.objects.get(i)
            if ix is not None and ix.index_kind == IndexKind.PRIMARY:
                return ix
        return None

    def referencing_indexes(self, table_uid: int):
        """Foreign-key indexes in other tables that point at this table."""
        out = []
        for _, o in self.objects.items():
            if isinstance(o, IndexObj) and o.index_kind == IndexKind.FOREIGN \
                    and o.ref_table == table_uid:
                out.append(o)
        return out

    # -- install ---------------------------------------------------------

    def install_header(self, h: PTxHeader):
        """Apply a transaction header; may define a first-seen user.

        Returns (snapshot, user_uid) so the caller can attribute the rest
        of the commit's physicals.
        """
        if isinstance(h.user, str):
            u = UserObj(h.defining_pos, h.user)
            snap = self._with(
                objects=self.objects.add(u.uid, u),
                names=self.names.add((NS_USER, h.user), u.uid),
                owner=self.owner if self.owner is not None else u.uid)
            return snap, u.uid
        return self, h.user

    def install(self, p: Physical, user: int, role: int) -> "DatabaseSnapshot":
        pos = p.defining_pos
        if isinstance(p, PTable):
            t = TableObj(pos, p.name, user, role, checks=p.checks, schema_key=pos)
            return self._with(
                objects=self.objects.add(pos, t),
                names=self.names.add((NS_REL, p.name), pos),
                tables_data=self.tables_data.add(
                    pos, TableData(PTree.empty(), PTree.empty())))
        if isinstance(p, PColumn):
            table = self.need(p.table)
            col = ColumnObj(pos, p.table, p.name, p.domain, p.seq,
                            p.notnull, p.check_source)
            table2 = replace(table, columns=table.columns + (pos,),
                             schema_key=pos)
            objs = self.objects.add(pos, col).add(table.uid, table2)
            snap = self._with(objects=objs)
            # Existing rows gain the column as NULL implicitly (reads of a
            # missing cell yield None); nothing to rewrite.
            return snap
        if isinstance(p, PRecord):
            return self._install_record(p)
        if isinstance(p, PUpdate):
            return self._install_update(p)
        if isinstance(p, PDelete):
            return self._install_delete(p)
        if isinstance(p, PIndex):
            return self._install_index(p)
        if isinstance(p, PView):
            v = ViewObj(pos, p.name, p.source, user, role, schema_key=pos)
            return self._with(objects=self.objects.add(pos, v),
                              names=self.names.add((NS_REL, p.name), pos))
        if isinstance(p, PRestView):
            nxt = self.next_compiled
            cols = []
            for cname, dom in p.columns:
                cols.append(RestViewCol(nxt, cname, dom))
                nxt += 1
            v = RestViewObj(pos, p.name, tuple(cols), p.url, p.using_table,
                            user, role, p.metadata, schema_key=pos)
            return self._with(objects=self.objects.add(pos, v),
                              names=self.names.add((NS_REL, p.name), pos),
                              next_compiled=nxt)
        if isinstance(p, PRole):
            r = RoleObj(pos, p.name, owner=user)
            return self._with(objects=self.objects.add(pos, r),
                              names=self.names.add((NS_ROLE, p.name), pos))
        if isinstance(p, PUser):
            u = UserObj(pos, p.name)
            snap = self._with(objects=self.objects.add(pos, u),
                              names=self.names.add((NS_USER, p.name), pos),
                              owner=self.owner if self.owner is not None else pos)
            return snap
        if isinstance(p, PGrant):
            if p.privileges & Priv.OWNER:
                obj = self.need(p.object)
                obj2 = replace(obj, owner=p.grantee)
                return self._with(objects=self.objects.add(p.object, obj2))
            mine = self.grants_for(p.grantee).add(p.object, p.privileges)
            return self._with(grants=self.grants.add(p.grantee, mine))
        if isinstance(p, PMetadata):
            obj = self.need(p.object)
            obj2 = replace(obj, metadata=obj.metadata + p.words)
            return self._with(objects=self.objects.add(p.object, obj2))
        if isinstance(p, PDomain):
            d = DomainObj(pos, p.name, p.base, p.precision, p.scale)
            objs = self.objects.add(pos, d)
            names = self.names
            if p.name:
                names = names.add((NS_DOMAIN, p.name), pos)
            return self._with(objects=objs, names=names)
        if isinstance(p, PDrop):
            return self._install_drop(p)
        if isinstance(p, PAlter):
            v = self.need(p.object)
            if not isinstance(v, ViewObj):
                raise LogCorruptionError(
                    f"ALTER of non-view uid {p.object}", offset=pos)
            v2 = replace(v, source=p.source, schema_key=pos)
            return self._with(objects=self.objects.add(v.uid, v2))
        raise LogCorruptionError(f"uninstallable physical {p!r}", offset=pos)

    # -- data paths -------------------------------------------------------

    def _index_key(self, ix: IndexObj, cells: dict, row_uid: int):
        """Key for one row in one index; None when a component is NULL."""
        parts = []
        for c in ix.columns:
            v = cells.get(c)
            if v is None:
                return None
            parts.append(v)
        key = tuple(parts)
        if ix.index_kind == IndexKind.FOREIGN:
            return key + (row_uid,)   # non-unique: row uid breaks ties
        return key

    def _install_record(self, p: PRecord) -> "DatabaseSnapshot":
        table = self.need(p.table)
        td = self.table_data(p.table)
        row = Row(dict(p.fields), p.defining_pos)
        rows = td.rows.add(p.defining_pos, row)
        indexes = td.indexes
        for ix in self.table_indexes(table):
            key = self._index_key(ix, row.cells, p.defining_pos)
            if key is not None:
                tree = indexes.get(ix.uid, PTree.empty())
                indexes = indexes.add(ix.uid, tree.add(key, p.defining_pos))
        return self._with(tables_data=self.tables_data.add(
            p.table, TableData(rows, indexes)))

    def _install_update(self, p: PUpdate) -> "DatabaseSnapshot":
        table = self.need(p.table)
        td = self.table_data(p.table)
        old = td.rows.get(p.row)
        if old is None:
            raise LogCorruptionError(
                f"update of unknown row {p.row}", offset=p.defining_pos)
        cells = dict(old.cells)
        cells.update(dict(p.fields))
        row = Row(cells, p.defining_pos)
        rows = td.rows.add(p.row, row)
        indexes = td.indexes
        for ix in self.table_indexes(table):
            okey = self._index_key(ix, old.cells, p.row)
            nkey = self._index_key(ix, cells, p.row)
            if okey == nkey:
                continue
            tree = indexes.get(ix.uid, PTree.empty())
            if okey is not None:
                tree = tree.remove(okey)
            if nkey is not None:
                tree = tree.add(nkey, p.row)
            indexes = indexes.add(ix.uid, tree)
        return self._with(tables_data=self.tables_data.add(
            p.table, TableData(rows, indexes)))

    def _install_delete(self, p: PDelete) -> "DatabaseSnapshot":
        table = self.need(p.table)
        td = self.table_data(p.table)
        old = td.rows.get(p.row)
        if old is None:
            raise LogCorruptionError(
                f"delete of unknown row {p.row}", offset=p.defining_pos)
        rows = td.rows.remove(p.row)
        indexes = td.indexes
        for ix in self.table_indexes(table):
            okey = self._index_key(ix, old.cells, p.row)
            if okey is not None:
                tree = indexes.get(ix.uid, PTree.empty())
                indexes = indexes.add(ix.uid, tree.remove(okey))
        return self._with(tables_data=self.tables_data.add(
            p.table, TableData(rows, indexes)))

    def _install_index(self, p: PIndex) -> "DatabaseSnapshot":
        table = self.need(p.table)
        ix = IndexObj(p.defining_pos, p.table, p.index_kind, p.columns,
                      p.ref_table, p.ref_columns, p.update_action,
                      p.delete_action)
        table2 = replace(table, indexes=table.indexes + (ix.uid,),
                         schema_key=p.defining_pos)
        td = self.table_data(p.table)
        tree = PTree.empty()
        for row_uid, row in td.rows.items():
            key = self._index_key(ix, row.cells, row_uid)
            if key is not None:
                tree = tree.add(key, row_uid)
        objs = self.objects.add(ix.uid, ix).add(table.uid, table2)
        return self._with(
            objects=objs,
            tables_data=self.tables_data.add(
                p.table, TableData(td.rows, td.indexes.add(ix.uid, tree))))

    def _install_drop(self, p: PDrop) -> "DatabaseSnapshot":
        obj = self.need(p.object)
        objs = self.objects.remove(p.object)
        names = self.names
        tables_data = self.tables_data
        if isinstance(obj, TableObj):
            for c in obj.columns:
                objs = objs.remove(c)
            for i in obj.indexes:
                objs = objs.remove(i)
            names = names.remove((NS_REL, obj.name))
            tables_data = tables_data.remove(obj.uid)
        elif isinstance(obj, (ViewObj, RestViewObj)):
            names = names.remove((NS_REL, obj.name))
        elif isinstance(obj, RoleObj):
            names = names.remove((NS_ROLE, obj.name))
        elif isinstance(obj, UserObj):
            names = names.remove((NS_USER, obj.name))
        elif isinstance(obj, DomainObj):
            if obj.name:
                names = names.remove((NS_DOMAIN, obj.name))
        return self._with(objects=objs, names=names, tables_data=tables_data)

    # -- hashing -----------------------------------------------------------

    def state_hash(self) -> str:
        """Canonical digest of all installed state (index trees excluded:
        they are derived deterministically from rows)."""
        h = hashlib.sha256()

        def w(*parts):
            for part in parts:
                if isinstance(part, bytes):
                    h.update(part)
                else:
                    h.update(str(part).encode())
                h.update(b"\x1f")

        w("watermark", self.log_watermark)
        for uid, o in self.objects.items():
            w("obj", uid, type(o).__name__)
            for f in sorted(o.__dataclass_fields__):
                v = getattr(o, f)
                w(f, repr(v))
        for tuid, td in self.tables_data.items():
            w("table", tuid)
            for row_uid, row in td.rows.items():
                w("row", row_uid, row.last_change)
                for col in sorted(row.cells):
                    w(col, _cell(row.cells[col]))
        for grantee, tree in self.grants.items():
            for ouid, bits in tree.items():
                w("grant", grantee, ouid, bits)
        return h.hexdigest()
