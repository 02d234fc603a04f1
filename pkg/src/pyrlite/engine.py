"""Transaction lifecycle, commit validation, constraints and security.

A transaction is born by copying the database's root reference (a
snapshot).  Work is staged as physicals carrying transaction-temporary
uids; reads are tracked per table at column/row granularity.  Commit takes
the database's single lock, validates the read/write sets against
everything committed since the snapshot, enforces constraints (expanding
cascades) against the live state, performs the single remote write if one
is staged, relocates the physicals to their final file positions, appends
them as one contiguous group and installs them into a new published
snapshot.  Nothing is written when any step fails.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple, Union

from . import uids
from .errors import (AuthorizationError, ConstraintError, StatementError,
                     TransactionConflict, TransactionTooOld)
from .logfile import LogFile, layout_transaction
from .pbtree import PTree
from .physical import (Action, IndexKind, PAlter, PColumn, PDelete, PDrop,
                       PGrant, PIndex, PMetadata, PRecord, PRestView, PRole,
                       PTable, PTxHeader, PUpdate, PUser, PView, Physical,
                       Priv, payload_uids)
from .snapshot import (NS_REL, NS_ROLE, NS_USER, DatabaseSnapshot, DomainObj,
                       IndexObj, RoleObj, TableObj)
from .values import Real, real_round

RING_CAPACITY = 1 << 16   # physicals retained for conflict checks

# Placeholder "user" uid while the bootstrap user's record is uncommitted.
PENDING_USER = uids.TX_BASE


@dataclass(frozen=True)
class ReadSet:
    columns: FrozenSet[int] = frozenset()
    rows: FrozenSet[int] = frozenset()
    whole: bool = False

    def merged(self, columns=(), rows=(), whole=False) -> "ReadSet":
        return ReadSet(self.columns | frozenset(columns),
                       self.rows | frozenset(rows),
                       self.whole or whole)


@dataclass(frozen=True)
class ConflictReport:
    outcome: str                      # "ok" | "conflict"
    conflicting_object: Optional[int] = None
    reason: Optional[str] = None      # object-changed | column-read-updated |
                                      # row-read-updated

    @property
    def ok(self) -> bool:
        return self.outcome == "ok"


OK_REPORT = ConflictReport("ok")


@dataclass(frozen=True)
class RemoteWrite:
    """One staged conditional write to a single remote contributor."""

    origin: str                       # scheme://host:port of the contributor
    method: str                       # POST | PUT | DELETE
    url: str                          # full resource url
    body: Optional[dict] = None
    if_match: Optional[str] = None
    credentials: Optional[Tuple[str, str]] = None


@dataclass(frozen=True)
class Transaction:
    """Immutable transaction state; operations return updated copies."""

    base: DatabaseSnapshot
    effective: DatabaseSnapshot
    user: Union[int, str]             # committed uid, or name while pending
    role: int
    staged: Tuple[Physical, ...] = ()
    remote_writes: Tuple[RemoteWrite, ...] = ()
    read_tables: PTree = field(default_factory=PTree.empty)
    objects_read: FrozenSet[int] = frozenset()
    next_temp: int = uids.TX_BASE + 1
    next_heap: int = uids.HEAP_BASE

    @property
    def user_uid(self) -> int:
        return self.user if isinstance(self.user, int) else PENDING_USER

    # -- reads ---------------------------------------------------------

    def note_read(self, table_uid: int, columns=(), rows=(), whole=False,
                  access_role: Optional[int] = None) -> "Transaction":
        """Record what was read; checks SELECT under the accessing role."""
        role = self.role if access_role is None else access_role
        table = self.effective.obj(table_uid)
        if isinstance(table, TableObj) and columns:
            if not check_privilege(self.effective, self.user, role,
                                   table_uid, Priv.SELECT):
                col = self.effective.obj(next(iter(columns)))
                cname = col.name if col is not None else "?"
                raise AuthorizationError(
                    f"no SELECT privilege on column {cname}")
        rs = self.read_tables.get(table_uid, ReadSet())
        rs = rs.merged(columns, rows, whole)
        return replace(self, read_tables=self.read_tables.add(table_uid, rs))

    def note_object_read(self, uid: int) -> "Transaction":
        return replace(self, objects_read=self.objects_read | {uid})

    # -- writes --------------------------------------------------------

    def stage(self, p: Physical) -> "Transaction":
        """Append a physical under a fresh temporary uid.

        The transaction's effective state reflects it immediately, so the
        session reads its own writes; nothing is visible outside until
        commit.
        """
        for u in payload_uids(p):
            if uids.is_temp(u):
                if not (uids.TX_BASE < u < self.next_temp):
                    raise StatementError(f"forward reference to {u}")
            elif uids.is_heap(u) or uids.is_session(u):
                raise StatementError(f"non-storable uid {u} in payload")
        temp = self.next_temp
        p = replace(p, defining_pos=temp)
        self._check_payload(p)
        eff = self.effective.install(p, self.user_uid, self.role)
        return replace(self, staged=self.staged + (p,), effective=eff,
                       next_temp=temp + 1)

    def last_staged_uid(self) -> int:
        return self.staged[-1].defining_pos

    def stage_remote(self, w: RemoteWrite) -> "Transaction":
        if self.remote_writes:
            prior = self.remote_writes[0]
            if prior.origin != w.origin:
                raise StatementError(
                    f"single transaction master: transaction already targets "
                    f"{prior.origin}, cannot also write to {w.origin}")
            raise StatementError(
                "single remote update: transaction already stages a remote write")
        return replace(self, remote_writes=(w,))

    def _check_payload(self, p: Physical):
        eff = self.effective
        if isinstance(p, (PRecord, PUpdate)):
            table = eff.obj(p.table)
            if not isinstance(table, TableObj):
                raise StatementError(f"unknown table uid {p.table}")
            cols = set(table.columns)
            for c, v in p.fields:
                if c not in cols:
                    raise StatementError(f"unknown column uid {c}")
        elif isinstance(p, (PColumn, PIndex)):
            if not isinstance(eff.obj(p.table), TableObj):
                raise StatementError(f"unknown table uid {p.table}")
        elif isinstance(p, PDelete):
            table = eff.obj(p.table)
            if not isinstance(table, TableObj):
                raise StatementError(f"unknown table uid {p.table}")
            if eff.table_data(p.table).rows.get(p.row) is None:
                raise StatementError(f"unknown row {p.row}")

    def staged_write_rows(self) -> Dict[int, set]:
        """Committed-range row uids this transaction updates or deletes."""
        out: Dict[int, set] = {}
        for p in self.staged:
            if isinstance(p, (PUpdate, PDelete)) and uids.is_committed(p.row):
                out.setdefault(p.table, set()).add(p.row)
        return out

    def objects_of_interest(self) -> set:
        out = set(self.objects_read)
        for t, _ in self.read_tables.items():
            out.add(t)
        for p in self.staged:
            if isinstance(p, (PRecord, PUpdate, PDelete, PColumn, PIndex)):
                if uids.is_committed(p.table):
                    out.add(p.table)
            elif isinstance(p, (PAlter, PDrop, PMetadata)):
                if uids.is_committed(p.object):
                    out.add(p.object)
            elif isinstance(p, PGrant):
                for u in (p.object, p.grantee):
                    if uids.is_committed(u):
                        out.add(u)
        return out

    def alloc_heap(self, n: int = 1) -> Tuple["Transaction", int]:
        first = self.next_heap
        return replace(self, next_heap=first + n), first


# ---------------------------------------------------------------------------
# Validation

def _touched_objects(p: Physical) -> Tuple[int, ...]:
    if isinstance(p, (PColumn, PIndex)):
        return (p.table,)
    if isinstance(p, (PAlter, PDrop, PMetadata)):
        return (p.object,)
    if isinstance(p, PGrant):
        return (p.object, p.grantee)
    return ()


def validate(tx: Transaction, committed_between: List[Physical]) -> ConflictReport:
    """Conflict test at the granularity of objects, columns and rows."""
    interest = tx.objects_of_interest()
    writes = tx.staged_write_rows()
    for p in committed_between:
        for obj in _touched_objects(p):
            if obj in interest:
                return ConflictReport("conflict", obj, "object-changed")
        if isinstance(p, PRecord):
            rs = tx.read_tables.get(p.table)
            if rs is not None and rs.whole:
                return ConflictReport("conflict", p.table, "column-read-updated")
        elif isinstance(p, PUpdate):
            if p.row in writes.get(p.table, ()):
                return ConflictReport("conflict", p.row, "row-read-updated")
            rs = tx.read_tables.get(p.table)
            if rs is not None:
                changed = {c for c, _ in p.fields}
                if changed & rs.columns and (rs.whole or p.row in rs.rows):
                    reason = "row-read-updated" if p.row in rs.rows \
                        else "column-read-updated"
                    return ConflictReport("conflict", p.row, reason)
        elif isinstance(p, PDelete):
            if p.row in writes.get(p.table, ()):
                return ConflictReport("conflict", p.row, "row-read-updated")
            rs = tx.read_tables.get(p.table)
            if rs is not None and (rs.whole or p.row in rs.rows):
                return ConflictReport("conflict", p.row, "row-read-updated")
    return OK_REPORT


# ---------------------------------------------------------------------------
# Privileges

def check_privilege(snap: DatabaseSnapshot, user: Union[int, str], role: int,
                    object_uid: int, action: int) -> bool:
    """True iff the (user, role) pair holds ``action`` on the object.

    REFERENCES is accepted as a synonym of SELECT by callers mapping it
    before the call.  The object's owner and the database owner are always
    allowed; the definer's role holds everything on its own objects;
    otherwise the role's explicit grants and PUBLIC grants decide.
    """
    if isinstance(user, str):
        return True   # bootstrap: the database has no users yet
    obj = snap.obj(object_uid)
    if obj is None:
        return False
    if getattr(obj, "owner", None) == user or snap.owner == user:
        return True
    if getattr(obj, "definer_role", None) == role:
        return True
    if snap.privilege_mask(role, object_uid) & action:
        return True
    if snap.privilege_mask(uids.PUBLIC_ROLE, object_uid) & action:
        return True
    return False


def may_use_role(snap: DatabaseSnapshot, user: Union[int, str], role_uid: int) -> bool:
    if role_uid == uids.PUBLIC_ROLE:
        return True
    if isinstance(user, str):
        return True
    if role_uid == uids.SCHEMA_ROLE:
        return snap.owner == user
    role = snap.obj(role_uid)
    if not isinstance(role, RoleObj):
        return False
    if role.owner == user or snap.owner == user:
        return True
    return bool(snap.privilege_mask(user, role_uid) & Priv.USAGE)


# ---------------------------------------------------------------------------
# Constraints and cascades

def _unique_indexes(snap, table: TableObj):
    return [ix for ix in snap.table_indexes(table)
            if ix.index_kind in (IndexKind.PRIMARY, IndexKind.UNIQUE)]


def _fk_indexes(snap, table: TableObj):
    return [ix for ix in snap.table_indexes(table)
            if ix.index_kind == IndexKind.FOREIGN]


def _key_of(cells: dict, columns) -> Optional[tuple]:
    parts = []
    for c in columns:
        v = cells.get(c)
        if v is None:
            return None
        parts.append(v)
    return tuple(parts)


def _index_tree(snap, table_uid: int, index_uid: int) -> PTree:
    t = snap.table_data(table_uid).indexes.get(index_uid)
    return t if t is not None else PTree.empty()


def _fk_children(snap, rx: IndexObj, parent_key: tuple):
    """Row uids in rx.table whose FK columns equal parent_key."""
    tree = _index_tree(snap, rx.table, rx.uid)
    bm = tree.seek(parent_key)
    out = []
    while bm is not None:
        k = bm.key
        if k[:len(parent_key)] != parent_key:
            break
        out.append(bm.value)
        bm = bm.next()
    return out


def _check_expr(snap, table: TableObj, source: str, cells: dict, where: str):
    """Evaluate a CHECK expression over one row; FALSE rejects."""
    from .sql.parser import parse_expression
    from .sql.expreval import eval_check
    expr = parse_expression(source)
    env = {}
    for cu in table.columns:
        col = snap.obj(cu)
        if col is not None:
            env[col.name] = cells.get(cu)
    result = eval_check(expr, env)
    if result is False:
        raise ConstraintError(f"check constraint failed: {source}",
                              constraint=where)


def enforce_constraints(live: DatabaseSnapshot, tx: Transaction,
                        base_watermark: int) -> Tuple[Physical, ...]:
    """Check constraints against the live state and expand cascades.

    Runs inside the commit lock.  Returns the final staged tuple (original
    physicals plus any cascade-generated deletes/updates).  A violation
    caused by a row committed after the transaction's snapshot surfaces as
    a conflict rather than a constraint error, since the statement was
    valid when staged.
    """
    merged = live
    queue = list(tx.staged)
    out: List[Physical] = []
    next_temp = tx.next_temp
    seen_deletes = set()

    def fail_dup(existing_row, constraint, table_name):
        if uids.is_committed(existing_row) and existing_row >= base_watermark:
            raise TransactionConflict(
                ConflictReport("conflict", existing_row, "row-read-updated"))
        raise ConstraintError(
            f"duplicate key for {constraint} in {table_name}",
            constraint=constraint, row=existing_row)

    while queue:
        p = queue.pop(0)
        if isinstance(p, (PTable, PView, PRestView, PRole, PUser)):
            ns = NS_ROLE if isinstance(p, PRole) else \
                NS_USER if isinstance(p, PUser) else NS_REL
            other = merged.resolve(ns, p.name)
            if other is not None and other != p.defining_pos:
                if uids.is_committed(other) and other >= base_watermark:
                    raise TransactionConflict(
                        ConflictReport("conflict", other, "object-changed"))
                raise ConstraintError(f"name already in use: {p.name}",
                                      constraint="unique name")
        elif isinstance(p, PDrop):
            obj = merged.obj(p.object)
            if isinstance(obj, TableObj):
                for rx in merged.referencing_indexes(p.object):
                    if rx.table != p.object and merged.obj(rx.table) is not None:
                        child = merged.obj(rx.table)
                        raise ConstraintError(
                            f"table {obj.name} is referenced by {child.name}",
                            constraint="foreign key")
        elif isinstance(p, (PRecord, PUpdate)):
            table = merged.need(p.table)
            if isinstance(p, PRecord):
                cells = dict(p.fields)
            else:
                old = merged.table_data(p.table).rows.get(p.row)
                if old is None:
                    raise ConstraintError(f"row {p.row} vanished",
                                          constraint="row", row=p.row)
                cells = dict(old.cells)
                cells.update(dict(p.fields))
            row_uid = p.defining_pos if isinstance(p, PRecord) else p.row
            _check_row(merged, table, cells, row_uid, base_watermark, fail_dup)
            if isinstance(p, PUpdate):
                extra, next_temp = _parent_key_actions(
                    merged, table, old.cells, cells, p.row, next_temp)
                queue[:0] = extra
        elif isinstance(p, PDelete):
            table = merged.need(p.table)
            old = merged.table_data(p.table).rows.get(p.row)
            if old is None:
                raise ConstraintError(f"row {p.row} vanished",
                                      constraint="row", row=p.row)
            extra, next_temp = _delete_actions(
                merged, table, old.cells, p.row, next_temp, seen_deletes)
            queue[:0] = extra
        merged = merged.install(p, tx.user_uid, tx.role)
        out.append(p)
    return tuple(out)


def _check_row(merged, table: TableObj, cells: dict, row_uid: int,
               base_watermark: int, fail_dup):
    for cu in table.columns:
        col = merged.obj(cu)
        if col is None:
            continue
        if col.notnull and cells.get(cu) is None:
            raise ConstraintError(f"column {col.name} may not be NULL",
                                  constraint="not null", row=row_uid)
        if col.check_source:
            _check_expr(merged, table, col.check_source, cells,
                        f"{table.name}.{col.name}")
    for src in table.checks:
        _check_expr(merged, table, src, cells, table.name)
    for ix in _unique_indexes(merged, table):
        for cu in ix.columns:
            col = merged.obj(cu)
            if ix.index_kind == IndexKind.PRIMARY and cells.get(cu) is None:
                raise ConstraintError(
                    f"primary key column {col.name} may not be NULL",
                    constraint="primary key", row=row_uid)
        key = _key_of(cells, ix.columns)
        if key is None:
            continue
        existing = _index_tree(merged, table.uid, ix.uid).get(key)
        if existing is not None and existing != row_uid:
            name = "primary key" if ix.index_kind == IndexKind.PRIMARY \
                else "unique"
            fail_dup(existing, name, table.name)
    for rx in _fk_indexes(merged, table):
        key = _key_of(cells, rx.columns)
        if key is None:
            continue   # NULL foreign key: no reference
        parent = merged.obj(rx.ref_table)
        if parent is None:
            raise ConstraintError("referenced table is gone",
                                  constraint="foreign key", row=row_uid)
        pix = _parent_key_index(merged, parent, rx.ref_columns)
        if pix is None or _index_tree(merged, parent.uid, pix.uid).get(key) is None:
            raise ConstraintError(
                f"no row in {parent.name} matches foreign key {key!r}",
                constraint="foreign key", row=row_uid)


def _parent_key_index(snap, parent: TableObj, ref_columns) -> Optional[IndexObj]:
    for ix in _unique_indexes(snap, parent):
        if ix.columns == tuple(ref_columns):
            return ix
    return None


def _delete_actions(merged, table: TableObj, cells: dict, row_uid: int,
                    next_temp: int, seen) -> Tuple[List[Physical], int]:
    """Referential actions for deleting one row; returns staged extras."""
    extras: List[Physical] = []
    for rx in merged.referencing_indexes(table.uid):
        pix_cols = rx.ref_columns
        key = _key_of(cells, pix_cols)
        if key is None:
            continue
        child_table = merged.obj(rx.table)
        for child_row in _fk_children(merged, rx, key):
            if (rx.table, child_row) == (table.uid, row_uid):
                continue
            if (rx.table, child_row) in seen:
                continue
            seen.add((rx.table, child_row))
            crow = merged.table_data(rx.table).rows.get(child_row)
            if crow is None:
                continue
            if rx.delete_action == Action.RESTRICT:
                raise ConstraintError(
                    f"row {child_row} in {child_table.name} references the "
                    f"deleted row", constraint="foreign key", row=child_row)
            if rx.delete_action == Action.CASCADE:
                extras.append(PDelete(next_temp, rx.table, child_row,
                                      crow.last_change))
                next_temp += 1
            else:   # SET NULL
                for cu in rx.columns:
                    col = merged.obj(cu)
                    if col is not None and col.notnull:
                        raise ConstraintError(
                            f"cannot SET NULL on NOT NULL column {col.name}",
                            constraint="foreign key", row=child_row)
                extras.append(PUpdate(next_temp, rx.table, child_row,
                                      crow.last_change,
                                      tuple((cu, None) for cu in rx.columns)))
                next_temp += 1
    return extras, next_temp


def _parent_key_actions(merged, table: TableObj, old_cells: dict,
                        new_cells: dict, row_uid: int, next_temp: int):
    """ON UPDATE actions when a referenced key changes."""
    extras: List[Physical] = []
    for rx in merged.referencing_indexes(table.uid):
        okey = _key_of(old_cells, rx.ref_columns)
        nkey = _key_of(new_cells, rx.ref_columns)
        if okey == nkey or okey is None:
            continue
        child_table = merged.obj(rx.table)
        for child_row in _fk_children(merged, rx, okey):
            crow = merged.table_data(rx.table).rows.get(child_row)
            if crow is None:
                continue
            if rx.update_action == Action.RESTRICT:
                raise ConstraintError(
                    f"row {child_row} in {child_table.name} references the "
                    f"updated key", constraint="foreign key", row=child_row)
            if rx.update_action == Action.CASCADE and nkey is not None:
                fieldsets = tuple(zip(rx.columns, nkey))
            else:
                fieldsets = tuple((c, None) for c in rx.columns)
            extras.append(PUpdate(next_temp, rx.table, child_row,
                                  crow.last_change, fieldsets))
            next_temp += 1
    return extras, next_temp


# ---------------------------------------------------------------------------
# The database handle

class Database:
    """Shared handle: current snapshot, the log, and the commit lock."""

    def __init__(self, path: str, name: Optional[str] = None,
                 fsync: bool = False):
        self.log = LogFile(path, fsync=fsync)
        self.snapshot = self.log.replay(name)
        self.name = self.snapshot.name
        self._commit_lock = threading.Lock()
        self._ring: deque = deque()      # (base_pos, end_pos, [physicals])
        self._ring_physicals = 0
        self._dropped_below = self.snapshot.log_watermark
        self._clock_last = 0

    def close(self):
        self.log.close()

    # -- lifecycle -------------------------------------------------------

    def begin(self, user_name: str, role_name: Optional[str] = None) -> Transaction:
        snap = self.snapshot
        user_obj = snap.user_by_name(user_name)
        if user_obj is None:
            if snap.owner is not None:
                raise AuthorizationError(f"unknown user {user_name!r}")
            user: Union[int, str] = user_name   # bootstrap: becomes the owner
        else:
            user = user_obj.uid
        if role_name is None:
            # The owner works in the schema role by default; others in PUBLIC.
            if isinstance(user, str) or snap.owner == user:
                role = uids.SCHEMA_ROLE
            else:
                role = uids.PUBLIC_ROLE
        elif role_name.upper() == "PUBLIC":
            role = uids.PUBLIC_ROLE
        else:
            role = snap.resolve(NS_ROLE, role_name)
            if role is None:
                raise AuthorizationError(f"unknown role {role_name!r}")
        if not may_use_role(snap, user, role):
            raise AuthorizationError(
                f"user {user_name!r} has not been granted role {role_name!r}")
        return Transaction(base=snap, effective=snap, user=user, role=role)

    def _next_clock(self) -> int:
        wall = time.time_ns() // 1000
        self._clock_last = max(self._clock_last, wall)
        return self._clock_last

    def _interim_since(self, watermark: int) -> List[Physical]:
        out = []
        for base, _end, group in self._ring:
            if base >= watermark:
                out.extend(group)
        return out

    def commit(self, tx: Transaction,
               send_remote: Optional[Callable[[RemoteWrite], int]] = None
               ) -> Tuple[DatabaseSnapshot, Optional[int]]:
        """Validate, enforce, append and publish one transaction."""
        if not tx.staged and not tx.remote_writes:
            return self.snapshot, None
        with self._commit_lock:
            if tx.base.log_watermark < self._dropped_below:
                raise TransactionTooOld(
                    "snapshot predates retained history; begin a new transaction")
            report = validate(tx, self._interim_since(tx.base.log_watermark))
            if not report.ok:
                raise TransactionConflict(report)
            live = self.snapshot
            staged = enforce_constraints(live, tx, tx.base.log_watermark)
            if tx.remote_writes:
                if send_remote is None:
                    from .restsvc.client import send_remote_write
                    send_remote = send_remote_write
                send_remote(tx.remote_writes[0])   # raises on 412/offline
            if not staged:
                return live, None
            clock = self._next_clock()
            relocated, _ = layout_transaction(
                self.log.length, list(staged), tx.user, tx.role, clock)
            base = self.log.append_transaction(relocated, tx.user, tx.role, clock)
            header = PTxHeader(base, tx.user, tx.role, clock, len(relocated))
            snap, user_uid = live.install_header(header)
            for p in relocated:
                snap = snap.install(p, user_uid, tx.role)
            snap = snap._with(log_watermark=self.log.length)
            self.snapshot = snap
            self._ring.append((base, self.log.length, relocated))
            self._ring_physicals += len(relocated)
            while self._ring_physicals > RING_CAPACITY and len(self._ring) > 1:
                old_base, old_end, old_group = self._ring.popleft()
                self._ring_physicals -= len(old_group)
                self._dropped_below = old_end
            return snap, base


# ---------------------------------------------------------------------------
# Class models

_DOMAIN_NAMES = {
    uids.DOM_INTEGER: "INT", uids.DOM_CHAR: "CHAR", uids.DOM_BOOLEAN: "BOOLEAN",
    uids.DOM_DATE: "DATE", uids.DOM_NUMERIC: "NUMERIC",
}


def domain_name(snap: DatabaseSnapshot, domain_uid: int) -> str:
    if domain_uid in _DOMAIN_NAMES:
        return _DOMAIN_NAMES[domain_uid]
    d = snap.obj(domain_uid)
    if not isinstance(d, DomainObj):
        return "CHAR"
    base = _DOMAIN_NAMES.get(d.base, "CHAR")
    if d.scale is not None:
        return f"{base}({d.precision},{d.scale})"
    if d.precision:
        return f"{base}({d.precision})"
    return base


def generate_class_model(snap: DatabaseSnapshot, role: int, table_uid: int,
                         user: Union[int, str, None] = None) -> dict:
    """Language-neutral record model for one table under one role."""
    table = snap.obj(table_uid)
    if not isinstance(table, TableObj):
        raise StatementError(f"unknown table uid {table_uid}")
    principal = user if user is not None else -1
    if not check_privilege(snap, principal, role, table_uid, Priv.SELECT):
        raise AuthorizationError(f"role cannot select {table.name}")
    pk = snap.primary_index(table)
    pk_cols = set(pk.columns) if pk else set()
    autokey = bool(pk and len(pk.columns) == 1 and
                   _base_domain(snap, snap.obj(pk.columns[0]).domain)
                   == uids.DOM_INTEGER)
    columns = []
    for cu in table.columns:
        col = snap.obj(cu)
        columns.append({
            "name": col.name,
            "domain": domain_name(snap, col.domain),
            "key": cu in pk_cols,
            "autokey": autokey and cu in pk_cols,
            "notnull": col.notnull,
        })
    navigation = []
    colname = lambda uid: snap.obj(uid).name
    for rx in _fk_indexes(snap, table):
        parent = snap.obj(rx.ref_table)
        if parent is None:
            continue
        navigation.append({
            "name": parent.name.lower(),
            "kind": "one",
            "target": parent.name,
            "via": ",".join(colname(c) for c in rx.ref_columns),
            "fields": [colname(c) for c in rx.columns],
        })
    for rx in snap.referencing_indexes(table_uid):
        child = snap.obj(rx.table)
        if child is None:
            continue
        navigation.append({
            "name": child.name.lower() + "s",
            "kind": "many",
            "target": child.name,
            "via": ",".join(colname(c) for c in rx.columns),
            "fields": [colname(c) for c in rx.ref_columns],
        })
    return {
        "table": table.name,
        "defining_pos": table.uid,
        "schema_key": table.schema_key,
        "columns": columns,
        "navigation": navigation,
    }


def _base_domain(snap: DatabaseSnapshot, domain_uid: int) -> int:
    if domain_uid < 0:
        return domain_uid
    d = snap.obj(domain_uid)
    return d.base if isinstance(d, DomainObj) else uids.DOM_CHAR


def next_autokey(snap: DatabaseSnapshot, table: TableObj) -> int:
    """max existing integer primary key + 1, or 1 for an empty table."""
    pk = snap.primary_index(table)
    tree = _index_tree(snap, table.uid, pk.uid)
    bm = tree.last()
    if bm is None:
        return 1
    return bm.key[0] + 1


def coerce_cell(snap: DatabaseSnapshot, domain_uid: int, value, where: str = ""):
    """Fit a value to a column domain, or raise a statement error.

    Exact-decimal values are rounded to a declared scale; CHAR and NUMERIC
    precision overflows are rejected rather than silently truncated.
    """
    import datetime as _dt
    if value is None:
        return None
    base = _base_domain(snap, domain_uid)
    d = snap.obj(domain_uid) if domain_uid >= 0 else None
    precision = d.precision if isinstance(d, DomainObj) else 0
    scale = d.scale if isinstance(d, DomainObj) else None
    label = where or domain_name(snap, domain_uid)
    if base == uids.DOM_INTEGER:
        if isinstance(value, bool):
            raise StatementError(f"boolean value in integer column {label}")
        if isinstance(value, int):
            return value
        if isinstance(value, Real):
            n = value.normalized()
            if n.scale >= 0:
                return n.mantissa * 10 ** n.scale
        raise StatementError(f"not an integer for {label}: {value!r}")
    if base == uids.DOM_CHAR:
        if not isinstance(value, str):
            raise StatementError(f"not a string for {label}: {value!r}")
        if precision and len(value) > precision:
            raise StatementError(
                f"value too long for {label}: {len(value)} > {precision}")
        return value
    if base == uids.DOM_BOOLEAN:
        if isinstance(value, bool):
            return value
        raise StatementError(f"not a boolean for {label}: {value!r}")
    if base == uids.DOM_DATE:
        if isinstance(value, _dt.date):
            return value
        if isinstance(value, str):
            try:
                return _dt.date.fromisoformat(value)
            except ValueError:
                pass
        raise StatementError(f"not a date for {label}: {value!r}")
    if base == uids.DOM_NUMERIC:
        if isinstance(value, bool):
            raise StatementError(f"boolean value in numeric column {label}")
        if isinstance(value, int):
            value = Real(value, 0)
        if not isinstance(value, Real):
            raise StatementError(f"not a number for {label}: {value!r}")
        if scale is not None:
            value = real_round(value, scale)
        if precision and len(str(abs(value.mantissa))) > precision:
            raise StatementError(f"numeric overflow for {label}: {value}")
        return value
    return value
