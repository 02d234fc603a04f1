"""Physical records: the durable units of the append-only log.

Each committed change to a database is one "physical".  A physical's
identity is its byte offset in the log file (its defining position); the
payload never stores that offset, and every uid a payload references points
strictly backwards in the file.

Wire format: a 1-byte kind tag followed by kind-specific fields.  Lengths
and counts are unsigned LEB128 varints; uids, scales and timestamps are
zigzag varints (built-in domains are negative); strings are length-prefixed
UTF-8; Integers are sign byte + big-endian magnitude (max 255 bytes, i.e.
2040 bits); Reals are an Integer mantissa plus a zigzag scale; dates are
days since 1970-01-01.  Everything is endian- and architecture-independent.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional, Tuple, Union

from . import uids
from .errors import EncodingError, LogCorruptionError, RelocationError
from .values import Real, check_integer_bound

_EPOCH = datetime.date(1970, 1, 1)


class Kind(IntEnum):
    TX_HEADER = 1
    TABLE = 2
    COLUMN = 3
    RECORD = 4
    UPDATE = 5
    DELETE = 6
    INDEX = 7
    VIEW = 8
    RESTVIEW = 9
    ROLE = 10
    USER = 11
    GRANT = 12
    METADATA = 13
    DOMAIN = 14
    DROP = 15
    ALTER = 16


class Action(IntEnum):
    """Referential actions; NO ACTION is deliberately unrepresentable."""

    CASCADE = 0
    RESTRICT = 1
    SET_NULL = 2


class IndexKind(IntEnum):
    PRIMARY = 0
    UNIQUE = 1
    FOREIGN = 2


class Priv(IntEnum):
    SELECT = 1
    INSERT = 2
    UPDATE = 4
    DELETE = 8
    USAGE = 16   # role membership
    OWNER = 32   # ownership transfer


ALL_TABLE_PRIVS = Priv.SELECT | Priv.INSERT | Priv.UPDATE | Priv.DELETE


@dataclass(frozen=True)
class Physical:
    defining_pos: int = -1

    @property
    def kind(self) -> Kind:
        return _KIND_OF[type(self)]


@dataclass(frozen=True)
class PTxHeader(Physical):
    # user is a committed uid, or a name for a user first seen in this
    # commit: the header's own position then becomes that user's uid.
    user: Union[int, str] = 0
    role: int = uids.PUBLIC_ROLE
    clock_us: int = 0
    count: int = 0


@dataclass(frozen=True)
class PTable(Physical):
    name: str = ""
    checks: Tuple[str, ...] = ()


@dataclass(frozen=True)
class PColumn(Physical):
    table: int = 0
    name: str = ""
    domain: int = uids.DOM_CHAR
    seq: int = 0
    notnull: bool = False
    check_source: str = ""


@dataclass(frozen=True)
class PRecord(Physical):
    table: int = 0
    fields: Tuple[Tuple[int, object], ...] = ()


@dataclass(frozen=True)
class PUpdate(Physical):
    table: int = 0
    row: int = 0
    prev: int = 0
    fields: Tuple[Tuple[int, object], ...] = ()


@dataclass(frozen=True)
class PDelete(Physical):
    table: int = 0
    row: int = 0
    prev: int = 0


@dataclass(frozen=True)
class PIndex(Physical):
    table: int = 0
    index_kind: IndexKind = IndexKind.PRIMARY
    columns: Tuple[int, ...] = ()
    ref_table: Optional[int] = None
    ref_columns: Tuple[int, ...] = ()
    update_action: Action = Action.RESTRICT
    delete_action: Action = Action.CASCADE


@dataclass(frozen=True)
class PView(Physical):
    name: str = ""
    source: str = ""


@dataclass(frozen=True)
class PRestView(Physical):
    name: str = ""
    columns: Tuple[Tuple[str, int], ...] = ()
    url: str = ""
    using_table: Optional[int] = None
    metadata: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class PRole(Physical):
    name: str = ""


@dataclass(frozen=True)
class PUser(Physical):
    name: str = ""


@dataclass(frozen=True)
class PGrant(Physical):
    privileges: int = 0
    object: int = 0
    grantee: int = 0


@dataclass(frozen=True)
class PMetadata(Physical):
    object: int = 0
    words: Tuple[Tuple[str, str], ...] = ()


@dataclass(frozen=True)
class PDomain(Physical):
    name: str = ""
    base: int = uids.DOM_CHAR
    precision: int = 0          # 0 = unspecified
    scale: Optional[int] = None


@dataclass(frozen=True)
class PDrop(Physical):
    object: int = 0


@dataclass(frozen=True)
class PAlter(Physical):
    object: int = 0
    source: str = ""   # replacement view definition


_KIND_OF = {
    PTxHeader: Kind.TX_HEADER, PTable: Kind.TABLE, PColumn: Kind.COLUMN,
    PRecord: Kind.RECORD, PUpdate: Kind.UPDATE, PDelete: Kind.DELETE,
    PIndex: Kind.INDEX, PView: Kind.VIEW, PRestView: Kind.RESTVIEW,
    PRole: Kind.ROLE, PUser: Kind.USER, PGrant: Kind.GRANT,
    PMetadata: Kind.METADATA, PDomain: Kind.DOMAIN, PDrop: Kind.DROP,
    PAlter: Kind.ALTER,
}
_CLASS_OF = {v: k for k, v in _KIND_OF.items()}


# ---------------------------------------------------------------------------
# Primitive encoders

def _uvarint(n: int) -> bytes:
    if n < 0:
        raise EncodingError("uvarint of negative value")
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        out.append(b | (0x80 if n else 0))
        if not n:
            return bytes(out)


def _zigzag(n: int) -> bytes:
    # Sign bit in the LSB so negative uids (built-in domains) stay compact.
    return _uvarint((abs(n) << 1) | (1 if n < 0 else 0))


def _string(s: str) -> bytes:
    raw = s.encode("utf-8")
    return _uvarint(len(raw)) + raw


def _integer(v: int) -> bytes:
    check_integer_bound(v)
    if v == 0:
        return b"\x00" + _uvarint(0)
    sign = b"\x01" if v < 0 else b"\x00"
    mag = abs(v).to_bytes((abs(v).bit_length() + 7) // 8, "big")
    return sign + _uvarint(len(mag)) + mag


def _cell(v) -> bytes:
    if v is None:
        return b"\x00"
    if isinstance(v, bool):
        return b"\x04" + (b"\x01" if v else b"\x00")
    if isinstance(v, int):
        return b"\x01" + _integer(v)
    if isinstance(v, Real):
        return b"\x02" + _integer(v.mantissa) + _zigzag(v.scale)
    if isinstance(v, str):
        return b"\x03" + _string(v)
    if isinstance(v, datetime.date):
        return b"\x05" + _zigzag((v - _EPOCH).days)
    raise EncodingError(f"unencodable cell: {v!r}")


def _fieldmap(fields) -> bytes:
    out = bytearray(_uvarint(len(fields)))
    for col, val in fields:
        out += _zigzag(col)
        out += _cell(val)
    return bytes(out)


def _words(pairs) -> bytes:
    out = bytearray(_uvarint(len(pairs)))
    for word, val in pairs:
        out += _string(word)
        out += _string(val)
    return bytes(out)


def _opt_uid(u: Optional[int]) -> bytes:
    return b"\x00" if u is None else b"\x01" + _zigzag(u)


class _Reader:
    """Bounds-checked cursor over the raw log bytes."""

    def __init__(self, data, pos: int):
        self.data = data
        self.pos = pos
        self.start = pos

    def fail(self, why: str):
        raise LogCorruptionError(f"log corruption at offset {self.start}: {why}",
                                 offset=self.start)

    def byte(self) -> int:
        if self.pos >= len(self.data):
            self.fail("truncated record")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            self.fail("truncated record")
        chunk = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return chunk

    def uvarint(self) -> int:
        shift, val = 0, 0
        while True:
            b = self.byte()
            val |= (b & 0x7F) << shift
            if not b & 0x80:
                return val
            shift += 7
            if shift > 70:
                self.fail("runaway varint")

    def zigzag(self) -> int:
        raw = self.uvarint()
        mag = raw >> 1
        return -mag if raw & 1 else mag

    def string(self) -> str:
        n = self.uvarint()
        if n > len(self.data) - self.pos:
            self.fail("string length overruns file")
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError:
            self.fail("malformed UTF-8")

    def integer(self) -> int:
        sign = self.byte()
        if sign not in (0, 1):
            self.fail("bad integer sign byte")
        n = self.uvarint()
        if n > 255:
            self.fail("integer magnitude over 255 bytes")
        mag = int.from_bytes(self.take(n), "big")
        return -mag if sign else mag

    def cell(self):
        tag = self.byte()
        if tag == 0:
            return None
        if tag == 1:
            return self.integer()
        if tag == 2:
            m = self.integer()
            return Real(m, self.zigzag())
        if tag == 3:
            return self.string()
        if tag == 4:
            return self.byte() != 0
        if tag == 5:
            return _EPOCH + datetime.timedelta(days=self.zigzag())
        self.fail(f"unknown cell tag {tag}")

    def fieldmap(self):
        n = self.uvarint()
        if n > 1_000_000:
            self.fail("implausible field count")
        return tuple((self.zigzag(), self.cell()) for _ in range(n))

    def words(self):
        n = self.uvarint()
        if n > 1_000_000:
            self.fail("implausible metadata count")
        return tuple((self.string(), self.string()) for _ in range(n))

    def opt_uid(self):
        flag = self.byte()
        if flag == 0:
            return None
        if flag != 1:
            self.fail("bad optional-uid flag")
        return self.zigzag()


# ---------------------------------------------------------------------------
# Physical <-> bytes

def encode_physical(p: Physical) -> bytes:
    """Deterministic bytes for one physical (kind tag first)."""
    k = p.kind
    out = bytearray([k])
    if k == Kind.TX_HEADER:
        if isinstance(p.user, str):
            out += b"\x01" + _string(p.user)
        else:
            out += b"\x00" + _zigzag(p.user)
        out += _zigzag(p.role) + _zigzag(p.clock_us) + _uvarint(p.count)
    elif k == Kind.TABLE:
        out += _string(p.name) + _uvarint(len(p.checks))
        for c in p.checks:
            out += _string(c)
    elif k == Kind.COLUMN:
        out += _zigzag(p.table) + _string(p.name) + _zigzag(p.domain)
        out += _uvarint(p.seq) + bytes([1 if p.notnull else 0])
        out += _string(p.check_source)
    elif k == Kind.RECORD:
        out += _zigzag(p.table) + _fieldmap(p.fields)
    elif k == Kind.UPDATE:
        out += _zigzag(p.table) + _zigzag(p.row) + _zigzag(p.prev)
        out += _fieldmap(p.fields)
    elif k == Kind.DELETE:
        out += _zigzag(p.table) + _zigzag(p.row) + _zigzag(p.prev)
    elif k == Kind.INDEX:
        out += _zigzag(p.table) + bytes([p.index_kind]) + _uvarint(len(p.columns))
        for c in p.columns:
            out += _zigzag(c)
        out += _opt_uid(p.ref_table) + _uvarint(len(p.ref_columns))
        for c in p.ref_columns:
            out += _zigzag(c)
        out += bytes([p.update_action, p.delete_action])
    elif k == Kind.VIEW:
        out += _string(p.name) + _string(p.source)
    elif k == Kind.RESTVIEW:
        out += _string(p.name) + _uvarint(len(p.columns))
        for name, dom in p.columns:
            out += _string(name) + _zigzag(dom)
        out += _string(p.url) + _opt_uid(p.using_table) + _words(p.metadata)
    elif k in (Kind.ROLE, Kind.USER):
        out += _string(p.name)
    elif k == Kind.GRANT:
        out += _uvarint(p.privileges) + _zigzag(p.object) + _zigzag(p.grantee)
    elif k == Kind.METADATA:
        out += _zigzag(p.object) + _words(p.words)
    elif k == Kind.DOMAIN:
        out += _string(p.name) + _zigzag(p.base) + _uvarint(p.precision)
        out += _opt_uid(p.scale)
    elif k == Kind.DROP:
        out += _zigzag(p.object)
    elif k == Kind.ALTER:
        out += _zigzag(p.object) + _string(p.source)
    else:  # pragma: no cover
        raise EncodingError(f"unknown kind {k}")
    return bytes(out)


def decode_physical(data, pos: int) -> Tuple[Physical, int]:
    """Decode the physical starting at pos; its defining_pos is pos."""
    r = _Reader(data, pos)
    tag = r.byte()
    try:
        k = Kind(tag)
    except ValueError:
        r.fail(f"unknown kind tag {tag}")
    if k == Kind.TX_HEADER:
        flag = r.byte()
        if flag not in (0, 1):
            r.fail("bad user flag")
        user = r.string() if flag == 1 else r.zigzag()
        p = PTxHeader(pos, user, r.zigzag(), r.zigzag(), r.uvarint())
    elif k == Kind.TABLE:
        name = r.string()
        p = PTable(pos, name, tuple(r.string() for _ in range(r.uvarint())))
    elif k == Kind.COLUMN:
        p = PColumn(pos, r.zigzag(), r.string(), r.zigzag(), r.uvarint(),
                    r.byte() != 0, r.string())
    elif k == Kind.RECORD:
        p = PRecord(pos, r.zigzag(), r.fieldmap())
    elif k == Kind.UPDATE:
        p = PUpdate(pos, r.zigzag(), r.zigzag(), r.zigzag(), r.fieldmap())
    elif k == Kind.DELETE:
        p = PDelete(pos, r.zigzag(), r.zigzag(), r.zigzag())
    elif k == Kind.INDEX:
        table = r.zigzag()
        ik = r.byte()
        if ik > 2:
            r.fail("bad index kind")
        cols = tuple(r.zigzag() for _ in range(r.uvarint()))
        ref = r.opt_uid()
        refcols = tuple(r.zigzag() for _ in range(r.uvarint()))
        ua, da = r.byte(), r.byte()
        if ua > 2 or da > 2:
            r.fail("bad referential action")
        p = PIndex(pos, table, IndexKind(ik), cols, ref, refcols,
                   Action(ua), Action(da))
    elif k == Kind.VIEW:
        p = PView(pos, r.string(), r.string())
    elif k == Kind.RESTVIEW:
        name = r.string()
        cols = tuple((r.string(), r.zigzag()) for _ in range(r.uvarint()))
        p = PRestView(pos, name, cols, r.string(), r.opt_uid(), r.words())
    elif k == Kind.ROLE:
        p = PRole(pos, r.string())
    elif k == Kind.USER:
        p = PUser(pos, r.string())
    elif k == Kind.GRANT:
        p = PGrant(pos, r.uvarint(), r.zigzag(), r.zigzag())
    elif k == Kind.METADATA:
        p = PMetadata(pos, r.zigzag(), r.words())
    elif k == Kind.DOMAIN:
        p = PDomain(pos, r.string(), r.zigzag(), r.uvarint(), r.opt_uid())
    elif k == Kind.DROP:
        p = PDrop(pos, r.zigzag())
    else:
        p = PAlter(pos, r.zigzag(), r.string())
    return p, r.pos


# ---------------------------------------------------------------------------
# Relocation

def _map_uid(uid: int, mapping) -> int:
    if uids.is_temp(uid):
        try:
            return mapping[uid]
        except KeyError:
            raise RelocationError(f"unmapped transaction-temporary uid {uid}") from None
    return uid


def relocate(p: Physical, mapping) -> Physical:
    """Replace transaction-temporary uids with final file positions.

    Committed, built-in, compiled and heap uids pass through unchanged; a
    temporary uid missing from the map is an error.  Returns the input
    object when nothing needed relocating.
    """
    changes = {}

    def m(name):
        old = getattr(p, name)
        new = _map_uid(old, mapping)
        if new != old:
            changes[name] = new

    def mfields(name):
        old = getattr(p, name)
        new = tuple((_map_uid(c, mapping), v) for c, v in old)
        if new != old:
            changes[name] = new

    def mtuple(name):
        old = getattr(p, name)
        new = tuple(_map_uid(c, mapping) for c in old)
        if new != old:
            changes[name] = new

    if isinstance(p, PTxHeader):
        if isinstance(p.user, int):
            m("user")
        m("role")
    elif isinstance(p, PColumn):
        m("table")
        m("domain")
    elif isinstance(p, PRecord):
        m("table")
        mfields("fields")
    elif isinstance(p, PUpdate):
        m("table")
        m("row")
        m("prev")
        mfields("fields")
    elif isinstance(p, PDelete):
        m("table")
        m("row")
        m("prev")
    elif isinstance(p, PIndex):
        m("table")
        mtuple("columns")
        if p.ref_table is not None:
            new = _map_uid(p.ref_table, mapping)
            if new != p.ref_table:
                changes["ref_table"] = new
        mtuple("ref_columns")
    elif isinstance(p, PRestView):
        if p.using_table is not None:
            new = _map_uid(p.using_table, mapping)
            if new != p.using_table:
                changes["using_table"] = new
    elif isinstance(p, PGrant):
        m("object")
        m("grantee")
    elif isinstance(p, (PMetadata, PDrop, PAlter)):
        m("object")
    elif isinstance(p, PDomain):
        m("base")
    return replace(p, **changes) if changes else p


def payload_uids(p: Physical):
    """Every uid referenced by a physical's payload (for invariant checks)."""
    out = []
    if isinstance(p, PTxHeader):
        if isinstance(p.user, int):
            out.append(p.user)
        out.append(p.role)
    elif isinstance(p, PColumn):
        out += [p.table, p.domain]
    elif isinstance(p, (PRecord, PUpdate)):
        out.append(p.table)
        out += [c for c, _ in p.fields]
        if isinstance(p, PUpdate):
            out += [p.row, p.prev]
    elif isinstance(p, PDelete):
        out += [p.table, p.row, p.prev]
    elif isinstance(p, PIndex):
        out.append(p.table)
        out += list(p.columns) + list(p.ref_columns)
        if p.ref_table is not None:
            out.append(p.ref_table)
    elif isinstance(p, PRestView):
        if p.using_table is not None:
            out.append(p.using_table)
        out += [d for _, d in p.columns]
    elif isinstance(p, PGrant):
        out += [p.object, p.grantee]
    elif isinstance(p, (PMetadata, PDrop, PAlter)):
        out.append(p.object)
    elif isinstance(p, PDomain):
        out.append(p.base)
    return out
