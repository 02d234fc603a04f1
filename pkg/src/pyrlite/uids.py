"""64-bit uid ranges.

Every database object is identified by a 64-bit uid.  Committed objects use
their byte offset in the log file; everything else lives in reserved ranges
decidable from the value alone:

    [0, 4*2^60)          committed file positions
    [4*2^60, 5*2^60)     transaction-temporary (staged, pre-relocation)
    [5*2^60, 6*2^60)     session-lifetime (reserved)
    [6*2^60, 7*2^60)     compiled objects (built at load, not in the file)
    >= 7*2^60            heap/instance (per-query plan instancing)
    < 0                  built-in domains
"""

from __future__ import annotations

TX_BASE = 4 << 60
SESSION_BASE = 5 << 60
COMPILED_BASE = 6 << 60
HEAP_BASE = 7 << 60


def is_committed(uid: int) -> bool:
    return 0 <= uid < TX_BASE


def is_temp(uid: int) -> bool:
    return TX_BASE <= uid < SESSION_BASE


def is_session(uid: int) -> bool:
    return SESSION_BASE <= uid < COMPILED_BASE


def is_compiled(uid: int) -> bool:
    return COMPILED_BASE <= uid < HEAP_BASE


def is_heap(uid: int) -> bool:
    return uid >= HEAP_BASE


def is_builtin(uid: int) -> bool:
    return uid < 0


# Built-in domain uids.
DOM_INTEGER = -1
DOM_CHAR = -2
DOM_BOOLEAN = -3
DOM_DATE = -4
DOM_NUMERIC = -5
DOM_NULL = -6

# Built-in roles.  PUBLIC is usable by everyone; the schema role is the
# database owner's default definer context.
PUBLIC_ROLE = -100
SCHEMA_ROLE = -101

BUILTIN_DOMAINS = {
    DOM_INTEGER: "INT",
    DOM_CHAR: "CHAR",
    DOM_BOOLEAN: "BOOLEAN",
    DOM_DATE: "DATE",
    DOM_NUMERIC: "NUMERIC",
    DOM_NULL: "NULL",
}
