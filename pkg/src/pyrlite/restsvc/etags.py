"""Strong validators for rows and rowsets.

A row's ETag is ``"{defining_pos}-{last_change_pos}"``: it changes exactly
when the row changes, and rows never share one (the defining position is
unique).  A rowset's ETag is the snapshot's log watermark, which moves on
every commit to the database.
"""

from __future__ import annotations

from ..snapshot import DatabaseSnapshot, Row


def row_etag(row_uid: int, row: Row) -> str:
    return f"{row_uid}-{row.last_change}"


def rowset_etag(snap: DatabaseSnapshot) -> str:
    return str(snap.log_watermark)
