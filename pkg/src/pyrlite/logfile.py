"""The append-only transaction log: the only durable artifact.

File layout: 8 magic bytes ``PYRLITE1``, a format-version byte ``0x01``,
then committed transactions back to back.  Each transaction is one
TX_HEADER physical followed by exactly ``header.count`` physicals, written
contiguously, so the file is self-describing and the byte offset of each
record is its permanent uid.

There is exactly one appender per file (the engine's commit lock); readers
may read any prefix below the committed watermark at any time.
"""

from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import replace
from typing import Dict, Iterator, List, Tuple

from .errors import DurableAppendError, LogCorruptionError
from .physical import (Kind, PTxHeader, Physical, decode_physical,
                       encode_physical, relocate)
from .snapshot import DatabaseSnapshot

MAGIC = b"PYRLITE1"
VERSION = 1
DATA_START = len(MAGIC) + 1


class LogFile:
    """Appender/reader for one ``<name>.pyl`` log file."""

    def __init__(self, path: str, fsync: bool = False):
        self.path = path
        self.fsync = fsync
        self._lock = threading.Lock()
        if not os.path.exists(path):
            with open(path, "xb") as f:
                f.write(MAGIC + bytes([VERSION]))
                f.flush()
        else:
            with open(path, "rb") as f:
                head = f.read(DATA_START)
            if head[:8] != MAGIC:
                raise LogCorruptionError(f"{path}: bad magic", offset=0)
            if head[8] != VERSION:
                raise LogCorruptionError(
                    f"{path}: unsupported format version {head[8]}", offset=8)
        self._fh = open(path, "ab")
        self._length = os.path.getsize(path)

    @property
    def length(self) -> int:
        return self._length

    def close(self):
        self._fh.close()

    def append_transaction(self, physicals: List[Physical], user, role: int,
                           clock_us: int) -> int:
        """Write one commit contiguously; returns the header's position.

        The physicals must already be relocated: their defining positions
        are recomputed here and verified against the payload layout.
        """
        if not physicals:
            raise DurableAppendError("empty commit")
        with self._lock:
            base = self._length
            header = PTxHeader(base, user, role, clock_us, len(physicals))
            buf = bytearray(encode_physical(header))
            off = base + len(buf)
            for p in physicals:
                if p.defining_pos != off:
                    raise DurableAppendError(
                        f"physical at {p.defining_pos} expected offset {off}")
                enc = encode_physical(p)
                buf += enc
                off += len(enc)
            try:
                self._fh.write(bytes(buf))
                self._fh.flush()
                if self.fsync:
                    os.fsync(self._fh.fileno())
            except OSError as e:
                raise DurableAppendError(f"append failed: {e}") from e
            self._length = off
            return base

    # -- reading ----------------------------------------------------------

    def read_bytes(self, upto: int | None = None) -> bytes:
        with open(self.path, "rb") as f:
            return f.read(upto if upto is not None else -1)

    def scan(self) -> Iterator[Tuple[PTxHeader, List[Physical]]]:
        return scan_file(self.path)

    def replay(self, name: str | None = None) -> DatabaseSnapshot:
        if name is None:
            name = os.path.splitext(os.path.basename(self.path))[0]
        return replay(self.path, name)


def scan_file(path: str) -> Iterator[Tuple[PTxHeader, List[Physical]]]:
    """Yield (header, physicals) per committed transaction, in file order."""
    data = open(path, "rb").read()
    if data[:8] != MAGIC:
        raise LogCorruptionError(f"{path}: bad magic", offset=0)
    pos = DATA_START
    last_good = DATA_START
    while pos < len(data):
        try:
            header, nxt = decode_physical(data, pos)
            if header.kind != Kind.TX_HEADER:
                raise LogCorruptionError(
                    f"expected transaction header at {pos}", offset=pos)
            group = []
            for _ in range(header.count):
                p, nxt = decode_physical(data, nxt)
                if p.kind == Kind.TX_HEADER:
                    raise LogCorruptionError(
                        f"header inside transaction at {p.defining_pos}",
                        offset=p.defining_pos)
                group.append(p)
        except LogCorruptionError as e:
            raise LogCorruptionError(str(e), offset=e.offset,
                                     last_good=last_good) from None
        yield header, group
        pos = nxt
        last_good = nxt


def replay(path: str, name: str) -> DatabaseSnapshot:
    """Rebuild the live database by installing every physical in file order."""
    snap = DatabaseSnapshot.empty(name)
    end = DATA_START
    for header, group in scan_file(path):
        snap, user = snap.install_header(header)
        for p in group:
            snap = snap.install(p, user, header.role)
            end = p.defining_pos
        end = max(end, header.defining_pos)
    size = os.path.getsize(path)
    return snap._with(log_watermark=size)


def layout_transaction(base: int, physicals: List[Physical], user, role: int,
                       clock_us: int) -> Tuple[List[Physical], Dict[int, int]]:
    """Relocate staged physicals to their final file positions.

    A staged physical carries its transaction-temporary uid in
    ``defining_pos``; positions are assigned in order starting right after
    the header, so every payload reference to an earlier physical of the
    same commit resolves backwards.  Returns the relocated list and the
    temp-uid -> position map.
    """
    header = PTxHeader(base, user, role, clock_us, len(physicals))
    off = base + len(encode_physical(header))
    mapping: Dict[int, int] = {}
    out = []
    for p in physicals:
        mapping[p.defining_pos] = off
        q = replace(relocate(p, mapping), defining_pos=off)
        out.append(q)
        off += len(encode_physical(q))
    return out, mapping


def prefix_hash(path: str, length: int) -> str:
    """sha256 of the first ``length`` bytes (append-only verification)."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        remaining = length
        while remaining > 0:
            chunk = f.read(min(1 << 16, remaining))
            if not chunk:
                break
            h.update(chunk)
            remaining -= len(chunk)
    return h.hexdigest()
