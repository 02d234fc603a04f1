"""Wire format round-trips, append-only behaviour, and replay."""

import datetime
import os
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyrlite import uids
from pyrlite.errors import (DurableAppendError, EncodingError,
                            LogCorruptionError, RelocationError)
from pyrlite.logfile import (DATA_START, LogFile, layout_transaction,
                             prefix_hash, replay, scan_file)
from pyrlite.physical import (Action, IndexKind, Kind, PAlter, PColumn,
                              PDelete, PDomain, PDrop, PGrant, PIndex,
                              PMetadata, PRecord, PRestView, PRole, PTable,
                              PTxHeader, PUpdate, PUser, PView, decode_physical,
                              encode_physical, payload_uids, relocate)
from pyrlite.values import Real

TMP = uids.TX_BASE

# -- strategies -----------------------------------------------------------

cells = st.one_of(
    st.none(),
    st.booleans(),
    st.integers(-(2**200), 2**200),
    st.builds(Real, st.integers(-(2**64), 2**64), st.integers(-20, 20)),
    st.text(max_size=40),
    st.dates(datetime.date(1, 1, 1), datetime.date(4000, 1, 1)),
)
uid = st.integers(0, 2**40)
name = st.text(min_size=1, max_size=30)
fieldmaps = st.lists(st.tuples(uid, cells), max_size=6).map(tuple)
words = st.lists(st.tuples(st.sampled_from(["CAPTION", "URL", "MIME", "ETAG"]),
                           st.text(max_size=20)), max_size=4).map(tuple)

physicals = st.one_of(
    st.builds(PTxHeader, st.just(0), st.one_of(uid, name), uid,
              st.integers(0, 2**50), st.integers(0, 1000)),
    st.builds(PTable, st.just(0), name, st.lists(name, max_size=3).map(tuple)),
    st.builds(PColumn, st.just(0), uid, name,
              st.sampled_from([uids.DOM_INTEGER, uids.DOM_CHAR, uids.DOM_DATE]),
              st.integers(0, 100), st.booleans(), st.text(max_size=30)),
    st.builds(PRecord, st.just(0), uid, fieldmaps),
    st.builds(PUpdate, st.just(0), uid, uid, uid, fieldmaps),
    st.builds(PDelete, st.just(0), uid, uid, uid),
    st.builds(PIndex, st.just(0), uid, st.sampled_from(list(IndexKind)),
              st.lists(uid, min_size=1, max_size=3).map(tuple),
              st.one_of(st.none(), uid), st.lists(uid, max_size=3).map(tuple),
              st.sampled_from(list(Action)), st.sampled_from(list(Action))),
    st.builds(PView, st.just(0), name, st.text(max_size=120)),
    st.builds(PRestView, st.just(0), name,
              st.lists(st.tuples(name, st.just(uids.DOM_INTEGER)),
                       max_size=4).map(tuple),
              st.text(max_size=40), st.one_of(st.none(), uid), words),
    st.builds(PRole, st.just(0), name),
    st.builds(PUser, st.just(0), name),
    st.builds(PGrant, st.just(0), st.integers(0, 63), uid, uid),
    st.builds(PMetadata, st.just(0), uid, words),
    st.builds(PDomain, st.just(0), st.text(max_size=10),
              st.sampled_from([uids.DOM_CHAR, uids.DOM_NUMERIC]),
              st.integers(0, 30), st.one_of(st.none(), st.integers(-5, 10))),
    st.builds(PDrop, st.just(0), uid),
    st.builds(PAlter, st.just(0), uid, st.text(max_size=80)),
)


@settings(max_examples=1000, deadline=None)
@given(physicals)
def test_roundtrip_every_kind(p):
    data = encode_physical(p)
    assert data[0] == p.kind
    q, nxt = decode_physical(data, 0)
    assert nxt == len(data)
    assert q == p


def test_tag_first_layout():
    assert encode_physical(PTable(0, "T"))[0] == Kind.TABLE


def test_integer_beyond_2040_bits_is_encoding_error():
    ok = PRecord(0, 1, ((2, 2**2040 - 1),))
    encode_physical(ok)
    with pytest.raises(EncodingError):
        encode_physical(PRecord(0, 1, ((2, 2**2040),)))


def test_decode_mid_record_is_corruption():
    data = encode_physical(PView(0, "V", "select 1 from t where x = 'aaaa'"))
    with pytest.raises(LogCorruptionError):
        decode_physical(data, 3)


def test_decode_reports_offset():
    with pytest.raises(LogCorruptionError) as e:
        decode_physical(b"\xff\x00", 0)
    assert e.value.offset == 0


# -- relocation -----------------------------------------------------------

def test_relocate_without_temp_uids_is_identity():
    p = PColumn(TMP + 2, 442, "A", uids.DOM_INTEGER, 0, False, "")
    assert relocate(p, {}) is p


def test_relocate_substitutes_temp_table_uid():
    p = PColumn(TMP + 2, TMP + 1, "A", uids.DOM_INTEGER, 0, False, "")
    q = relocate(p, {TMP + 1: 442})
    assert q.table == 442


def test_relocate_unmapped_temp_uid_fails():
    p = PDelete(TMP + 3, TMP + 1, 10, 10)
    with pytest.raises(RelocationError):
        relocate(p, {})


def test_five_physical_transaction_leaves_no_temp_uids():
    staged = [
        PTable(TMP + 1, "T"),
        PColumn(TMP + 2, TMP + 1, "A", uids.DOM_INTEGER, 0, False, ""),
        PColumn(TMP + 3, TMP + 1, "B", uids.DOM_CHAR, 1, False, ""),
        PIndex(TMP + 4, TMP + 1, IndexKind.PRIMARY, (TMP + 2,)),
        PRecord(TMP + 5, TMP + 1, ((TMP + 2, 1), (TMP + 3, "x"))),
    ]
    out, mapping = layout_transaction(DATA_START, staged, "alice",
                                      uids.PUBLIC_ROLE, 0)
    assert len(mapping) == 5
    for q in out:
        assert uids.is_committed(q.defining_pos)
        for u in payload_uids(q):
            assert not uids.is_temp(u)
    # positions strictly increase and match encoded lengths
    offs = [q.defining_pos for q in out]
    assert offs == sorted(offs) and len(set(offs)) == 5


# -- log file -------------------------------------------------------------

def lay_and_append(log, staged, user="alice", role=uids.PUBLIC_ROLE, clock=1):
    out, _ = layout_transaction(log.length, staged, user, role, clock)
    base = log.append_transaction(out, user, role, clock)
    return base, out


def make_simple_log(path):
    """create table T(A int); insert 1; insert 2; delete the first row."""
    log = LogFile(path)
    _, out1 = lay_and_append(log, [
        PTable(TMP + 1, "T"),
        PColumn(TMP + 2, TMP + 1, "A", uids.DOM_INTEGER, 0, False, ""),
    ])
    t_uid, a_uid = out1[0].defining_pos, out1[1].defining_pos
    _, out2 = lay_and_append(log, [PRecord(TMP + 1, t_uid, ((a_uid, 1),))])
    r1 = out2[0].defining_pos
    lay_and_append(log, [PRecord(TMP + 1, t_uid, ((a_uid, 2),))])
    lay_and_append(log, [PDelete(TMP + 1, t_uid, r1, r1)])
    return log, t_uid, a_uid


def test_empty_commit_rejected(tmp_path):
    log = LogFile(str(tmp_path / "d.pyl"))
    with pytest.raises(DurableAppendError, match="empty commit"):
        log.append_transaction([], "alice", uids.PUBLIC_ROLE, 0)
    assert log.length == DATA_START


def test_append_preserves_prefix(tmp_path):
    path = str(tmp_path / "d.pyl")
    log = LogFile(path)
    lay_and_append(log, [PTable(TMP + 1, "T1")])
    before_len = log.length
    before_hash = prefix_hash(path, before_len)
    lay_and_append(log, [PTable(TMP + 1, "T2")])
    assert log.length > before_len
    assert prefix_hash(path, before_len) == before_hash


def test_two_commits_have_increasing_base(tmp_path):
    log = LogFile(str(tmp_path / "d.pyl"))
    b1, _ = lay_and_append(log, [PTable(TMP + 1, "T1")])
    b2, _ = lay_and_append(log, [PTable(TMP + 1, "T2")])
    assert b2 > b1
    headers = [h for h, _ in scan_file(log.path)]
    assert [h.defining_pos for h in headers] == [b1, b2]


def test_decode_whole_log_offsets_increase(tmp_path):
    log, *_ = make_simple_log(str(tmp_path / "d.pyl"))
    seen = []
    for header, group in scan_file(log.path):
        seen.append(header.defining_pos)
        seen.extend(p.defining_pos for p in group)
    assert seen == sorted(seen) and len(set(seen)) == len(seen)
    # position identity: decode at defining_pos returns the same record
    data = open(log.path, "rb").read()
    for header, group in scan_file(log.path):
        for p in group:
            q, _ = decode_physical(data, p.defining_pos)
            assert q == p


def test_replay_empty_log_is_builtin_only(tmp_path):
    log = LogFile(str(tmp_path / "d.pyl"))
    snap = log.replay()
    kinds = {type(o).__name__ for _, o in snap.objects.items()}
    assert kinds == {"DomainObj", "RoleObj"}
    assert snap.owner is None


def test_replay_insert_insert_delete(tmp_path):
    log, t_uid, a_uid = make_simple_log(str(tmp_path / "d.pyl"))
    snap = log.replay()
    td = snap.table_data(t_uid)
    rows = list(td.rows.items())
    assert len(rows) == 1
    assert rows[0][1].cells[a_uid] == 2


def test_double_replay_is_fixed_point(tmp_path):
    log, *_ = make_simple_log(str(tmp_path / "d.pyl"))
    h1 = log.replay().state_hash()
    h2 = log.replay().state_hash()
    assert h1 == h2


def test_replay_reports_last_good_boundary(tmp_path):
    path = str(tmp_path / "d.pyl")
    log, *_ = make_simple_log(path)
    good = log.length
    with open(path, "ab") as f:
        f.write(b"\x07\x99\x99")  # half an index record
    with pytest.raises(LogCorruptionError) as e:
        replay(path, "d")
    assert e.value.last_good == good


def test_bootstrap_header_defines_user(tmp_path):
    log = LogFile(str(tmp_path / "d.pyl"))
    base, _ = lay_and_append(log, [PTable(TMP + 1, "T")], user="mary")
    snap = log.replay()
    u = snap.user_by_name("mary")
    assert u is not None and u.uid == base
    assert snap.owner == u.uid
    t = snap.obj(snap.resolve(0, "T"))
    assert t.owner == u.uid
