"""Transaction lifecycle, conflict validation, constraints, privileges."""

import pytest

from pyrlite import uids
from pyrlite.engine import (Database, check_privilege, generate_class_model,
                            next_autokey, validate)
from pyrlite.errors import (AuthorizationError, ConstraintError,
                            TransactionConflict)
from pyrlite.logfile import replay
from pyrlite.physical import (Action, PDelete, PGrant, PRecord, PRole,
                              PUpdate, PUser, Priv)
from pyrlite.snapshot import NS_REL, NS_ROLE

from conftest import (rows_of, stage_fk, stage_insert, stage_table,
                      table_info)


def simple_db(db):
    """T(ID pk, N int, S char) with three rows."""
    tx = db.begin("alice")
    tx, t, cols = stage_table(tx, "T", [("ID", uids.DOM_INTEGER, True),
                                        ("N", uids.DOM_INTEGER, False),
                                        ("S", uids.DOM_CHAR, False)], pk=["ID"])
    for i in (1, 2, 3):
        tx = stage_insert(tx, t, {cols["ID"]: i, cols["N"]: i * 10})
    db.commit(tx)
    return table_info(db.snapshot, "T")


def row_uid_for(db, table, cols, key):
    td = db.snapshot.table_data(table.uid)
    for uid, row in td.rows.items():
        if row.cells.get(cols["ID"]) == key:
            return uid
    raise AssertionError("row not found")


# -- lifecycle ------------------------------------------------------------

def test_begin_on_empty_database(db):
    tx = db.begin("alice")
    assert tx.staged == ()
    assert list(tx.read_tables.items()) == []
    assert tx.base is db.snapshot


def test_snapshot_isolation_across_commits(db):
    table, cols = simple_db(db)
    tx = db.begin("alice")
    tx2 = db.begin("alice")
    tx2 = stage_insert(tx2, table.uid, {cols["ID"]: 4})
    db.commit(tx2)
    # tx still sees three rows
    assert len(list(tx.effective.table_data(table.uid).rows.items())) == 3
    assert len(list(db.snapshot.table_data(table.uid).rows.items())) == 4


def test_read_your_own_writes(db):
    table, cols = simple_db(db)
    tx = db.begin("alice")
    tx = stage_insert(tx, table.uid, {cols["ID"]: 9, cols["S"]: "mine"})
    mine = [r for r in rows_of(tx.effective, table.uid)
            if r.get(cols["ID"]) == 9]
    assert mine and mine[0][cols["S"]] == "mine"
    # invisible to a fresh transaction
    assert all(r.get(cols["ID"]) != 9 for r in rows_of(db.begin("alice").effective, table.uid))


def test_temp_uids_strictly_increase(db):
    table, cols = simple_db(db)
    tx = db.begin("alice")
    tx = stage_insert(tx, table.uid, {cols["ID"]: 5})
    tx = stage_insert(tx, table.uid, {cols["ID"]: 6})
    a, b = tx.staged[-2].defining_pos, tx.staged[-1].defining_pos
    assert uids.is_temp(a) and uids.is_temp(b) and b == a + 1


def test_read_only_commit_is_noop(db):
    simple_db(db)
    before = db.log.length
    tx = db.begin("alice")
    snap, pos = db.commit(tx)
    assert pos is None and db.log.length == before


# -- conflict granularity ---------------------------------------------------

def test_disjoint_row_writers_both_commit(db):
    table, cols = simple_db(db)
    r1 = row_uid_for(db, table, cols, 1)
    r2 = row_uid_for(db, table, cols, 2)
    t1 = db.begin("alice")
    t2 = db.begin("alice")
    t1 = t1.note_read(table.uid, columns={cols["N"]}, rows={r1})
    t1 = t1.stage(PUpdate(table=table.uid, row=r1, prev=r1,
                          fields=((cols["N"], 111),)))
    t2 = t2.note_read(table.uid, columns={cols["N"]}, rows={r2})
    t2 = t2.stage(PUpdate(table=table.uid, row=r2, prev=r2,
                          fields=((cols["N"], 222),)))
    db.commit(t1)
    db.commit(t2)  # must not raise
    vals = sorted(r[cols["N"]] for r in rows_of(db.snapshot, table.uid))
    assert vals == [30, 111, 222]


def test_row_read_vs_update_conflicts(db):
    table, cols = simple_db(db)
    r1 = row_uid_for(db, table, cols, 1)
    t1 = db.begin("alice")
    t1 = t1.note_read(table.uid, columns={cols["N"]}, rows={r1})
    t1 = stage_insert(t1, table.uid, {cols["ID"]: 50})   # writes elsewhere
    t2 = db.begin("alice")
    t2 = t2.note_read(table.uid, columns={cols["N"]}, rows={r1})
    t2 = t2.stage(PUpdate(table=table.uid, row=r1, prev=r1,
                          fields=((cols["N"], 999),)))
    db.commit(t2)
    with pytest.raises(TransactionConflict) as e:
        db.commit(t1)
    assert e.value.report.reason == "row-read-updated"
    assert e.value.report.conflicting_object == r1


def test_unread_column_update_does_not_conflict(db):
    table, cols = simple_db(db)
    r1 = row_uid_for(db, table, cols, 1)
    t1 = db.begin("alice")
    t1 = t1.note_read(table.uid, columns={cols["S"]}, rows={r1})
    t1 = stage_insert(t1, table.uid, {cols["ID"]: 50})
    t2 = db.begin("alice")
    t2 = t2.stage(PUpdate(table=table.uid, row=r1, prev=r1,
                          fields=((cols["N"], 999),)))   # different column
    db.commit(t2)
    db.commit(t1)   # no conflict: column granularity


def test_whole_table_read_vs_insert_conflicts(db):
    table, cols = simple_db(db)
    t1 = db.begin("alice")
    t1 = t1.note_read(table.uid, columns={cols["N"]}, whole=True)
    t1 = stage_insert(t1, table.uid, {cols["ID"]: 60})
    t2 = db.begin("alice")
    t2 = stage_insert(t2, table.uid, {cols["ID"]: 61})
    db.commit(t2)
    with pytest.raises(TransactionConflict) as e:
        db.commit(t1)
    assert e.value.report.reason == "column-read-updated"


def test_write_write_same_row_conflicts(db):
    table, cols = simple_db(db)
    r1 = row_uid_for(db, table, cols, 1)
    t1 = db.begin("alice")
    t1 = t1.stage(PUpdate(table=table.uid, row=r1, prev=r1,
                          fields=((cols["N"], 1),)))
    t2 = db.begin("alice")
    t2 = t2.stage(PDelete(table=table.uid, row=r1, prev=r1))
    db.commit(t2)
    with pytest.raises(TransactionConflict):
        db.commit(t1)


def test_conflicting_commit_writes_nothing(db):
    table, cols = simple_db(db)
    r1 = row_uid_for(db, table, cols, 1)
    t1 = db.begin("alice")
    t1 = t1.note_read(table.uid, columns={cols["N"]}, rows={r1})
    t1 = stage_insert(t1, table.uid, {cols["ID"]: 70})
    t2 = db.begin("alice")
    t2 = t2.stage(PUpdate(table=table.uid, row=r1, prev=r1,
                          fields=((cols["N"], 2),)))
    db.commit(t2)
    length = db.log.length
    state = db.snapshot.state_hash()
    with pytest.raises(TransactionConflict):
        db.commit(t1)
    assert db.log.length == length
    assert db.snapshot.state_hash() == state


def test_serial_execution_oracle_for_disjoint_writers(tmp_path):
    # Running the two disjoint-row updates in either serial order yields the
    # same final state as the concurrent run.
    def run(order):
        d = Database(str(tmp_path / f"o{order}.pyl"))
        table, cols = simple_db(d)
        r1 = row_uid_for(d, table, cols, 1)
        r2 = row_uid_for(d, table, cols, 2)
        ops = [(r1, 111), (r2, 222)]
        if order:
            ops.reverse()
        for row, val in ops:
            t = d.begin("alice")
            t = t.stage(PUpdate(table=table.uid, row=row, prev=row,
                                fields=((cols["N"], val),)))
            d.commit(t)
        rows = sorted((r[cols["ID"]], r.get(cols["N"]))
                      for r in rows_of(d.snapshot, table.uid))
        d.close()
        return rows
    assert run(0) == run(1)


def test_validate_is_pure_report():
    from pyrlite.engine import OK_REPORT
    assert OK_REPORT.ok


# -- replay equivalence ------------------------------------------------------

def test_replay_matches_live_snapshot(db):
    table, cols = simple_db(db)
    tx = db.begin("alice")
    r2 = row_uid_for(db, table, cols, 2)
    tx = tx.stage(PUpdate(table=table.uid, row=r2, prev=r2,
                          fields=((cols["S"], "two"),)))
    tx = tx.stage(PDelete(table=table.uid,
                          row=row_uid_for(db, table, cols, 3), prev=0))
    db.commit(tx)
    cold = replay(db.log.path, db.name)
    assert cold.state_hash() == db.snapshot.state_hash()


# -- constraints -------------------------------------------------------------

def test_duplicate_pk_rejected(db):
    table, cols = simple_db(db)
    tx = db.begin("alice")
    tx = stage_insert(tx, table.uid, {cols["ID"]: 1})
    with pytest.raises(ConstraintError, match="primary key"):
        db.commit(tx)


def test_concurrent_duplicate_pk_is_conflict(db):
    table, cols = simple_db(db)
    t1 = db.begin("alice")
    t1 = stage_insert(t1, table.uid, {cols["ID"]: 77})
    t2 = db.begin("alice")
    t2 = stage_insert(t2, table.uid, {cols["ID"]: 77})
    db.commit(t2)
    with pytest.raises(TransactionConflict):
        db.commit(t1)


def test_not_null_pk_enforced(db):
    table, cols = simple_db(db)
    tx = db.begin("alice")
    tx = stage_insert(tx, table.uid, {cols["N"]: 5})
    with pytest.raises(ConstraintError, match="may not be NULL"):
        db.commit(tx)


def test_fk_insert_must_match_parent(parent_child_db):
    d = parent_child_db
    child, ccols = table_info(d.snapshot, "CHILD")
    tx = d.begin("alice")
    tx = stage_insert(tx, child.uid, {ccols["ID"]: 12, ccols["P"]: 99})
    with pytest.raises(ConstraintError, match="foreign key"):
        d.commit(tx)
    # NULL foreign key is no reference, allowed
    tx = d.begin("alice")
    tx = stage_insert(tx, child.uid, {ccols["ID"]: 13})
    d.commit(tx)


def test_delete_parent_cascades_one_delete_per_child(parent_child_db):
    d = parent_child_db
    parent, pcols = table_info(d.snapshot, "PARENT")
    child, _ = table_info(d.snapshot, "CHILD")
    proot = next(uid for uid, r in d.snapshot.table_data(parent.uid).rows.items())
    tx = d.begin("alice")
    tx = tx.stage(PDelete(table=parent.uid, row=proot, prev=proot))
    d.commit(tx)
    assert rows_of(d.snapshot, parent.uid) == []
    assert rows_of(d.snapshot, child.uid) == []
    # log shows the cascade: one Delete per child plus the parent's
    deletes = [p for _, _, group in d._ring for p in group
               if isinstance(p, PDelete)]
    assert len(deletes) == 3


def test_delete_parent_with_restrict_child(db):
    tx = db.begin("alice")
    tx, t, tcols = stage_table(tx, "P2", [("ID", uids.DOM_INTEGER, True)],
                               pk=["ID"])
    tx, c, ccols = stage_table(tx, "C2", [("ID", uids.DOM_INTEGER, True),
                                          ("P", uids.DOM_INTEGER, False)],
                               pk=["ID"])
    tx = stage_fk(tx, c, [ccols["P"]], t, [tcols["ID"]],
                  on_delete=Action.RESTRICT)
    tx = stage_insert(tx, t, {tcols["ID"]: 1})
    tx = stage_insert(tx, c, {ccols["ID"]: 2, ccols["P"]: 1})
    db.commit(tx)
    parent, pcols = table_info(db.snapshot, "P2")
    proot = next(uid for uid, _ in db.snapshot.table_data(parent.uid).rows.items())
    length = db.log.length
    tx = db.begin("alice")
    tx = tx.stage(PDelete(table=parent.uid, row=proot, prev=proot))
    with pytest.raises(ConstraintError, match="references the deleted row") as e:
        db.commit(tx)
    assert e.value.constraint == "foreign key"
    assert db.log.length == length


def test_set_null_action(db):
    tx = db.begin("alice")
    tx, t, tcols = stage_table(tx, "P3", [("ID", uids.DOM_INTEGER, True)],
                               pk=["ID"])
    tx, c, ccols = stage_table(tx, "C3", [("ID", uids.DOM_INTEGER, True),
                                          ("P", uids.DOM_INTEGER, False)],
                               pk=["ID"])
    tx = stage_fk(tx, c, [ccols["P"]], t, [tcols["ID"]],
                  on_delete=Action.SET_NULL)
    tx = stage_insert(tx, t, {tcols["ID"]: 1})
    tx = stage_insert(tx, c, {ccols["ID"]: 2, ccols["P"]: 1})
    db.commit(tx)
    parent, _ = table_info(db.snapshot, "P3")
    child, ccols = table_info(db.snapshot, "C3")
    proot = next(uid for uid, _ in db.snapshot.table_data(parent.uid).rows.items())
    tx = db.begin("alice")
    tx = tx.stage(PDelete(table=parent.uid, row=proot, prev=proot))
    db.commit(tx)
    rows = rows_of(db.snapshot, child.uid)
    assert len(rows) == 1 and rows[0].get(ccols["P"]) is None


def test_autokey_assignment(db):
    table, cols = simple_db(db)
    assert next_autokey(db.snapshot, table) == 4
    tx = db.begin("alice")
    tx2, t2, c2 = stage_table(tx, "EMPTYT", [("ID", uids.DOM_INTEGER, True)],
                              pk=["ID"])
    db.commit(tx2)
    t2obj, _ = table_info(db.snapshot, "EMPTYT")
    assert next_autokey(db.snapshot, t2obj) == 1


# -- users, roles, privileges -------------------------------------------------

def test_unknown_user_rejected_once_db_has_owner(db):
    simple_db(db)   # alice became owner
    with pytest.raises(AuthorizationError, match="unknown user"):
        db.begin("mallory")


def test_ungranted_role_rejected(db):
    simple_db(db)
    tx = db.begin("alice")
    tx = tx.stage(PRole(name="AUDIT"))
    tx = tx.stage(PUser(name="bob"))
    db.commit(tx)
    with pytest.raises(AuthorizationError, match="not been granted"):
        db.begin("bob", "AUDIT")
    # owner may use the role they created
    db.begin("alice", "AUDIT")
    # grant usage to bob, then fine
    role_uid = db.snapshot.resolve(NS_ROLE, "AUDIT")
    bob = db.snapshot.user_by_name("bob")
    tx = db.begin("alice")
    tx = tx.stage(PGrant(privileges=Priv.USAGE, object=role_uid,
                         grantee=bob.uid))
    db.commit(tx)
    db.begin("bob", "AUDIT")


def test_owner_always_allowed_public_grant_opens_select(db):
    table, cols = simple_db(db)
    tx = db.begin("alice")
    tx = tx.stage(PUser(name="bob"))
    db.commit(tx)
    snap = db.snapshot
    alice = snap.user_by_name("alice")
    bob = snap.user_by_name("bob")
    assert check_privilege(snap, alice.uid, uids.PUBLIC_ROLE, table.uid,
                           Priv.SELECT)
    assert not check_privilege(snap, bob.uid, uids.PUBLIC_ROLE, table.uid,
                               Priv.SELECT)
    tx = db.begin("alice")
    tx = tx.stage(PGrant(privileges=Priv.SELECT, object=table.uid,
                         grantee=uids.PUBLIC_ROLE))
    db.commit(tx)
    assert check_privilege(db.snapshot, bob.uid, uids.PUBLIC_ROLE, table.uid,
                           Priv.SELECT)
    assert not check_privilege(db.snapshot, bob.uid, uids.PUBLIC_ROLE,
                               table.uid, Priv.DELETE)


def test_privilege_failure_on_note_read(db):
    table, cols = simple_db(db)
    tx = db.begin("alice")
    tx = tx.stage(PUser(name="bob"))
    db.commit(tx)
    tx = db.begin("bob")
    with pytest.raises(AuthorizationError, match="no SELECT privilege"):
        tx.note_read(table.uid, columns={cols["N"]}, whole=True)


def test_revoke_never_widens(db):
    table, _ = simple_db(db)
    tx = db.begin("alice")
    tx = tx.stage(PUser(name="bob"))
    tx = tx.stage(PGrant(privileges=Priv.SELECT | Priv.INSERT,
                         object=table.uid, grantee=uids.PUBLIC_ROLE))
    db.commit(tx)
    bob = db.snapshot.user_by_name("bob")
    assert check_privilege(db.snapshot, bob.uid, uids.PUBLIC_ROLE, table.uid,
                           Priv.INSERT)
    # revoke = replace mask with the narrowed set
    tx = db.begin("alice")
    tx = tx.stage(PGrant(privileges=Priv.SELECT, object=table.uid,
                         grantee=uids.PUBLIC_ROLE))
    db.commit(tx)
    assert not check_privilege(db.snapshot, bob.uid, uids.PUBLIC_ROLE,
                               table.uid, Priv.INSERT)
    assert check_privilege(db.snapshot, bob.uid, uids.PUBLIC_ROLE, table.uid,
                           Priv.SELECT)


# -- class models --------------------------------------------------------------

@pytest.fixture
def customer_order_db(tmp_path):
    d = Database(str(tmp_path / "co.pyl"))
    tx = d.begin("alice")
    tx, cust, ccols = stage_table(tx, "Customer",
                                  [("ID", uids.DOM_INTEGER, True),
                                   ("NAME", uids.DOM_CHAR, False)], pk=["ID"])
    tx, order, ocols = stage_table(tx, "Order",
                                   [("ID", uids.DOM_INTEGER, True),
                                    ("CUST", uids.DOM_INTEGER, False)],
                                   pk=["ID"])
    tx = stage_fk(tx, order, [ocols["CUST"]], cust, [ccols["ID"]])
    d.commit(tx)
    yield d
    d.close()


def test_class_model_navigation(customer_order_db):
    d = customer_order_db
    cust, _ = table_info(d.snapshot, "Customer")
    order, _ = table_info(d.snapshot, "Order")
    alice = d.snapshot.user_by_name("alice")
    cm = generate_class_model(d.snapshot, uids.PUBLIC_ROLE, cust.uid,
                              user=alice.uid)
    om = generate_class_model(d.snapshot, uids.PUBLIC_ROLE, order.uid,
                              user=alice.uid)
    nav_c = {(n["name"], n["via"]) for n in cm["navigation"]}
    nav_o = {(n["name"], n["via"]) for n in om["navigation"]}
    assert ("orders", "CUST") in nav_c
    assert ("customer", "ID") in nav_o
    assert cm["defining_pos"] == cust.uid
    assert cm["schema_key"] == cust.schema_key
    autokeys = [c for c in cm["columns"] if c["autokey"]]
    assert [c["name"] for c in autokeys] == ["ID"]


def test_class_model_no_fk_no_navigation(db):
    table, _ = simple_db(db)
    alice = db.snapshot.user_by_name("alice")
    m = generate_class_model(db.snapshot, uids.PUBLIC_ROLE, table.uid,
                             user=alice.uid)
    assert m["navigation"] == []
