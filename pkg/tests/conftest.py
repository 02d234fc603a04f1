"""Shared fixtures: direct-staged schemas for engine-level tests."""

import pytest

from pyrlite import uids
from pyrlite.engine import Database
from pyrlite.physical import Action, IndexKind, PColumn, PIndex, PRecord, PTable
from pyrlite.snapshot import NS_REL


def stage_table(tx, name, cols, pk=None):
    """cols: [(name, domain_uid, notnull)]; pk: list of column names."""
    tx = tx.stage(PTable(name=name))
    t = tx.last_staged_uid()
    coluids = {}
    for seq, (cname, dom, notnull) in enumerate(cols):
        tx = tx.stage(PColumn(table=t, name=cname, domain=dom, seq=seq,
                              notnull=notnull))
        coluids[cname] = tx.last_staged_uid()
    if pk:
        tx = tx.stage(PIndex(table=t, index_kind=IndexKind.PRIMARY,
                             columns=tuple(coluids[c] for c in pk)))
    return tx, t, coluids


def stage_fk(tx, table, cols, ref_table, ref_cols,
             on_delete=Action.CASCADE, on_update=Action.RESTRICT):
    return tx.stage(PIndex(table=table, index_kind=IndexKind.FOREIGN,
                           columns=tuple(cols), ref_table=ref_table,
                           ref_columns=tuple(ref_cols),
                           update_action=on_update, delete_action=on_delete))


def stage_insert(tx, table, fields):
    """fields: {col_uid: value}"""
    return tx.stage(PRecord(table=table, fields=tuple(fields.items())))


def table_info(snap, name):
    """(table_obj, {colname: uid}) for a committed table."""
    uid = snap.resolve(NS_REL, name)
    table = snap.obj(uid)
    cols = {snap.obj(c).name: c for c in table.columns}
    return table, cols


def rows_of(snap, table_uid):
    return [row.cells for _, row in snap.table_data(table_uid).rows.items()]


@pytest.fixture
def db(tmp_path):
    d = Database(str(tmp_path / "test.pyl"))
    yield d
    d.close()


@pytest.fixture
def parent_child_db(tmp_path):
    """T parent(ID pk) with CHILD(ID pk, P fk->T cascade); 1 parent, 2 children."""
    d = Database(str(tmp_path / "pc.pyl"))
    tx = d.begin("alice")
    tx, t, tcols = stage_table(tx, "PARENT",
                               [("ID", uids.DOM_INTEGER, True),
                                ("NAME", uids.DOM_CHAR, False)], pk=["ID"])
    tx, c, ccols = stage_table(tx, "CHILD",
                               [("ID", uids.DOM_INTEGER, True),
                                ("P", uids.DOM_INTEGER, False)], pk=["ID"])
    tx = stage_fk(tx, c, [ccols["P"]], t, [tcols["ID"]])
    tx = stage_insert(tx, t, {tcols["ID"]: 1, tcols["NAME"]: "root"})
    tx = stage_insert(tx, c, {ccols["ID"]: 10, ccols["P"]: 1})
    tx = stage_insert(tx, c, {ccols["ID"]: 11, ccols["P"]: 1})
    d.commit(tx)
    yield d
    d.close()
