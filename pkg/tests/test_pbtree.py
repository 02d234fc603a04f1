"""PTree/PList behaviour against plain-container oracles."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyrlite.pbtree import PList, PTree, node_allocations, verify_shape


def build(pairs, order=8):
    t = PTree.empty(order)
    for k, v in pairs:
        t = t.add(k, v)
    return t


def test_singleton():
    t = PTree.empty().add(5, "a")
    assert t.count == 1
    assert t.get(5) == "a"


def test_add_same_key_replaces():
    t = PTree.empty().add(5, "a").add(5, "b")
    assert t.count == 1
    assert t.get(5) == "b"


def test_get_on_empty():
    assert PTree.empty().get(1) is None
    assert 1 not in PTree.empty()


def test_remove_to_empty():
    t = PTree.empty().add(5, "a").remove(5)
    assert t.count == 0
    assert list(t.items()) == []


def test_remove_absent_returns_same_tree():
    t = build([(1, "a"), (2, "b")])
    assert t.remove(99) is t


def test_persistence_of_old_version():
    t1 = build((k, k) for k in range(100))
    snapshot = list(t1.items())
    t2 = t1.add(1000, "x").remove(5).add(7, "y")
    assert list(t1.items()) == snapshot
    assert t2.get(5) is None and t2.get(7) == "y"


def test_cross_kind_key_comparison_rejected():
    t = build([(1, "a")])
    with pytest.raises(TypeError):
        t.add("x", "b")
    with pytest.raises(TypeError):
        build([("a", 1)]).get(5)


def test_composite_tuple_keys_order_lexicographically():
    t = build([((2, 1), "b"), ((1, 9), "a"), ((2, 0), "c")])
    assert list(t.keys()) == [(1, 9), (2, 0), (2, 1)]


def test_bulk_load_matches_dict_oracle():
    rng = random.Random(42)
    oracle = {}
    t = PTree.empty(8)
    for _ in range(10000):
        k = rng.randrange(4000)
        t = t.add(k, k * 3)
        oracle[k] = k * 3
    for k in range(4000):
        assert t.get(k) == oracle.get(k)
    assert list(t.items()) == sorted(oracle.items())
    assert verify_shape(t) == []


def test_random_removal_matches_oracle():
    rng = random.Random(9)
    keys = list(range(10000))
    t = build((k, str(k)) for k in keys)
    gone = rng.sample(keys, 5000)
    for k in gone:
        t = t.remove(k)
    left = sorted(set(keys) - set(gone))
    assert list(t.keys()) == left
    assert t.count == len(left)
    assert verify_shape(t) == []


# -- structural sharing -------------------------------------------------


def test_insert_into_10000_tree_allocates_few_nodes():
    t = build(((k, str(k)) for k in range(1, 10001)), order=8)
    walk_before = list(t.items())
    before = node_allocations()
    t2 = t.add(10001, "x")
    allocated = node_allocations() - before
    assert allocated <= 7
    assert list(t.items()) == walk_before  # pre-insert tree untouched
    assert t2.count == 10001


@settings(max_examples=60)
@given(st.lists(st.integers(0, 500), min_size=1, max_size=300))
def test_add_allocation_bound(keys):
    # Path copy plus at most one split per level plus a new root.
    t = PTree.empty(4)
    for k in keys:
        d = t.depth()
        before = node_allocations()
        t = t.add(k, k)
        assert node_allocations() - before <= 2 * d + 2
    assert verify_shape(t) == []


@settings(max_examples=40)
@given(st.lists(st.tuples(st.booleans(), st.integers(0, 120)), max_size=300))
def test_shape_and_oracle_under_mixed_ops(ops):
    t = PTree.empty(2)
    oracle = {}
    for is_add, k in ops:
        if is_add:
            t = t.add(k, k)
            oracle[k] = k
        else:
            t = t.remove(k)
            oracle.pop(k, None)
        assert verify_shape(t) == []
    assert list(t.items()) == sorted(oracle.items())


# -- bookmarks -----------------------------------------------------------


def test_seek_on_empty():
    assert PTree.empty().first() is None
    assert PTree.empty().seek(0) is None


def test_seek_lands_on_next_key():
    t = build([(1, "a"), (3, "b"), (5, "c")])
    bm = t.seek(2)
    assert bm.key == 3
    assert t.seek(6) is None
    assert t.seek(5).key == 5


def test_step_past_last_is_absent():
    t = build([(1, "a")])
    assert t.first().next() is None
    assert t.first().prev() is None


def test_forward_then_backward_walk_reverses():
    t = build((k, -k) for k in range(257))
    fwd = []
    bm = t.first()
    while bm is not None:
        fwd.append((bm.key, bm.value))
        bm = bm.next()
    back = []
    bm = t.last()
    while bm is not None:
        back.append((bm.key, bm.value))
        bm = bm.prev()
    assert fwd == list(t.items())
    assert back == list(reversed(fwd))


def test_bookmark_ignores_later_versions():
    t = build((k, k) for k in range(0, 100, 2))
    frozen = list(t.items())
    bm = t.first()
    seen = []
    newer = t
    while bm is not None:
        seen.append((bm.key, bm.value))
        newer = newer.add(bm.key + 1, "interloper")  # odd keys, never visible
        bm = bm.next()
    assert seen == frozen


def test_interleaved_walk_equals_snapshot_copy_oracle():
    rng = random.Random(1)
    t = build((k, k) for k in range(500))
    oracle = list(t.items())
    bm = t.first()
    walked = []
    current = t
    for _ in range(100):
        current = current.add(rng.randrange(2000), "noise")
    while bm is not None:
        walked.append((bm.key, bm.value))
        current = current.add(rng.randrange(2000), "noise")
        bm = bm.next()
    assert walked == oracle


def test_order_of_walk_strictly_ascending():
    rng = random.Random(3)
    t = build((rng.randrange(10**6), 0) for _ in range(3000))
    ks = list(t.keys())
    assert all(a < b for a, b in zip(ks, ks[1:]))


# -- PList ---------------------------------------------------------------


def test_plist_remove_shifts_down():
    pl = PList.from_iterable(["a", "b", "c"])
    pl2 = pl.remove_at(1)
    assert list(pl2) == ["a", "c"]
    assert pl2.get(1) == "c"
    assert list(pl) == ["a", "b", "c"]


def test_plist_remove_last_element():
    pl = PList.from_iterable(["a"]).remove_at(0)
    assert len(pl) == 0
    assert list(pl) == []


def test_plist_out_of_range():
    pl = PList.from_iterable(["a"])
    with pytest.raises(IndexError):
        pl.remove_at(1)
    with pytest.raises(IndexError):
        pl.get(-1)
    with pytest.raises(IndexError):
        pl.insert_at(3, "x")


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 40)), max_size=120))
def test_plist_matches_array_oracle(ops):
    pl = PList()
    oracle = []
    for op, arg in ops:
        if op == 0:
            pl = pl.append(arg)
            oracle.append(arg)
        elif op == 1 and oracle:
            pos = arg % len(oracle)
            pl = pl.remove_at(pos)
            oracle.pop(pos)
        elif op == 2:
            pos = arg % (len(oracle) + 1)
            pl = pl.insert_at(pos, arg)
            oracle.insert(pos, arg)
        assert list(pl) == oracle
        # density: backing keys are exactly 0..count-1
        assert list(pl._tree.keys()) == list(range(len(oracle)))
