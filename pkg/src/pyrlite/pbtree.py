"""Immutable B-tree (PTree) and positional list (PList).

Every mutation returns a new tree that shares all unchanged nodes with its
input, so a reference to a tree is a stable snapshot: nothing done to newer
versions is ever visible through it.  Values live only in the leaves; every
node except the root carries between n and 2n entries/children.

Traversal uses bookmarks: a bookmark holds the full path from the root it
was created from down to one leaf entry, and can step both ways.  Because
the path pins the original nodes, a bookmark keeps walking its own version
of the tree no matter what is added or removed later.

Keys are restricted to a closed set of orderable kinds (integers, exact
decimals, strings, dates, and tuples of those compared lexicographically);
comparing across kinds raises TypeError rather than inventing an order.
"""

from __future__ import annotations

from typing import Any, Iterator, Optional, Tuple

from .values import compare

DEFAULT_ORDER = 8

# Test hook: total nodes constructed since import.  Read it before and after
# an operation to measure structural sharing.
_allocations = 0


def node_allocations() -> int:
    return _allocations


class _Leaf:
    __slots__ = ("keys", "vals")

    def __init__(self, keys: tuple, vals: tuple):
        global _allocations
        _allocations += 1
        self.keys = keys
        self.vals = vals

    @property
    def size(self) -> int:
        return len(self.keys)

    @property
    def maxkey(self):
        return self.keys[-1]


class _Inner:
    __slots__ = ("maxkeys", "children")

    def __init__(self, maxkeys: tuple, children: tuple):
        global _allocations
        _allocations += 1
        self.maxkeys = maxkeys  # maxkeys[i] == greatest key under children[i]
        self.children = children

    @property
    def size(self) -> int:
        return len(self.children)

    @property
    def maxkey(self):
        return self.maxkeys[-1]


def _leaf_pos(leaf: _Leaf, key) -> Tuple[int, bool]:
    """(index of first entry >= key, exact-match flag)."""
    for i, k in enumerate(leaf.keys):
        c = compare(key, k)
        if c == 0:
            return i, True
        if c < 0:
            return i, False
    return len(leaf.keys), False


def _child_for(node: _Inner, key) -> int:
    """Child to descend into: first child whose maxkey >= key, else last."""
    for i, mk in enumerate(node.maxkeys):
        if compare(key, mk) <= 0:
            return i
    return len(node.children) - 1


class Bookmark:
    """Immutable position at one leaf entry of one fixed tree version."""

    __slots__ = ("_path",)

    def __init__(self, path: tuple):
        self._path = path  # ((inner, child_idx), ..., (leaf, entry_idx))

    @property
    def key(self):
        leaf, i = self._path[-1]
        return leaf.keys[i]

    @property
    def value(self):
        leaf, i = self._path[-1]
        return leaf.vals[i]

    def step(self, direction: int) -> Optional["Bookmark"]:
        """Next (+1) or previous (-1) entry under this bookmark's root."""
        if direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        path = list(self._path)
        leaf, i = path[-1]
        j = i + direction
        if 0 <= j < leaf.size:
            path[-1] = (leaf, j)
            return Bookmark(tuple(path))
        # Ascend to the first ancestor with a sibling in that direction.
        path.pop()
        while path:
            node, idx = path[-1]
            nxt = idx + direction
            if 0 <= nxt < node.size:
                path[-1] = (node, nxt)
                child = node.children[nxt]
                while isinstance(child, _Inner):
                    k = 0 if direction == 1 else child.size - 1
                    path.append((child, k))
                    child = child.children[k]
                path.append((child, 0 if direction == 1 else child.size - 1))
                return Bookmark(tuple(path))
            path.pop()
        return None

    def next(self) -> Optional["Bookmark"]:
        return self.step(1)

    def prev(self) -> Optional["Bookmark"]:
        return self.step(-1)


def _edge_path(node, rightmost: bool) -> tuple:
    path = []
    while isinstance(node, _Inner):
        i = node.size - 1 if rightmost else 0
        path.append((node, i))
        node = node.children[i]
    path.append((node, node.size - 1 if rightmost else 0))
    return tuple(path)


class PTree:
    """Persistent ordered map.  All operations return new trees."""

    __slots__ = ("_root", "count", "order")

    def __init__(self, root, count: int, order: int):
        if order < 2:
            raise ValueError("order must be at least 2")
        self._root = root
        self.count = count
        self.order = order

    @classmethod
    def empty(cls, order: int = DEFAULT_ORDER) -> "PTree":
        return cls(None, 0, order)

    def __len__(self) -> int:
        return self.count

    def __bool__(self) -> bool:
        return self.count > 0

    def depth(self) -> int:
        """Number of nodes on a root-to-leaf path."""
        d, node = 0, self._root
        while node is not None:
            d += 1
            node = node.children[0] if isinstance(node, _Inner) else None
        return d

    # -- lookup ---------------------------------------------------------

    def get(self, key, default=None):
        node = self._root
        if node is None:
            return default
        while isinstance(node, _Inner):
            if compare(key, node.maxkey) > 0:
                return default
            node = node.children[_child_for(node, key)]
        i, hit = _leaf_pos(node, key)
        return node.vals[i] if hit else default

    def __contains__(self, key) -> bool:
        marker = object()
        return self.get(key, marker) is not marker

    # -- update ---------------------------------------------------------

    def add(self, key, value) -> "PTree":
        """Insert or replace.  Replacing an existing key keeps the count."""
        if self._root is None:
            return PTree(_Leaf((key,), (value,)), 1, self.order)
        result, grew = _add(self._root, key, value, self.order)
        if isinstance(result, tuple):
            left, right = result
            root = _Inner((left.maxkey, right.maxkey), (left, right))
        else:
            root = result
        return PTree(root, self.count + (1 if grew else 0), self.order)

    def remove(self, key) -> "PTree":
        """Remove a key; removing an absent key returns self unchanged."""
        if self._root is None:
            return self
        new_root = _remove(self._root, key, self.order)
        if new_root is _ABSENT:
            return self
        if new_root is None:
            return PTree(None, 0, self.order)
        # Collapse a root with a single child.
        while isinstance(new_root, _Inner) and new_root.size == 1:
            new_root = new_root.children[0]
        return PTree(new_root, self.count - 1, self.order)

    # -- traversal ------------------------------------------------------

    def first(self) -> Optional[Bookmark]:
        if self._root is None:
            return None
        return Bookmark(_edge_path(self._root, rightmost=False))

    def last(self) -> Optional[Bookmark]:
        if self._root is None:
            return None
        return Bookmark(_edge_path(self._root, rightmost=True))

    def seek(self, key) -> Optional[Bookmark]:
        """Bookmark at the first entry >= key, or None past the end."""
        node = self._root
        if node is None or compare(key, node.maxkey) > 0:
            return None
        path = []
        while isinstance(node, _Inner):
            i = _child_for(node, key)
            path.append((node, i))
            node = node.children[i]
        i, _ = _leaf_pos(node, key)
        path.append((node, i))
        return Bookmark(tuple(path))

    def items(self) -> Iterator[Tuple[Any, Any]]:
        def walk(node):
            if isinstance(node, _Inner):
                for c in node.children:
                    yield from walk(c)
            else:
                yield from zip(node.keys, node.vals)

        if self._root is not None:
            yield from walk(self._root)

    def keys(self):
        return (k for k, _ in self.items())

    def values(self):
        return (v for _, v in self.items())

    def __iter__(self):
        return self.keys()


def _add(node, key, value, n):
    """Returns (node' or (left, right) split pair, count_grew)."""
    if isinstance(node, _Leaf):
        i, hit = _leaf_pos(node, key)
        if hit:
            vals = node.vals[:i] + (value,) + node.vals[i + 1:]
            return _Leaf(node.keys, vals), False
        keys = node.keys[:i] + (key,) + node.keys[i:]
        vals = node.vals[:i] + (value,) + node.vals[i:]
        if len(keys) <= 2 * n:
            return _Leaf(keys, vals), True
        h = n + 1
        return (_Leaf(keys[:h], vals[:h]), _Leaf(keys[h:], vals[h:])), True

    i = _child_for(node, key)
    result, grew = _add(node.children[i], key, value, n)
    if isinstance(result, tuple):
        left, right = result
        children = node.children[:i] + (left, right) + node.children[i + 1:]
        maxkeys = node.maxkeys[:i] + (left.maxkey, right.maxkey) + node.maxkeys[i + 1:]
    else:
        children = node.children[:i] + (result,) + node.children[i + 1:]
        maxkeys = node.maxkeys[:i] + (result.maxkey,) + node.maxkeys[i + 1:]
    if len(children) <= 2 * n:
        return _Inner(maxkeys, children), grew
    h = n + 1
    return (_Inner(maxkeys[:h], children[:h]),
            _Inner(maxkeys[h:], children[h:])), grew


_ABSENT = object()  # sentinel: key was not present, tree unchanged


def _remove(node, key, n):
    """Returns _ABSENT (no change), None (node emptied) or the new node."""
    if isinstance(node, _Leaf):
        i, hit = _leaf_pos(node, key)
        if not hit:
            return _ABSENT
        keys = node.keys[:i] + node.keys[i + 1:]
        if not keys:
            return None
        return _Leaf(keys, node.vals[:i] + node.vals[i + 1:])

    if compare(key, node.maxkey) > 0:
        return _ABSENT
    i = _child_for(node, key)
    child = _remove(node.children[i], key, n)
    if child is _ABSENT:
        return _ABSENT
    if child is None:
        children = node.children[:i] + node.children[i + 1:]
        maxkeys = node.maxkeys[:i] + node.maxkeys[i + 1:]
        if not children:
            return None
        return _Inner(maxkeys, children)
    if child.size >= n:
        return _Inner(node.maxkeys[:i] + (child.maxkey,) + node.maxkeys[i + 1:],
                      node.children[:i] + (child,) + node.children[i + 1:])
    # Underflow: borrow from or merge with an adjacent sibling.  Any inner
    # node reaching here has >= 2 children (the root collapses in remove()).
    j = i - 1 if i > 0 else i + 1
    sib = node.children[j]
    lo, hi = (j, i) if j < i else (i, j)
    left, right = (sib, child) if j < i else (child, sib)
    if sib.size > n:
        left, right = _rebalance(left, right)
        children = node.children[:lo] + (left, right) + node.children[hi + 1:]
        maxkeys = node.maxkeys[:lo] + (left.maxkey, right.maxkey) + node.maxkeys[hi + 1:]
    else:
        merged = _merge(left, right)
        children = node.children[:lo] + (merged,) + node.children[hi + 1:]
        maxkeys = node.maxkeys[:lo] + (merged.maxkey,) + node.maxkeys[hi + 1:]
    return _Inner(maxkeys, children)


def _rebalance(left, right):
    """Even out two siblings so both end up >= n (total > 2n guaranteed)."""
    if isinstance(left, _Leaf):
        keys = left.keys + right.keys
        vals = left.vals + right.vals
        h = len(keys) // 2
        return _Leaf(keys[:h], vals[:h]), _Leaf(keys[h:], vals[h:])
    maxkeys = left.maxkeys + right.maxkeys
    children = left.children + right.children
    h = len(children) // 2
    return (_Inner(maxkeys[:h], children[:h]),
            _Inner(maxkeys[h:], children[h:]))


def _merge(left, right):
    if isinstance(left, _Leaf):
        return _Leaf(left.keys + right.keys, left.vals + right.vals)
    return _Inner(left.maxkeys + right.maxkeys, left.children + right.children)


def verify_shape(tree: PTree) -> list:
    """Structural integrity check for tests; returns a list of issues."""
    issues = []
    n = tree.order
    root = tree._root
    if root is None:
        if tree.count != 0:
            issues.append("empty root with nonzero count")
        return issues
    seen = 0
    depths = set()

    def walk(node, depth, is_root):
        nonlocal seen
        if isinstance(node, _Leaf):
            depths.add(depth)
            seen += len(node.keys)
            if not is_root and not (n <= node.size <= 2 * n):
                issues.append(f"leaf size {node.size} outside [{n},{2*n}]")
            for a, b in zip(node.keys, node.keys[1:]):
                if compare(a, b) >= 0:
                    issues.append("leaf keys not strictly ascending")
            return
        if not is_root and not (n <= node.size <= 2 * n):
            issues.append(f"inner size {node.size} outside [{n},{2*n}]")
        if is_root and node.size < 2:
            issues.append("inner root with fewer than 2 children")
        for mk, child in zip(node.maxkeys, node.children):
            if compare(mk, child.maxkey) != 0:
                issues.append("stale maxkey")
            walk(child, depth + 1, False)
        for a, b in zip(node.maxkeys, node.maxkeys[1:]):
            if compare(a, b) >= 0:
                issues.append("maxkeys not strictly ascending")

    walk(root, 1, True)
    if seen != tree.count:
        issues.append(f"count {tree.count} != {seen} leaf entries")
    if len(depths) > 1:
        issues.append("leaves at unequal depths")
    return issues


class PList:
    """Persistent positional list over a PTree keyed 0..count-1.

    Removal and insertion renumber the tail, so those are O(N); reads stay
    O(log N).
    """

    __slots__ = ("_tree",)

    def __init__(self, tree: Optional[PTree] = None):
        self._tree = tree if tree is not None else PTree.empty()

    @classmethod
    def from_iterable(cls, values, order: int = DEFAULT_ORDER) -> "PList":
        t = PTree.empty(order)
        for i, v in enumerate(values):
            t = t.add(i, v)
        return cls(t)

    def __len__(self) -> int:
        return self._tree.count

    def get(self, pos: int):
        if not 0 <= pos < len(self):
            raise IndexError(f"position {pos} out of range 0..{len(self) - 1}")
        return self._tree.get(pos)

    def __getitem__(self, pos: int):
        return self.get(pos)

    def append(self, value) -> "PList":
        return PList(self._tree.add(len(self), value))

    def insert_at(self, pos: int, value) -> "PList":
        if not 0 <= pos <= len(self):
            raise IndexError(f"position {pos} out of range 0..{len(self)}")
        t = PTree.empty(self._tree.order)
        i = 0
        for _, v in self._tree.items():
            if i == pos:
                t = t.add(i, value)
                i += 1
            t = t.add(i, v)
            i += 1
        if pos == len(self):
            t = t.add(pos, value)
        return PList(t)

    def remove_at(self, pos: int) -> "PList":
        if not 0 <= pos < len(self):
            raise IndexError(f"position {pos} out of range 0..{len(self) - 1}")
        t = PTree.empty(self._tree.order)
        i = 0
        for k, v in self._tree.items():
            if k == pos:
                continue
            t = t.add(i, v)
            i += 1
        return PList(t)

    def __iter__(self):
        return self._tree.values()
