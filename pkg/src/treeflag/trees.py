"""Rooted leaf-labelled binary trees in canonical form.

A tree is stored as a nested tuple ("shape"): a leaf is an ``int`` (``0`` for an
unlabelled leaf, a positive integer for a labelled one) and an inner node is a
pair of shapes.  The empty tree has shape ``None``.  Shapes held by :class:`Tree`
are always canonical: the two children of every node are ordered by
``(leaf count, encoding)`` so that isomorphic trees share one shape and one
encoding.

Text grammar::

    tree  := "*" | "•" | label | "(" tree tree ")"
    label := "1" .. "9" | "[" digits "]"

The empty tree is written ``()`` (``∅`` is also accepted).
"""

from functools import lru_cache
from fractions import Fraction
from itertools import combinations
import math


class TreeError(ValueError):
    """Raised for malformed trees and invalid tree-valued arguments."""


class ParseError(TreeError):
    """Raised when a tree string does not follow the grammar."""


_LEAF_CHARS = ("*", "•")
EMPTY_TOKENS = ("()", "∅")


def _label_str(label):
    if label == 0:
        return "*"
    if label < 10:
        return str(label)
    return "[%d]" % label


@lru_cache(maxsize=None)
def shape_size(shape):
    if shape is None:
        return 0
    if isinstance(shape, int):
        return 1
    return shape_size(shape[0]) + shape_size(shape[1])


@lru_cache(maxsize=None)
def shape_encoding(shape):
    if shape is None:
        return "()"
    if isinstance(shape, int):
        return _label_str(shape)
    return "(" + shape_encoding(shape[0]) + shape_encoding(shape[1]) + ")"


def shape_key(shape):
    return (shape_size(shape), shape_encoding(shape))


def make_node(a, b):
    """Canonical inner node with children ``a`` and ``b`` (both canonical)."""
    if shape_key(a) > shape_key(b):
        a, b = b, a
    return (a, b)


def canonical_shape(raw):
    """Canonicalise a raw nested structure.

    Leaves are ints (0 unlabelled) or empty sequences, inner nodes are
    sequences of exactly two raw trees.  ``None`` is the empty tree.
    """
    if raw is None:
        return None
    if isinstance(raw, bool):
        raise TreeError("booleans are not tree leaves")
    if isinstance(raw, int):
        if raw < 0:
            raise TreeError("leaf labels must be non-negative, got %d" % raw)
        return raw
    if isinstance(raw, Tree):
        return raw.shape
    try:
        children = list(raw)
    except TypeError:
        raise TreeError("cannot interpret %r as a tree" % (raw,))
    if len(children) == 0:
        return 0
    if len(children) != 2:
        raise TreeError("inner node with %d children; binary trees need exactly 2"
                        % len(children))
    a = canonical_shape(children[0])
    b = canonical_shape(children[1])
    if a is None or b is None:
        raise TreeError("the empty tree cannot be a child")
    return make_node(a, b)


def shape_labels(shape):
    if shape is None:
        return []
    if isinstance(shape, int):
        return [shape] if shape else []
    return shape_labels(shape[0]) + shape_labels(shape[1])


def shape_leaves(shape):
    """Leaf values in depth-first (left to right) order."""
    if shape is None:
        return []
    if isinstance(shape, int):
        return [shape]
    return shape_leaves(shape[0]) + shape_leaves(shape[1])


def relabel_shape(shape, mapping):
    """Apply ``mapping`` (label -> label) and re-canonicalise."""
    if shape is None:
        return None
    if isinstance(shape, int):
        return mapping.get(shape, shape) if shape else 0
    return make_node(relabel_shape(shape[0], mapping), relabel_shape(shape[1], mapping))


def strip_shape(shape):
    if shape is None:
        return None
    if isinstance(shape, int):
        return 0
    return make_node(strip_shape(shape[0]), strip_shape(shape[1]))


class Tree:
    """A canonical rooted binary tree whose leaves may carry distinct labels.

    Unlabelled trees are the elements of T_n.  Trees with some labelled leaves
    are flags; trees whose leaves are all labelled are types.
    """

    __slots__ = ("shape", "_enc", "_hash")

    def __init__(self, raw=None):
        shape = canonical_shape(raw)
        labels = shape_labels(shape)
        if len(set(labels)) != len(labels):
            raise TreeError("leaf labels must be distinct")
        self.shape = shape
        self._enc = shape_encoding(shape)
        self._hash = hash(self._enc)

    @classmethod
    def _from_canonical(cls, shape):
        t = cls.__new__(cls)
        t.shape = shape
        t._enc = shape_encoding(shape)
        t._hash = hash(t._enc)
        return t

    @property
    def size(self):
        return shape_size(self.shape)

    def __len__(self):
        return self.size

    @property
    def is_empty(self):
        return self.shape is None

    @property
    def labels(self):
        return tuple(sorted(shape_labels(self.shape)))

    @property
    def is_labeled(self):
        return bool(shape_labels(self.shape))

    @property
    def is_fully_labeled(self):
        return all(v != 0 for v in shape_leaves(self.shape))

    @property
    def children(self):
        if self.shape is None or isinstance(self.shape, int):
            return ()
        return (Tree._from_canonical(self.shape[0]), Tree._from_canonical(self.shape[1]))

    def encoding(self, unicode=False):
        if unicode:
            return self._enc.replace("*", "•").replace("()", "∅")
        return self._enc

    def unlabeled(self):
        return Tree._from_canonical(strip_shape(self.shape))

    def relabel(self, mapping):
        return Tree(relabel_shape(self.shape, dict(mapping)))

    def label_leaves(self):
        """Label every leaf 1..n in depth-first order of the canonical form."""
        counter = [0]

        def walk(s):
            if isinstance(s, int):
                counter[0] += 1
                return counter[0]
            return (walk(s[0]), walk(s[1]))

        if self.shape is None:
            return self
        return Tree(walk(strip_shape(self.shape)))

    def sort_key(self):
        return shape_key(self.shape)

    def __eq__(self, other):
        return isinstance(other, Tree) and self._enc == other._enc

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return "Tree(%r)" % self._enc

    def __str__(self):
        return self._enc


EMPTY = Tree(None)
LEAF = Tree(0)


def parse_tree(text):
    """Parse a tree or flag string into a canonical :class:`Tree`."""
    if not isinstance(text, str):
        raise ParseError("expected a string, got %r" % (text,))
    s = text.strip()
    if s in EMPTY_TOKENS:
        return EMPTY
    if not s:
        raise ParseError("empty input")
    pos = [0]

    def fail(msg):
        raise ParseError("%s at position %d in %r" % (msg, pos[0], text))

    def parse():
        if pos[0] >= len(s):
            fail("unexpected end of input")
        c = s[pos[0]]
        if c in _LEAF_CHARS:
            pos[0] += 1
            return 0
        if c in "123456789":
            pos[0] += 1
            return int(c)
        if c == "[":
            end = s.find("]", pos[0])
            body = s[pos[0] + 1:end] if end > 0 else ""
            if not body.isdigit() or int(body) < 1:
                fail("bad bracketed label")
            pos[0] = end + 1
            return int(body)
        if c == "(":
            pos[0] += 1
            a = parse()
            b = parse()
            if pos[0] >= len(s) or s[pos[0]] != ")":
                fail("expected ')'")
            pos[0] += 1
            return (a, b)
        fail("unexpected character %r" % c)

    raw = parse()
    if pos[0] != len(s):
        fail("trailing characters")
    try:
        return Tree(raw)
    except TreeError as exc:
        raise ParseError(str(exc))


def as_tree(obj):
    if isinstance(obj, Tree):
        return obj
    if isinstance(obj, str):
        return parse_tree(obj)
    return Tree(obj)


@lru_cache(maxsize=None)
def _shapes_of_size(n):
    if n == 0:
        return (None,)
    if n == 1:
        return (0,)
    out = set()
    for a in range(1, n // 2 + 1):
        for s in _shapes_of_size(a):
            for t in _shapes_of_size(n - a):
                out.add(make_node(s, t))
    return tuple(sorted(out, key=shape_encoding))


def enumerate_trees(n):
    """All unlabelled trees with ``n`` leaves, sorted by encoding."""
    if n < 0:
        raise TreeError("leaf count must be non-negative")
    return [Tree._from_canonical(s) for s in _shapes_of_size(n)]


def automorphism_count(t):
    """Number of automorphisms fixing every labelled leaf.

    Equals 2 to the number of inner nodes whose two children are identical.
    """
    t = as_tree(t)

    def walk(s):
        if s is None or isinstance(s, int):
            return 0
        return walk(s[0]) + walk(s[1]) + (1 if s[0] == s[1] else 0)

    return 2 ** walk(t.shape)


def index_shape(shape):
    """Replace leaves by their depth-first positions 0..n-1.

    Returns ``(indexed_shape, leaf_values)``.
    """
    values = []

    def walk(s):
        if isinstance(s, int):
            values.append(s)
            return len(values) - 1
        return (walk(s[0]), walk(s[1]))

    if shape is None:
        return None, []
    return walk(shape), values


def restrict(indexed, keep, labels):
    """Induced subtree of an indexed shape on the leaf positions ``keep``.

    ``labels`` maps leaf position -> label (missing means unlabelled).  Returns
    ``(size, encoding)`` of the canonical induced subtree, or None when empty.
    """
    if isinstance(indexed, int):
        if indexed in keep:
            return (1, _label_str(labels.get(indexed, 0)))
        return None
    a = restrict(indexed[0], keep, labels)
    b = restrict(indexed[1], keep, labels)
    if a is None:
        return b
    if b is None:
        return a
    if a > b:
        a, b = b, a
    return (a[0] + b[0], "(" + a[1] + b[1] + ")")


def restrict_order(indexed, keep):
    """Unlabelled induced subtree on ``keep`` plus its leaves in canonical order.

    Returns ``(size, encoding, positions)``; labelling ``positions`` with
    1..k reproduces the depth-first labelling of the canonical form.
    """
    if isinstance(indexed, int):
        if indexed in keep:
            return (1, "*", [indexed])
        return None
    a = restrict_order(indexed[0], keep)
    b = restrict_order(indexed[1], keep)
    if a is None:
        return b
    if b is None:
        return a
    if (a[0], a[1]) > (b[0], b[1]):
        a, b = b, a
    return (a[0] + b[0], "(" + a[1] + b[1] + ")", a[2] + b[2])


def _restrict_shape(shape, keep_labels):
    if isinstance(shape, int):
        return shape if shape in keep_labels else None
    a = _restrict_shape(shape[0], keep_labels)
    b = _restrict_shape(shape[1], keep_labels)
    if a is None:
        return b
    if b is None:
        return a
    return make_node(a, b)


def induced_subtree(t, leaves):
    """Subtree induced by a set of labelled leaves, labels kept.

    Use ``Tree.label_leaves`` first to address the leaves of an unlabelled tree.
    """
    t = as_tree(t)
    keep = set(leaves)
    missing = keep.difference(t.labels)
    if missing:
        raise TreeError("labels %s are not leaves of %s" % (sorted(missing), t))
    if not keep:
        return EMPTY
    return Tree._from_canonical(_restrict_shape(t.shape, keep))


def subtree_count(s, t):
    """Number of leaf subsets of the unlabelled tree ``t`` inducing ``s``."""
    s, t = as_tree(s), as_tree(t)
    k = s.size
    if k > t.size:
        return 0
    if k == 0:
        return 1
    indexed, _ = index_shape(t.shape)
    target = s.encoding()
    return sum(1 for v in combinations(range(t.size), k)
               if restrict(indexed, set(v), {})[1] == target)


def density(s, t):
    """Induced density p(s; t) of unlabelled trees."""
    s, t = as_tree(s), as_tree(t)
    if s.size > t.size:
        return Fraction(0)
    return Fraction(subtree_count(s, t), math.comb(t.size, s.size))


def caterpillar(n):
    if n < 1:
        raise TreeError("a caterpillar needs at least one leaf")
    shape = 0
    for _ in range(n - 1):
        shape = make_node(0, shape)
    return Tree._from_canonical(shape)


@lru_cache(maxsize=None)
def _even_shape(n):
    if n == 1:
        return 0
    return make_node(_even_shape(n // 2), _even_shape(n - n // 2))


def even_tree(n):
    """The most balanced tree: halves of sizes floor(n/2) and ceil(n/2)."""
    if n < 1:
        raise TreeError("an even tree needs at least one leaf")
    return Tree._from_canonical(_even_shape(n))


def double_caterpillar(n, p):
    """Two caterpillars of sizes floor(pn) and ceil((1-p)n) joined at the root."""
    p = Fraction(p)
    left = math.floor(p * n)
    right = math.ceil((1 - p) * n)
    if left < 1 or right < 1 or left + right != n:
        raise TreeError("double caterpillar sides must be positive (n=%d, p=%s)" % (n, p))
    return Tree._from_canonical(make_node(caterpillar(left).shape, caterpillar(right).shape))


def type_automorphisms(sigma):
    """Label permutations induced by automorphisms of the unlabelled shape.

    ``sigma`` must be fully labelled.  Each permutation is a dict old -> new
    with ``sigma.relabel(perm) == sigma``.
    """
    sigma = as_tree(sigma)
    if sigma.is_empty:
        return [{}]

    def images(s):
        if isinstance(s, int):
            return [[s]]
        left, right = images(s[0]), images(s[1])
        out = [a + b for a in left for b in right]
        if strip_shape(s[0]) == strip_shape(s[1]):
            out += [b + a for a in left for b in right]
        return out

    base = shape_leaves(sigma.shape)
    perms = []
    seen = set()
    for img in images(sigma.shape):
        perm = dict(zip(img, base))
        key = tuple(sorted(perm.items()))
        if key not in seen and sigma.relabel(perm) == sigma:
            seen.add(key)
            perms.append(perm)
    return perms
