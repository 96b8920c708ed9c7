"""Encoding fully labelled trees by a ternary predicate on their leaves.

For leaves i, j, k of a labelled tree, ``P(i; j, k)`` holds when i sits at
height one in the subtree induced by {i, j, k}; equivalently the last common
ancestor of j and k lies strictly below the one of i and j.  A relation on
[n]^3 comes from a tree iff

(a) ``P(i; j, k)`` implies ``P(i; k, j)``,
(b) every 3-set has exactly one element i with ``P(i; j, k)`` for the others,
(c) ``P(i; j, k)`` implies ``P(l; j, k)`` or ``P(i; j, l)`` for every other l.

Trees with fewer than three leaves have the empty relation and are fixed by n.
"""

from dataclasses import dataclass, field
from itertools import combinations, permutations

from .trees import Tree, TreeError, as_tree, make_node, shape_leaves


class PredicateError(ValueError):
    """Raised when a relation violates the axioms; carries a witness."""

    def __init__(self, axiom, witness, message):
        super().__init__(message)
        self.axiom = axiom
        self.witness = witness


@dataclass(frozen=True)
class TriplePredicate:
    """Relation ``P`` on leaves 1..n stored as a set of ordered triples (i, j, k)."""

    n: int
    triples: frozenset = field(default_factory=frozenset)

    def holds(self, i, j, k):
        return (i, j, k) in self.triples

    def pivot(self, a, b, c):
        """Pivots of the 3-set {a, b, c}; a valid relation has exactly one."""
        out = []
        for i, j, k in ((a, b, c), (b, a, c), (c, a, b)):
            if (i, j, k) in self.triples or (i, k, j) in self.triples:
                out.append(i)
        return out


def _ancestor_paths(shape):
    paths = {}

    def walk(s, path):
        if isinstance(s, int):
            paths[s] = path
            return
        walk(s[0], path + (0,))
        walk(s[1], path + (1,))

    walk(shape, ())
    return paths


def _lca_depth(p, q):
    d = 0
    for x, y in zip(p, q):
        if x != y:
            break
        d += 1
    return d


def tree_to_predicate(t):
    """Triple predicate of a tree whose leaves are labelled exactly 1..n."""
    t = as_tree(t)
    n = t.size
    if not t.is_fully_labeled or t.labels != tuple(range(1, n + 1)):
        raise TreeError("tree leaves must be labelled 1..n")
    if n < 3:
        return TriplePredicate(n, frozenset())
    paths = _ancestor_paths(t.shape)
    out = set()
    for a, b, c in combinations(range(1, n + 1), 3):
        for i, j, k in ((a, b, c), (b, a, c), (c, a, b)):
            if _lca_depth(paths[j], paths[k]) > _lca_depth(paths[i], paths[j]):
                out.add((i, j, k))
                out.add((i, k, j))
    return TriplePredicate(n, frozenset(out))


def validate_predicate(pred):
    """Return the first axiom violation as ``(axiom, witness)`` or None."""
    n = pred.n
    for trip in pred.triples:
        if len(trip) != 3 or len(set(trip)) != 3 or not all(1 <= v <= n for v in trip):
            return ("domain", trip)
    for i, j, k in sorted(pred.triples):
        if (i, k, j) not in pred.triples:
            return ("a", (i, j, k))
    for a, b, c in combinations(range(1, n + 1), 3):
        if len(pred.pivot(a, b, c)) != 1:
            return ("b", (a, b, c))
    for i, j, k in sorted(pred.triples):
        for l in range(1, n + 1):
            if l in (i, j, k):
                continue
            if (l, j, k) not in pred.triples and (i, j, l) not in pred.triples:
                return ("c", (i, j, k, l))
    return None


def _leafset(s):
    return shape_leaves(s)


def _insert(s, new, pred):
    # s is an inner node containing at least two leaves
    left, right = s
    l1, l2 = _leafset(left), _leafset(right)

    def complete(leaves):
        return all(pred.holds(new, a, b) for a, b in combinations(leaves, 2))

    if not complete(l1):
        return make_node(_insert(left, new, pred), right)
    if not complete(l2):
        return make_node(left, _insert(right, new, pred))
    if all(pred.holds(new, a, b) for a in l1 for b in l2):
        return make_node(s, new)
    if any(pred.holds(a, new, b) for a in l1 for b in l2):
        return make_node(left, make_node(new, right))
    return make_node(right, make_node(new, left))


def predicate_to_tree(pred):
    """Decode a valid relation into the unique labelled tree it encodes."""
    bad = validate_predicate(pred)
    if bad is not None:
        axiom, witness = bad
        raise PredicateError(axiom, witness,
                             "relation violates axiom (%s) at %s" % (axiom, witness))
    n = pred.n
    if n < 1:
        raise TreeError("a labelled tree needs at least one leaf")
    if n == 1:
        return Tree(1)
    if n == 2:
        return Tree((1, 2))
    (i,) = pred.pivot(1, 2, 3)
    j, k = [v for v in (1, 2, 3) if v != i]
    shape = make_node(i, make_node(j, k))
    for new in range(4, n + 1):
        shape = _insert(shape, new, pred)
    return Tree(shape)


def predicates_equal_up_to_relabel(p, q):
    """Brute-force isomorphism test between two relations of equal size."""
    if p.n != q.n:
        return False
    for perm in permutations(range(1, p.n + 1)):
        m = dict(zip(range(1, p.n + 1), perm))
        if frozenset((m[i], m[j], m[k]) for i, j, k in p.triples) == q.triples:
            return True
    return False
