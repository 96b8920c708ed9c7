"""Flags, densities, gluing products and the averaging (downward) operator.

A flag is a :class:`~treeflag.trees.Tree` with some labelled leaves; its type
is the labelled subtree induced by the labelled leaves, which must carry the
labels 1..k.  Quantum flags are finite rational combinations of flags of a
common type.
"""

from fractions import Fraction
from functools import lru_cache
from itertools import combinations
import math

from .trees import (
    EMPTY, Tree, TreeError, as_tree, enumerate_trees, index_shape, induced_subtree,
    parse_tree, restrict, restrict_order, automorphism_count, type_automorphisms,
)


class TypeMismatchError(TreeError):
    """Raised when flags of different types are combined."""


def flag_type(f):
    """The type of a flag: the labelled subtree on its labelled leaves."""
    return _flag_type(as_tree(f))


@lru_cache(maxsize=None)
def _flag_type(f):
    labels = f.labels
    if labels != tuple(range(1, len(labels) + 1)):
        raise TreeError("flag labels must be 1..k, got %s" % (labels,))
    return induced_subtree(f, labels)


def _same_type(*flags):
    types = {flag_type(f) for f in flags}
    if len(types) != 1:
        raise TypeMismatchError("flags of different types: %s"
                                % ", ".join(str(t) for t in sorted(types)))
    return types.pop()


def _build(indexed, labels):
    if isinstance(indexed, int):
        return labels.get(indexed, 0)
    return (_build(indexed[0], labels), _build(indexed[1], labels))


def dfs_label_order(sigma):
    """Labels of a type read along the depth-first order of its unlabelled form."""
    indexed, values = index_shape(sigma.shape)
    if indexed is None:
        return []
    positions = restrict_order(indexed, set(range(len(values))))[2]
    return [values[p] for p in positions]


@lru_cache(maxsize=None)
def _enumerate_flags(sigma, extra):
    k = sigma.size
    if k == 0:
        return tuple(enumerate_trees(extra))
    pi = dfs_label_order(sigma)
    auts = type_automorphisms(sigma)
    target = sigma.unlabeled().encoding()
    found = set()
    for t in enumerate_trees(k + extra):
        indexed, _ = index_shape(t.shape)
        for c in combinations(range(k + extra), k):
            r = restrict_order(indexed, set(c))
            if r[1] != target:
                continue
            base = Tree(_build(indexed, dict(zip(r[2], pi))))
            for perm in auts:
                found.add(base.relabel(perm))
    return tuple(sorted(found, key=lambda f: f.encoding()))


def enumerate_flags(sigma, extra):
    """All sigma-flags with ``extra`` unlabelled leaves, sorted by encoding."""
    sigma = as_tree(sigma)
    if extra < 0:
        raise TreeError("extra must be non-negative")
    if not sigma.is_fully_labeled and not sigma.is_empty:
        raise TreeError("a type must have all leaves labelled")
    flag_type(sigma)
    return list(_enumerate_flags(sigma, extra))


def _enc(indexed, keep, labelled):
    r = restrict(indexed, keep, labelled) if indexed is not None else None
    return r[1] if r is not None else "()"


def _positions(f):
    indexed, values = index_shape(f.shape)
    labelled = {p: v for p, v in enumerate(values) if v}
    free = [p for p, v in enumerate(values) if not v]
    return indexed, labelled, free


def flag_density(s, t):
    """p(s; t): chance that random unlabelled leaves of t induce s (same type)."""
    s, t = as_tree(s), as_tree(t)
    _same_type(s, t)
    if s.size > t.size:
        return Fraction(0)
    indexed, labelled, free = _positions(t)
    need = s.size - len(labelled)
    target = s.encoding()
    base = set(labelled)
    hits = sum(1 for v in combinations(free, need)
               if _enc(indexed, base.union(v), labelled) == target)
    return Fraction(hits, math.comb(len(free), need))


def sunflower_density(s1, s2, t):
    """p(s1, s2; t): disjoint random petals over the type induce s1 and s2."""
    s1, s2, t = as_tree(s1), as_tree(s2), as_tree(t)
    sigma = _same_type(s1, s2, t)
    k = sigma.size
    a, b = s1.size - k, s2.size - k
    indexed, labelled, free = _positions(t)
    if a + b > len(free):
        return Fraction(0)
    base = set(labelled)
    e1, e2 = s1.encoding(), s2.encoding()
    hits = 0
    total = 0
    for v1 in combinations(free, a):
        ok1 = _enc(indexed, base.union(v1), labelled) == e1
        rest = [p for p in free if p not in v1]
        for v2 in combinations(rest, b):
            total += 1
            if ok1 and _enc(indexed, base.union(v2), labelled) == e2:
                hits += 1
    return Fraction(hits, total)


def glue_product(s1, s2, n=None):
    """Gluing product of two sigma-flags, expanded on sigma-flags with n leaves.

    ``n`` defaults to the smallest admissible size ``|s1| + |s2| - |sigma|``.
    """
    s1, s2 = as_tree(s1), as_tree(s2)
    sigma = _same_type(s1, s2)
    n_min = s1.size + s2.size - sigma.size
    if n is None:
        n = n_min
    if n < n_min:
        raise TreeError("level %d is below the minimal level %d" % (n, n_min))
    out = QuantumFlag(sigma=sigma)
    for t in enumerate_flags(sigma, n - sigma.size):
        c = sunflower_density(s1, s2, t)
        if c:
            out.terms[t] = c
    return out


def q_sigma(t):
    """Probability that a random labelling of the unlabelled tree yields t."""
    t = as_tree(t)
    n, k = t.size, len(t.labels)
    return Fraction(math.factorial(n - k) * automorphism_count(t.unlabeled()),
                    math.factorial(n) * automorphism_count(t))


def downward(f):
    """Averaging operator: forget labels, weighting by q_sigma."""
    if isinstance(f, QuantumFlag):
        out = QuantumFlag(sigma=EMPTY)
        for t, c in f.terms.items():
            out._add(t.unlabeled(), c * q_sigma(t))
        return out
    t = as_tree(f)
    return QuantumFlag({t.unlabeled(): q_sigma(t)}, sigma=EMPTY)


@lru_cache(maxsize=None)
def density_table(k, n):
    """Map encoding of S in T_k -> {U in T_n: p(S; U)} for unlabelled trees."""
    table = {s.encoding(): {} for s in enumerate_trees(k)}
    denom = math.comb(n, k)
    for u in enumerate_trees(n):
        indexed, _ = index_shape(u.shape)
        counts = {}
        if k == 0:
            counts["()"] = 1
        else:
            for v in combinations(range(n), k):
                e = restrict(indexed, set(v), {})[1]
                counts[e] = counts.get(e, 0) + 1
        for e, c in counts.items():
            table[e][u] = Fraction(c, denom)
    return table


def expand_to_level(f, n):
    """Rewrite an unlabelled quantum tree on T_n using S = sum p(S; S') S'."""
    if not isinstance(f, QuantumFlag):
        f = QuantumFlag({as_tree(f): Fraction(1)})
    out = QuantumFlag(sigma=EMPTY)
    for s, c in f.terms.items():
        if s.is_labeled:
            raise TypeMismatchError("expand_to_level needs unlabelled trees")
        if s.size > n:
            raise TreeError("cannot expand %s to the smaller level %d" % (s, n))
        for u, p in density_table(s.size, n)[s.encoding()].items():
            out._add(u, c * p)
    return out


def unlabeled_square_matrix(flags):
    """Symmetric matrix of the averaged products of a flag vector."""
    flags = [as_tree(f) for f in flags]
    _same_type(*flags)
    n = len(flags)
    mat = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            mat[i][j] = mat[j][i] = downward(glue_product(flags[i], flags[j]))
    return mat


class QuantumFlag:
    """Rational linear combination of flags of one type."""

    def __init__(self, terms=None, sigma=None):
        self.terms = {}
        self.sigma = as_tree(sigma) if sigma is not None else None
        for t, c in (terms or {}).items():
            self._add(as_tree(t), Fraction(c))

    def _add(self, t, c):
        sigma = flag_type(t)
        if self.sigma is None:
            self.sigma = sigma
        elif sigma != self.sigma:
            raise TypeMismatchError("flag %s does not have type %s" % (t, self.sigma))
        v = self.terms.get(t, Fraction(0)) + c
        if v:
            self.terms[t] = v
        else:
            self.terms.pop(t, None)

    @classmethod
    def from_lines(cls, text, sigma=None):
        """Parse lines ``<rational> <flag>``; blank lines and # comments skipped."""
        out = cls(sigma=sigma)
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise TreeError("expected '<rational> <flag>', got %r" % line)
            try:
                c = Fraction(parts[0])
            except ValueError:
                raise TreeError("bad rational %r" % parts[0])
            out._add(parse_tree(parts[1]), c)
        return out

    def to_lines(self, unicode=False):
        return "\n".join("%s %s" % (c, t.encoding(unicode)) for t, c in self.items())

    def items(self):
        return sorted(self.terms.items(), key=lambda kv: kv[0].sort_key())

    def coefficient(self, t):
        return self.terms.get(as_tree(t), Fraction(0))

    def copy(self):
        out = QuantumFlag(sigma=self.sigma)
        out.terms = dict(self.terms)
        return out

    def __add__(self, other):
        out = self.copy()
        for t, c in _coerce(other).terms.items():
            out._add(t, c)
        return out

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __neg__(self):
        return self * -1

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            out = QuantumFlag(sigma=self.sigma)
            for t, c in self.terms.items():
                out._add(t, c * other)
            return out
        other = _coerce(other)
        out = QuantumFlag(sigma=self.sigma or other.sigma)
        for t1, c1 in self.terms.items():
            for t2, c2 in other.terms.items():
                for t, c in glue_product(t1, t2).terms.items():
                    out._add(t, c1 * c2 * c)
        return out

    __rmul__ = __mul__

    def downward(self):
        return downward(self)

    def expand(self, n):
        return expand_to_level(self, n)

    def __eq__(self, other):
        if isinstance(other, (Tree, str)):
            other = _coerce(other)
        return isinstance(other, QuantumFlag) and self.terms == other.terms

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return "QuantumFlag(%s)" % " + ".join("%s*%s" % (c, t) for t, c in self.items())


def _coerce(obj):
    if isinstance(obj, QuantumFlag):
        return obj
    return QuantumFlag({as_tree(obj): Fraction(1)})
