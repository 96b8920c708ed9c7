"""Sum-of-squares hierarchy: types, flag vectors and averaged product matrices.

At level L the admissible types are the fully labelled trees sigma with
``|sigma| <= L`` and ``|sigma| = L (mod 2)``, one per isomorphism class.  The
flag vector of sigma holds every sigma-flag with ``(L - |sigma|) / 2``
unlabelled leaves, and the block of sigma is the matrix of averaged products
of pairs of those flags, written on the basis T_L.

Entries are computed tree by tree: for U in T_L, a k-set C of leaves inducing
sigma and a split of the remaining leaves into two petals, the two induced
flags are recorded.  Every labelling of C is reached from one reference
labelling through the automorphisms of sigma.  The exact entry is the count
divided by ``L!/(L-k)! * C(L-k, m)``.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
import math

import numpy as np

from .flags import QuantumFlag, dfs_label_order, enumerate_flags
from .trees import (
    EMPTY, Tree, TreeError, enumerate_trees, index_shape, restrict, restrict_order,
    type_automorphisms,
)


@dataclass
class MomentBlock:
    """Averaged products of one flag vector, written on the basis of the level.

    ``counts[i, j, u] / denom`` is the coefficient of basis tree ``u`` in the
    averaged product of flags ``i`` and ``j``.
    """

    sigma: Tree
    flags: list
    counts: np.ndarray
    denom: int
    basis: list = field(repr=False)

    @property
    def size(self):
        return len(self.flags)

    def entry(self, i, j):
        out = QuantumFlag(sigma=EMPTY)
        for u, c in enumerate(self.counts[i, j]):
            if c:
                out._add(self.basis[u], Fraction(int(c), self.denom))
        return out

    def matrix(self):
        return [[self.entry(i, j) for j in range(self.size)] for i in range(self.size)]

    def float_coeffs(self):
        """Array of shape (|basis|, n, n) with the float coefficients."""
        return np.transpose(self.counts, (2, 0, 1)).astype(float) / self.denom


@dataclass
class HierarchyLevel:
    level: int
    basis: list
    blocks: list

    def signature(self):
        return block_signature(self)

    def block_for(self, sigma):
        for b in self.blocks:
            if b.sigma == sigma:
                return b
        raise KeyError(str(sigma))

    @property
    def n_entries(self):
        return sum(b.size * (b.size + 1) // 2 for b in self.blocks)


def canonical_types(k):
    """One labelled representative per tree shape with k leaves (DFS labels)."""
    if k == 0:
        return [EMPTY]
    return [t.label_leaves() for t in enumerate_trees(k)]


def _relabel_table(flags, index, sigma):
    table = []
    for perm in type_automorphisms(sigma):
        table.append([index[f.relabel(perm).encoding()] for f in flags])
    return table


def _compute_block(level, sigma, basis):
    k = sigma.size
    m = (level - k) // 2
    flags = enumerate_flags(sigma, m)
    index = {f.encoding(): i for i, f in enumerate(flags)}
    act = _relabel_table(flags, index, sigma)
    pi = dfs_label_order(sigma)
    target = sigma.unlabeled().encoding() if k else None
    nf = len(flags)
    counts = np.zeros((nf, nf, len(basis)), dtype=np.int64)
    for u_idx, u in enumerate(basis):
        indexed, _ = index_shape(u.shape)
        for c in combinations(range(level), k):
            cset = set(c)
            if k:
                r = restrict_order(indexed, cset)
                if r[1] != target:
                    continue
                labels = dict(zip(r[2], pi))
            else:
                labels = {}
            rest = [p for p in range(level) if p not in cset]
            for v1 in combinations(rest, m):
                v2 = cset.union(p for p in rest if p not in v1)
                g1 = restrict(indexed, cset.union(v1), labels)
                g2 = restrict(indexed, v2, labels)
                i = index[g1[1] if g1 else "()"]
                j = index[g2[1] if g2 else "()"]
                for row in act:
                    counts[row[i], row[j], u_idx] += 1
    denom = math.factorial(level) // math.factorial(level - k) * math.comb(level - k, m)
    return MomentBlock(sigma, flags, counts, denom, basis)


@lru_cache(maxsize=None)
def build_level(level, full_types=True):
    """Blocks of the hierarchy at ``level``.

    With ``full_types=False`` the types of size ``level`` are left out; each of
    them contributes a positive multiple of one basis tree, the same as a
    nonnegative slack variable.
    """
    if level < 0:
        raise TreeError("level must be non-negative")
    basis = enumerate_trees(level)
    blocks = []
    for k in range(level % 2, level + 1, 2):
        if k == level and not full_types:
            continue
        for sigma in canonical_types(k):
            blocks.append(_compute_block(level, sigma, basis))
    return HierarchyLevel(level, basis, blocks)


def block_signature(h):
    """Multiset of block sizes as [(size, multiplicity)], largest first."""
    sizes = {}
    for b in h.blocks:
        sizes[b.size] = sizes.get(b.size, 0) + 1
    return sorted(sizes.items(), reverse=True)


def format_signature(sig):
    return " ".join("%d_%d" % (s, m) for s, m in sig)


def flag_count(level):
    """Total number of flags over all blocks (sum of block sizes)."""
    return sum(s * m for s, m in block_signature(build_level(level)))
