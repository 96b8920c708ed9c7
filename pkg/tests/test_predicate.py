from itertools import permutations
import random
import time

import pytest

from treeflag.predicate import (
    PredicateError, TriplePredicate, predicate_to_tree, tree_to_predicate, validate_predicate,
)
from treeflag.trees import Tree, TreeError, enumerate_trees, parse_tree


def _labelings(t):
    base = t.label_leaves()
    n = t.size
    seen = set()
    for perm in permutations(range(1, n + 1)):
        x = base.relabel(dict(zip(range(1, n + 1), perm)))
        if x not in seen:
            seen.add(x)
            yield x


def test_round_trip_exhaustive_up_to_seven_leaves():
    start = time.perf_counter()
    count = 0
    for n in range(1, 8):
        for t in enumerate_trees(n):
            for x in _labelings(t):
                pred = tree_to_predicate(x)
                assert validate_predicate(pred) is None
                assert predicate_to_tree(pred) == x
                count += 1
    assert count == sum(1 for n in range(1, 8) for t in enumerate_trees(n) for _ in _labelings(t))
    assert time.perf_counter() - start < 60


def test_pivot_meaning():
    pred = tree_to_predicate(parse_tree("((12)(3(45)))"))
    assert pred.holds(1, 3, 4) and pred.holds(1, 4, 3)
    assert pred.pivot(3, 4, 5) == [3]
    assert pred.pivot(1, 2, 3) == [3]


def test_small_trees_have_empty_relation():
    assert tree_to_predicate(Tree(1)).triples == frozenset()
    assert tree_to_predicate(parse_tree("(12)")).triples == frozenset()
    assert predicate_to_tree(TriplePredicate(2)) == parse_tree("(12)")
    assert predicate_to_tree(TriplePredicate(1)) == Tree(1)


def test_unlabelled_input_rejected():
    with pytest.raises(TreeError):
        tree_to_predicate(parse_tree("(*(12))"))


def test_violation_of_symmetry():
    pred = tree_to_predicate(parse_tree("(1(23))"))
    broken = TriplePredicate(3, pred.triples - {(1, 3, 2)})
    assert validate_predicate(broken)[0] == "a"
    with pytest.raises(PredicateError) as exc:
        predicate_to_tree(broken)
    assert exc.value.axiom == "a"


def test_violation_of_unique_pivot():
    pred = TriplePredicate(3, frozenset({(1, 2, 3), (1, 3, 2), (2, 1, 3), (2, 3, 1)}))
    assert validate_predicate(pred) == ("b", (1, 2, 3))
    empty = TriplePredicate(3, frozenset())
    assert validate_predicate(empty)[0] == "b"


def test_violation_of_consistency():
    # pivots chosen per 3-set so that axioms (a) and (b) hold but (c) fails
    rng = random.Random(3)
    found = False
    for _ in range(200):
        triples = set()
        for a, b, c in [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)]:
            i = rng.choice((a, b, c))
            j, k = [v for v in (a, b, c) if v != i]
            triples |= {(i, j, k), (i, k, j)}
        pred = TriplePredicate(4, frozenset(triples))
        bad = validate_predicate(pred)
        if bad is not None:
            assert bad[0] == "c"
            with pytest.raises(PredicateError):
                predicate_to_tree(pred)
            found = True
        else:
            assert tree_to_predicate(predicate_to_tree(pred)) == pred
    assert found


def test_bad_domain():
    assert validate_predicate(TriplePredicate(3, frozenset({(1, 1, 2)})))[0] == "domain"
