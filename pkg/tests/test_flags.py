from fractions import Fraction
from pathlib import Path
import random
import time

import pytest
from hypothesis import given, settings, strategies as st

from treeflag.flags import (
    QuantumFlag, TypeMismatchError, downward, enumerate_flags, expand_to_level, flag_density,
    flag_type, glue_product, q_sigma, sunflower_density,
)
from treeflag.trees import EMPTY, LEAF, automorphism_count, TreeError, enumerate_trees, parse_tree

import oracles

GOLDEN = Path(__file__).parent / "data" / "products_golden.txt"


def _parse_rhs(text):
    out = QuantumFlag()
    for term in text.split("+"):
        c, t = term.split()
        out = out + QuantumFlag({parse_tree(t): Fraction(c)})
    return out


def golden_entries():
    for line in GOLDEN.read_text().splitlines():
        lhs, rhs = line.split("=")
        yield lhs.split(), _parse_rhs(rhs)


def check_golden():
    bad = []
    for lhs, expected in golden_entries():
        if lhs[0] == "P":
            got = downward(glue_product(lhs[1], lhs[2]))
        else:
            got = glue_product(LEAF, lhs[1])
        if got != expected:
            bad.append(" ".join(lhs))
    return bad


def test_golden_products():
    start = time.perf_counter()
    assert len(list(golden_entries())) == 152
    assert check_golden() == []
    assert time.perf_counter() - start < 30


def test_unlabelled_products_have_total_mass_one_per_tree():
    # averaging over all pairs of disjoint petals: the product of
    # sum_S S and sum_S' S' is the sum of all trees at the glued size
    for n1 in (1, 2, 3):
        for n2 in (1, 2, 3):
            total = QuantumFlag(sigma=EMPTY)
            for a in enumerate_trees(n1):
                for b in enumerate_trees(n2):
                    total = total + glue_product(a, b)
            assert total == QuantumFlag({u: 1 for u in enumerate_trees(n1 + n2)})


def test_sunflower_example():
    t = parse_tree("((1(**))(**))")
    assert sunflower_density("(1*)", "(1(**))", t) == Fraction(1, 3)
    for s1, s2 in [("(1*)", "(1(**))"), ("(1*)", "(*(1*))"), ("(1(**))", "(1*)")]:
        assert sunflower_density(s1, s2, t) == oracles.sunflower(s1, s2, t.encoding())


def test_square_of_cherry_flag():
    assert glue_product("(1*)", "(1*)") == QuantumFlag({"(1(**))": 1, "(*(1*))": 1})


def test_products_against_oracle():
    for a, b in [("(*(1*))", "(*(1*))"), ("(1(**))", "(*(1*))"), ("((12)*)", "(1(2*))")]:
        p = glue_product(a, b)
        assert p
        for t, c in p.terms.items():
            assert c == oracles.sunflower(a, b, t.encoding())
        sigma = flag_type(a)
        for t in enumerate_flags(sigma, parse_tree(a).size + parse_tree(b).size - 2 * sigma.size):
            assert p.coefficient(t) == oracles.sunflower(a, b, t.encoding())


def test_q_of_single_label_flags():
    assert q_sigma("(1(**))") == Fraction(1, 3)
    assert q_sigma("(*(1*))") == Fraction(2, 3)
    assert q_sigma("1") == 1


def test_q_against_brute_force():
    for k in (1, 2, 3):
        for sigma in {t.label_leaves() for t in enumerate_trees(k)}:
            for n in range(k, 7):
                for f in enumerate_flags(sigma, n - k):
                    assert q_sigma(f) == oracles.q_labelling(f.encoding())


def test_downward_of_all_flags_of_a_type():
    # summing q over the sigma-flags sitting on U gives p(sigma; U) |Aut sigma| / k!
    for n in range(3, 7):
        for sigma_u in enumerate_trees(3):
            sigma = sigma_u.label_leaves()
            down = QuantumFlag(sigma=EMPTY)
            for f in enumerate_flags(sigma, n - 3):
                down = down + downward(f)
            for u in enumerate_trees(n):
                expected = flag_density(sigma_u, u) * automorphism_count(sigma_u) / 6
                assert down.coefficient(u) == expected


def test_flag_enumeration_counts():
    assert enumerate_flags("1", 1) == [parse_tree("(1*)")]
    assert len(enumerate_flags("1", 2)) == 2
    assert len(enumerate_flags("(12)", 2)) == 9
    assert len(enumerate_flags(EMPTY, 5)) == 3
    with pytest.raises(TreeError):
        enumerate_flags("(1*)", 1)


def test_type_of_flag():
    assert flag_type("((12)(3(45)))".replace("4", "*").replace("5", "*")) == parse_tree("((12)3)")
    with pytest.raises(TreeError):
        flag_type("(2*)")


def test_type_mismatch():
    with pytest.raises(TypeMismatchError):
        glue_product("(1*)", "(**)")
    with pytest.raises(TypeMismatchError):
        QuantumFlag({"(1*)": 1}) + QuantumFlag({"(**)": 1})


def test_density_normalisation():
    for sigma in ("1", "(12)", "(1(23))"):
        k = parse_tree(sigma).size
        for n in range(k + 1, k + 4):
            for t in enumerate_flags(sigma, n - k):
                for m in range(k, n + 1):
                    total = sum(flag_density(s, t) for s in enumerate_flags(sigma, m - k))
                    assert total == 1


def test_sunflower_completeness():
    # summing the two-petal density over one petal recovers the one-petal density
    for t in enumerate_flags("(12)", 3):
        for s1 in enumerate_flags("(12)", 1):
            for s2_extra in (1, 2):
                total = sum(sunflower_density(s1, s2, t) for s2 in enumerate_flags("(12)", s2_extra))
                assert total == flag_density(s1, t)


def test_densities_against_oracle():
    rng = random.Random(11)
    for _ in range(40):
        sigma = rng.choice(["1", "(12)", "(1(23))", "((12)3)"])
        k = parse_tree(sigma).size
        n = rng.randint(k + 1, 7)
        m = rng.randint(k, n)
        t = rng.choice(enumerate_flags(sigma, n - k))
        s = rng.choice(enumerate_flags(sigma, m - k))
        assert flag_density(s, t) == oracles.density(s.encoding(), t.encoding())


def test_chain_rule():
    # p(s; t) = sum over intermediate r of p(s; r) p(r; t)
    for sigma in ("()", "1", "(12)", "(1(23))"):
        k = parse_tree(sigma).size
        for n in range(max(k, 1) + 2, 8):
            if sigma != "()" and n - k > 3:
                continue
            flags_n = enumerate_flags(sigma, n - k)
            for m in range(k, n):
                for mid in range(m, n + 1):
                    flags_mid = enumerate_flags(sigma, mid - k)
                    for s in enumerate_flags(sigma, m - k):
                        for t in flags_n[:4]:
                            via = sum(flag_density(s, r) * flag_density(r, t) for r in flags_mid)
                            assert via == flag_density(s, t)


def test_product_expansion_is_level_independent():
    a, b = parse_tree("(1*)"), parse_tree("(*(1*))")
    low = glue_product(a, b)
    high = glue_product(a, b, 5)
    lifted = QuantumFlag(sigma=parse_tree("1"))
    for t, c in low.terms.items():
        for u in enumerate_flags("1", 4):
            d = flag_density(t, u)
            if d:
                lifted = lifted + QuantumFlag({u: c * d})
    assert lifted == high
    with pytest.raises(TreeError):
        glue_product(a, b, 3)


sigma_flags = st.sampled_from([f for n in (1, 2, 3) for f in enumerate_flags("1", n)])


@settings(max_examples=40, deadline=None)
@given(sigma_flags, sigma_flags)
def test_product_commutes(a, b):
    assert glue_product(a, b) == glue_product(b, a)


@settings(max_examples=25, deadline=None)
@given(sigma_flags, st.integers(0, 2))
def test_downward_commutes_with_expansion(f, extra):
    n = f.size + extra
    lifted = QuantumFlag(sigma=parse_tree("1"))
    for u in enumerate_flags("1", n - 1):
        d = flag_density(f, u)
        if d:
            lifted = lifted + QuantumFlag({u: d})
    assert downward(lifted) == expand_to_level(downward(f), n)


def test_quantum_flag_text_round_trip():
    q = QuantumFlag.from_lines("1/2 (1(**))\n# comment\n-3 (*(1*))\n")
    assert QuantumFlag.from_lines(q.to_lines()) == q
    with pytest.raises(TreeError):
        QuantumFlag.from_lines("1/2")
    with pytest.raises(TreeError):
        QuantumFlag.from_lines("x (1*)")
    assert not (q - q)
    assert 2 * q == q + q
