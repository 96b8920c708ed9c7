from fractions import Fraction

import pytest

from treeflag.profiles import (
    CSV_COLUMNS, ProfileSpec, assemble_slice_sdp, conjectured_upper, default_endpoints,
    double_caterpillar_densities, even_limit_caterpillar_density, even_limit_inducibility,
    finite_double_caterpillar_density, outer_approximation, slice_bound,
)
from treeflag.trees import TreeError, caterpillar, density, double_caterpillar, even_tree

# (x, conjectured value, allowed excess of the upper envelope)
ANCHORS = [(Fraction(5, 8), Fraction(5, 16), 1e-3), (Fraction(101, 128), Fraction(135, 1024), 2e-3),
           (Fraction(4, 7), Fraction(10, 31), 1e-3)]
ANCHOR_ENDPOINTS = [Fraction(4, 7), Fraction(58, 100), Fraction(6, 10), Fraction(5, 8),
                    Fraction(7, 10), Fraction(101, 128), Fraction(1)]


def test_double_caterpillar_anchor_points():
    assert double_caterpillar_densities(4, Fraction(1, 2)) == ANCHORS[0][:2]
    assert double_caterpillar_densities(4, Fraction(1, 4)) == ANCHORS[1][:2]


def test_even_limit_values():
    assert even_limit_caterpillar_density(4) == Fraction(4, 7)
    assert even_limit_inducibility(6) == Fraction(10, 31)
    assert even_limit_inducibility(4) == Fraction(3, 7)
    assert even_limit_inducibility(5) == Fraction(2, 3)
    assert even_limit_inducibility(7) == Fraction(5, 21)


def test_even_limit_against_large_even_trees():
    # densities in E_n approach the limit as n grows
    d16 = density(caterpillar(4), even_tree(16))
    d32 = density(caterpillar(4), even_tree(32))
    assert d16 < d32 < Fraction(4, 7)
    assert Fraction(4, 7) - d32 < Fraction(1, 40)


@pytest.mark.parametrize("n,p", [(8, Fraction(1, 2)), (9, Fraction(1, 3)), (10, Fraction(1, 4)),
                                 (12, Fraction(1, 2))])
def test_finite_formula_against_counting(n, p):
    t = double_caterpillar(n, p)
    cat, e6 = finite_double_caterpillar_density(4, p, n)
    assert density(caterpillar(4), t) == cat
    assert density(even_tree(6), t) == e6


def test_finite_formula_converges():
    for p in (Fraction(1, 2), Fraction(1, 4)):
        cat, e6 = finite_double_caterpillar_density(4, p, 4000)
        lim = double_caterpillar_densities(4, p)
        assert abs(cat - lim[0]) < Fraction(1, 500)
        assert abs(e6 - lim[1]) < Fraction(1, 500)


def test_spec_validation():
    with pytest.raises(TreeError):
        ProfileSpec(caterpillar(4), even_tree(6), 5)
    with pytest.raises(TreeError):
        ProfileSpec("(1*)", even_tree(6), 8)
    with pytest.raises(TreeError):
        ProfileSpec(caterpillar(4), even_tree(7), 6)
    spec = ProfileSpec(caterpillar(4), even_tree(6), 6)
    with pytest.raises(ValueError):
        assemble_slice_sdp(spec, Fraction(1, 2), Fraction(1, 2), "upper")
    with pytest.raises(ValueError):
        assemble_slice_sdp(spec, 0, 1, "sideways")


def test_identity_profile():
    spec = ProfileSpec(caterpillar(4), caterpillar(4), 6)
    for side in ("upper", "lower"):
        b = slice_bound(spec, Fraction(1, 2), Fraction(3, 4), side)
        assert b.status == "optimal"
        assert b.slope == pytest.approx(1, abs=1e-6)
        assert b.intercept == pytest.approx(0, abs=1e-6)


def test_upper_bounds_hold_at_realisable_points():
    spec = ProfileSpec(caterpillar(4), even_tree(6), 6)
    lo, hi = Fraction(5, 8), Fraction(7, 10)
    up = slice_bound(spec, lo, hi, "upper")
    low = slice_bound(spec, lo, hi, "lower")
    for n in range(8, 40):
        for a in range(1, n // 2 + 1):
            x, y = finite_double_caterpillar_density(4, Fraction(a, n), n)
            if lo <= x <= hi:
                assert up.at(x) >= float(y) - 1e-12
                assert low.at(x) <= float(y) + 1e-12


@pytest.mark.slow
def test_level_tightens():
    mid = Fraction(53, 80)
    vals = {}
    for level in (6, 8):
        spec = ProfileSpec(caterpillar(4), even_tree(6), level)
        vals[level] = (slice_bound(spec, Fraction(5, 8), Fraction(7, 10), "upper").at(mid),
                       slice_bound(spec, Fraction(5, 8), Fraction(7, 10), "lower").at(mid))
    assert vals[8][0] <= vals[6][0] + 1e-7
    assert vals[8][1] >= vals[6][1] - 1e-7


@pytest.mark.parametrize("level", [6, 8])
def test_generators_never_hurt(level):
    spec = ProfileSpec(caterpillar(4), even_tree(6), level)
    lo, hi = Fraction(5, 8), Fraction(7, 10)
    mid = (lo + hi) / 2
    with_g = slice_bound(spec, lo, hi, "upper").at(mid)
    without = slice_bound(spec, lo, hi, "upper", use_generators=False).at(mid)
    assert with_g <= without + 1e-7


def test_anchor_run():
    spec = ProfileSpec(caterpillar(4), even_tree(6), 8)
    res = outer_approximation(spec, endpoints=ANCHOR_ENDPOINTS)
    assert len(res.slices) == 6
    for x, y, tol in ANCHORS:
        up = res.upper_at(x)
        assert float(y) - 1e-9 <= up <= float(y) + tol
    text = res.to_csv()
    assert text.splitlines()[0].split(",") == CSV_COLUMNS
    assert len(text.splitlines()) == 7
    assert res.to_svg().startswith("<svg")


def test_conjectured_overlay():
    spec = ProfileSpec(caterpillar(4), even_tree(6), 6)
    assert conjectured_upper(spec, 5 / 8) == pytest.approx(5 / 16, abs=1e-9)
    assert conjectured_upper(spec, 0.3) is None
    other = ProfileSpec(caterpillar(4), caterpillar(5), 6)
    assert conjectured_upper(other, 0.7) is None


def test_default_endpoints():
    spec = ProfileSpec(caterpillar(4), even_tree(6), 6)
    ends = default_endpoints(spec, slices=4)
    assert ends[0] == 0 and len(ends) == 5
    assert ends[-1] == 1
    with pytest.raises(ValueError):
        outer_approximation(spec, endpoints=[0, Fraction(1, 2), Fraction(1, 2)])
