from fractions import Fraction
import time

import numpy as np
import pytest

from treeflag.sdp import (
    SdpBlock, SdpInstance, assemble_inducibility_sdp, export_sdpa, inducibility, read_sdpa,
    sdpa_data, solve,
)
from treeflag.trees import TreeError, caterpillar, even_tree, parse_tree

EVEN_VALUES = {4: 3 / 7, 5: 2 / 3, 6: 10 / 31, 7: 5 / 21}
OPEN_TREE = "(*((**)(**)))"
OPEN_VALUES = {6: 0.2602938, 7: 0.2506628, 8: 0.2476918}


@pytest.mark.parametrize("k", [4, 5, 6, 7])
def test_even_tree_inducibility(k):
    start = time.perf_counter()
    _, sol = inducibility(even_tree(k), k)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(EVEN_VALUES[k], abs=1e-5)
    assert time.perf_counter() - start < 300


@pytest.mark.parametrize("level", [6, 7])
def test_open_tree_bounds(level):
    _, sol = inducibility(OPEN_TREE, level)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(OPEN_VALUES[level], abs=1e-4)


@pytest.mark.slow
def test_open_tree_level_eight():
    _, sol = inducibility(OPEN_TREE, 8)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(OPEN_VALUES[8], abs=1e-4)


@pytest.mark.parametrize("k", [4, 5, 6])
def test_caterpillar_is_one(k):
    _, sol = inducibility(caterpillar(k), k)
    assert sol.objective == pytest.approx(1.0, abs=1e-6)


def test_bound_monotone_in_level():
    vals = [inducibility(OPEN_TREE, level)[1].objective for level in (5, 6, 7)]
    assert vals[0] >= vals[1] - 1e-7 >= vals[2] - 2e-7


def test_weak_duality_once_feasible():
    _, sol = inducibility(even_tree(6), 6)
    feasible = [h for h in sol.history if h[2] < 1e-6 and h[3] < 1e-6]
    assert feasible
    for pobj, dobj, *_ in feasible:
        assert dobj <= pobj + 1e-6


def _cvxpy_value(inst):
    cp = pytest.importorskip("cvxpy")
    m = inst.n_constraints
    exprs = [0] * m
    cons = []
    obj = 0
    for blk in inst.blocks:
        a = blk.float_coeffs()
        if blk.kind == "psd":
            X = cp.Variable((blk.size, blk.size), symmetric=True)
            cons.append(X >> 0)
            for i in range(m):
                if np.any(a[i]):
                    exprs[i] = exprs[i] + cp.sum(cp.multiply(a[i], X))
        else:
            x = cp.Variable(blk.size, nonneg=blk.kind == "nonneg")
            for i in range(m):
                if np.any(a[i]):
                    exprs[i] = exprs[i] + a[i] @ x
            obj = obj + blk.float_cost() @ x
    cons += [exprs[i] == float(inst.rhs[i]) for i in range(m)]
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver="CLARABEL")
    return prob.value


@pytest.mark.parametrize("target,level", [(even_tree(5), 5), (even_tree(6), 6), (OPEN_TREE, 6)])
def test_against_external_solver(target, level):
    inst, sol = inducibility(target, level)
    assert sol.objective == pytest.approx(_cvxpy_value(inst), abs=1e-6)


def test_tiny_lp_and_free_variables():
    # min x1 + 2 x2 - u  s.t. x1 + x2 = 1, u = 1/2  -> 1/2
    blocks = [SdpBlock("x", "nonneg", np.array([[1, 1], [0, 0]]), cost=[Fraction(1), Fraction(2)]),
              SdpBlock("u", "free", np.array([[0], [1]]), cost=[Fraction(-1)])]
    sol = solve(SdpInstance(blocks, [Fraction(1), Fraction(1, 2)], ["a", "b"]))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(0.5, abs=1e-7)


def test_infeasible_is_reported():
    blocks = [SdpBlock("X", "psd", np.array([[[1]]]))]
    cost_holder = SdpBlock("t", "nonneg", np.array([[0]]), cost=[Fraction(1)])
    sol = solve(SdpInstance(blocks + [cost_holder], [Fraction(-1)], ["r"]))
    assert sol.status != "optimal"


def test_no_constraints():
    sol = solve(SdpInstance([], [], []))
    assert sol.status == "optimal" and sol.objective == 0


def test_bad_targets():
    with pytest.raises(TreeError):
        assemble_inducibility_sdp("(1*)", 4)
    with pytest.raises(TreeError):
        assemble_inducibility_sdp(even_tree(6), 5)


def test_sdpa_structure_for_even_five():
    inst = assemble_inducibility_sdp(even_tree(5), 5)
    c, struct, entries = sdpa_data(inst)
    assert struct == [2, 5, -4]
    assert len(c) == 3
    text = export_sdpa(inst)
    assert text.splitlines()[1].startswith("3 = mDIM")
    assert read_sdpa(text) == (c, struct, entries)


def test_sdpa_round_trip_file(tmp_path):
    inst = assemble_inducibility_sdp(OPEN_TREE, 6)
    path = tmp_path / "open6.dat-s"
    text = export_sdpa(inst, path)
    assert path.read_text() == text
    c, struct, entries = read_sdpa(text)
    assert (c, struct, entries) == sdpa_data(inst)
    # reassemble and compare the first constraint matrix of the first block
    a = inst.blocks[0].float_coeffs()
    got = np.zeros_like(a[0])
    for i, b, r, s, v in entries:
        if i == 1 and b == 1:
            got[r - 1, s - 1] = got[s - 1, r - 1] = v
    assert np.allclose(got, a[0])


def test_sdpa_header_only():
    text = export_sdpa(SdpInstance([], [], []))
    assert read_sdpa(text) == ([], [], [])
