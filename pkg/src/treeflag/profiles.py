"""Outer approximations of the joint density profile of two trees.

The x-range is cut into slices [a, b].  On each slice a linear function
``c*x + d`` is optimised so that ``c*X + d - Y`` (upper bound) or
``Y - c*X - d`` (lower bound) lies in the truncated quadratic module

    M_L = SOS_L + (X - a) SOS_{L-|X|} + (b - X) SOS_{L-|X|},

which makes the bound valid for every tree sequence whose X-density lies in
the slice.  The objective is the mean of the line over the slice.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
import math

import numpy as np

from .flags import QuantumFlag, density_table, expand_to_level, glue_product
from .hierarchy import build_level
from .sdp import SdpBlock, SdpInstance, hierarchy_psd_blocks, inducibility, solve
from .trees import TreeError, as_tree, caterpillar, enumerate_trees, even_tree

CSV_COLUMNS = ["slice_lo", "slice_hi", "lower_slope", "lower_intercept",
               "upper_slope", "upper_intercept", "status_lower", "status_upper",
               "conjectured_upper_at_mid"]


@dataclass(frozen=True)
class ProfileSpec:
    x_tree: object
    y_tree: object
    level: int

    def __post_init__(self):
        x, y = as_tree(self.x_tree), as_tree(self.y_tree)
        object.__setattr__(self, "x_tree", x)
        object.__setattr__(self, "y_tree", y)
        if x.is_labeled or y.is_labeled or x.is_empty or y.is_empty:
            raise TreeError("profile trees must be non-empty and unlabelled")
        if self.level < x.size + 2:
            raise TreeError("level %d must be at least |x_tree| + 2 = %d"
                            % (self.level, x.size + 2))
        if y.size > self.level:
            raise TreeError("y_tree has more leaves than the level")


@dataclass
class SliceBound:
    lo: Fraction
    hi: Fraction
    side: str
    slope: float
    intercept: float
    status: str
    correction: float = 0.0

    def at(self, x):
        return self.slope * float(x) + self.intercept


@dataclass
class ProfileResult:
    spec: ProfileSpec
    slices: list = field(default_factory=list)  # (lo, hi, lower, upper)

    def _envelope(self, x, side):
        x = Fraction(x)
        vals = []
        for lo, hi, lower, upper in self.slices:
            if lo <= x <= hi:
                bound = upper if side == "upper" else lower
                if bound is not None and bound.status == "optimal":
                    vals.append(bound.at(x))
        if not vals:
            return None
        return min(vals) if side == "upper" else max(vals)

    def upper_at(self, x):
        return self._envelope(x, "upper")

    def lower_at(self, x):
        return self._envelope(x, "lower")

    def rows(self):
        out = []
        for lo, hi, lower, upper in self.slices:
            conj = conjectured_upper(self.spec, (float(lo) + float(hi)) / 2)
            out.append([float(lo), float(hi),
                        lower.slope if lower else None, lower.intercept if lower else None,
                        upper.slope if upper else None, upper.intercept if upper else None,
                        lower.status if lower else "skipped", upper.status if upper else "skipped",
                        conj])
        return out

    def to_csv(self, path=None):
        import csv
        import io
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows():
            w.writerow(["" if v is None else (("%.10g" % v) if isinstance(v, float) else v)
                        for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_svg(self, path=None, width=480, height=360):
        pad = 40
        xs = [float(s[0]) for s in self.slices] + [float(s[1]) for s in self.slices]
        x0, x1 = min(xs), max(xs)
        ys = [0.0]
        for lo, hi, lower, upper in self.slices:
            for b in (lower, upper):
                if b is not None and b.status == "optimal":
                    ys += [b.at(lo), b.at(hi)]
        y0, y1 = min(ys), max(ys) or 1.0

        def px(x, y):
            sx = pad + (x - x0) / ((x1 - x0) or 1) * (width - 2 * pad)
            sy = height - pad - (y - y0) / ((y1 - y0) or 1) * (height - 2 * pad)
            return "%.2f,%.2f" % (sx, sy)

        parts = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d">' % (width, height),
                 '<rect width="100%" height="100%" fill="white"/>']
        for side, colour in (("lower", "#1f77b4"), ("upper", "#d62728")):
            for lo, hi, lower, upper in self.slices:
                b = upper if side == "upper" else lower
                if b is None or b.status != "optimal":
                    continue
                parts.append('<polyline fill="none" stroke="%s" points="%s %s"/>'
                             % (colour, px(float(lo), b.at(lo)), px(float(hi), b.at(hi))))
        curve = conjectured_curve(self.spec)
        if curve:
            pts = " ".join(px(x, y) for x, y in curve if x0 <= x <= x1)
            parts.append('<polyline fill="none" stroke="#2ca02c" stroke-dasharray="4 3" points="%s"/>'
                         % pts)
        parts.append('<text x="%d" y="%d" font-size="12">%s vs %s, level %d</text>'
                     % (pad, pad / 2, self.spec.x_tree, self.spec.y_tree, self.spec.level))
        parts.append("</svg>")
        text = "\n".join(parts) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _frac_matrix(rows):
    den = 1
    for row in rows:
        for v in row:
            den = den * v.denominator // math.gcd(den, v.denominator)
    return np.array([[int(v * den) for v in row] for row in rows], dtype=object), den


@lru_cache(maxsize=None)
def _generator_data(x_tree, level):
    """Coefficient blocks of X*s and s for s in SOS_{L-|X|}, on the basis T_L.

    Returns a list of (name, kind, P-part numerators, E-part numerators, denom,
    sigma, flags) where the true coefficients of (X - a) s are
    ``(P - a E) / denom``.
    """
    lower = level - x_tree.size
    h_low = build_level(lower)
    basis = enumerate_trees(level)
    pos = {u: i for i, u in enumerate(basis)}
    prow, erow = [], []
    dens = density_table(lower, level)
    for up in h_low.basis:
        g = glue_product(x_tree, up, level)
        col_p = [Fraction(0)] * len(basis)
        for u, c in g.terms.items():
            col_p[pos[u]] = c
        col_e = [Fraction(0)] * len(basis)
        for u, c in dens[up.encoding()].items():
            col_e[pos[u]] = c
        prow.append(col_p)
        erow.append(col_e)
    # matrices indexed [U, U']
    P, dp = _frac_matrix(list(map(list, zip(*prow))))
    E, de = _frac_matrix(list(map(list, zip(*erow))))
    den = dp * de // math.gcd(dp, de)
    P = P * (den // dp)
    E = E * (den // de)
    out = []
    for b in h_low.blocks:
        counts = b.counts.astype(object)
        if b.sigma.size == lower:
            continue
        bp = np.tensordot(P, counts, axes=([1], [2]))
        be = np.tensordot(E, counts, axes=([1], [2]))
        out.append((str(b.sigma), "psd", bp, be, den * b.denom, b.sigma, list(b.flags)))
    # types of size L-|X| contribute a nonnegative multiple of one tree each
    out.append(("slack", "nonneg", P, E, den, None, None))
    return out, basis


def _tree_vector(t, level, basis):
    v = expand_to_level(QuantumFlag({t: 1}), level)
    return [v.coefficient(u) for u in basis]


def assemble_slice_sdp(spec, lo, hi, side, use_generators=True):
    """SDP for the best linear bound of the given side on the slice [lo, hi]."""
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    lo, hi = Fraction(lo), Fraction(hi)
    if not lo < hi:
        raise ValueError("empty slice [%s, %s]" % (lo, hi))
    L = spec.level
    h, blocks = hierarchy_psd_blocks(L, "s0")
    basis = h.basis
    m = len(basis)
    blocks.append(SdpBlock("s0:slack", "nonneg", np.eye(m, dtype=np.int64)))
    if use_generators:
        gens, _ = _generator_data(spec.x_tree, L)
        # g1 = X - a and g2 = b - X
        for g, (pcoef, ecoef) in enumerate(((1, -lo), (-1, hi))):
            d2 = ecoef.denominator
            for name, kind, bp, be, den, sigma, flags in gens:
                num = bp * (pcoef * d2) + be * int(ecoef * d2)
                blocks.append(SdpBlock("s%d:%s" % (g + 1, name), kind, num, den * d2,
                                       sigma=sigma, flags=flags))
    xvec = _tree_vector(spec.x_tree, L, basis)
    yvec = _tree_vector(spec.y_tree, L, basis)
    xcol, xden = _frac_matrix([[v] for v in xvec])
    sign = -1 if side == "upper" else 1
    free = np.hstack([xcol * sign, np.full((m, 1), sign * xden, dtype=object)])
    mid = (lo + hi) / 2
    cost = [mid, Fraction(1)] if side == "upper" else [-mid, Fraction(-1)]
    blocks.append(SdpBlock("line", "free", free, xden, cost=cost))
    rhs = [-v for v in yvec] if side == "upper" else list(yvec)
    meta = {"kind": "profile-slice", "level": L, "side": side, "lo": lo, "hi": hi,
            "basis": basis}
    return SdpInstance(blocks, rhs, [u.encoding() for u in basis], meta)


def certificate_shortfall(inst, sol):
    """Most negative coefficient of the residual left by the numerical solution.

    PSD blocks are projected onto the PSD cone and nonnegative blocks clipped
    at zero first, so that the remaining identity holds with genuine squares.
    Moving the intercept by this amount makes the linear bound valid.
    """
    r = np.array([float(v) for v in inst.rhs])
    for blk in inst.blocks:
        val = np.asarray(sol.blocks[blk.name], dtype=float)
        a = blk.float_coeffs()
        if blk.kind == "psd":
            lam, q = np.linalg.eigh(0.5 * (val + val.T))
            val = (q * np.maximum(lam, 0)) @ q.T
            r -= np.tensordot(a, val, axes=([1, 2], [0, 1]))
        elif blk.kind == "nonneg":
            r -= a @ np.maximum(val, 0)
        else:
            r -= a @ val
    return max(0.0, -float(r.min()))


def slice_bound(spec, lo, hi, side, use_generators=True, tol=1e-8):
    """Best linear bound of one side on [lo, hi], with a certified intercept."""
    inst = assemble_slice_sdp(spec, lo, hi, side, use_generators)
    sol = solve(inst, tol=tol)
    c, d = (float(v) for v in sol.blocks["line"])
    shift = certificate_shortfall(inst, sol) if sol.status == "optimal" else 0.0
    d = d + shift if side == "upper" else d - shift
    return SliceBound(Fraction(lo), Fraction(hi), side, c, d, sol.status, shift)


def _slice_job(args):
    spec, lo, hi, use_generators = args
    return (lo, hi, slice_bound(spec, lo, hi, "lower", use_generators),
            slice_bound(spec, lo, hi, "upper", use_generators))


def default_endpoints(spec, slices=100):
    """Uniform slices over [0, I_L(x_tree)] (right end rounded up, capped at 1)."""
    _, sol = inducibility(spec.x_tree, spec.level)
    top = min(Fraction(1), Fraction(math.ceil(sol.primal_objective * 10 ** 6), 10 ** 6))
    return [top * Fraction(i, slices) for i in range(slices + 1)]


def outer_approximation(spec, slices=100, endpoints=None, threads=1, use_generators=True):
    """Lower and upper linear bounds on every slice of the x-range."""
    if endpoints is None:
        endpoints = default_endpoints(spec, slices)
    endpoints = [Fraction(e) for e in endpoints]
    if any(b <= a for a, b in zip(endpoints, endpoints[1:])):
        raise ValueError("slice endpoints must be strictly increasing")
    jobs = [(spec, a, b, use_generators) for a, b in zip(endpoints, endpoints[1:])]
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_slice_job, jobs))
    else:
        results = [_slice_job(j) for j in jobs]
    return ProfileResult(spec, results)


# ------------------------------------------------------- explicit constructions


def double_caterpillar_densities(k, p):
    """Limit densities of (cat_k, E_6) in double caterpillars with split p."""
    p = Fraction(p)
    q = 1 - p
    cat = p ** k + q ** k + k * (p * q ** (k - 1) + p ** (k - 1) * q)
    return cat, 20 * p ** 3 * q ** 3


def finite_double_caterpillar_density(k, p, n):
    """Exact densities (cat_k, E_6) in the double caterpillar with n leaves."""
    p = Fraction(p)
    a = math.floor(p * n)
    b = math.ceil((1 - p) * n)
    comb = math.comb
    cat = Fraction(comb(a, k) + comb(b, k) + a * comb(b, k - 1) + b * comb(a, k - 1), comb(n, k))
    e6 = Fraction(comb(a, 3) * comb(b, 3), comb(n, 6))
    return cat, e6


def even_limit_caterpillar_density(k):
    """Density of cat_k in the limit of even trees."""
    prod = 1
    for j in range(1, k):
        prod *= 2 ** j - 1
    return Fraction(math.factorial(k), 2 * prod)


@lru_cache(maxsize=None)
def _even_c(k):
    if k <= 1:
        return Fraction(1)
    s = k // 2
    if k % 2 == 0:
        return _even_c(s) ** 2 / (2 ** k - 2)
    return _even_c(s) * _even_c(s + 1) / (2 ** (k - 1) - 1)


def even_limit_inducibility(k):
    """Density of E_k in the limit of even trees (its inducibility)."""
    return math.factorial(k) * _even_c(k)


def _is_conjecture_pair(spec):
    x, y = spec.x_tree, spec.y_tree
    return x.size >= 4 and x == caterpillar(x.size) and y == even_tree(6)


def conjectured_curve(spec, points=200):
    """Conjectured upper boundary (double caterpillars); empty when not applicable."""
    if not _is_conjecture_pair(spec):
        return []
    k = spec.x_tree.size
    out = []
    for i in range(points + 1):
        p = 0.5 * i / points
        c, e = double_caterpillar_densities(k, Fraction(p))
        out.append((float(c), float(e)))
    return out


def conjectured_upper(spec, x):
    """Conjectured upper boundary at x for caterpillars against E_6 (else None)."""
    if not _is_conjecture_pair(spec):
        return None
    k = spec.x_tree.size

    def xp(p):
        return float(double_caterpillar_densities(k, Fraction(p))[0])

    if not xp(0.5) <= x <= 1:
        return None
    lo, hi = 0.0, 0.5
    for _ in range(60):
        mid = (lo + hi) / 2
        if xp(mid) > x:
            lo = mid
        else:
            hi = mid
    p = (lo + hi) / 2
    return 20 * (p * (1 - p)) ** 3
