"""Rational sum-of-squares certificates: rounding, exact verification, JSON.

A certificate claims

    bound * empty - target  =  sum_blocks <V D V^T, [[F F^T]]> + sum_U s_U U  (+ R)

on the basis T_L, where D is an optional nonnegative diagonal (``weights``),
the slacks ``s_U`` are nonnegative and R is zero (relation ``eq``) or has
nonnegative coefficients (relation ``geq``).  Either way ``target <= bound``
holds for every tree sequence.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import json
import math

import numpy as np

from .flags import QuantumFlag, TypeMismatchError, expand_to_level, flag_type, unlabeled_square_matrix
from .hierarchy import build_level
from .trees import EMPTY, TreeError, as_tree, enumerate_trees, parse_tree


class CertificateError(ValueError):
    """Raised for malformed certificates."""


class RoundingBudgetError(ValueError):
    """Raised when rounding cannot keep the error below the requested budget."""


@dataclass
class CertificateBlock:
    sigma: object
    flags: list
    V: list
    weights: list = None

    def gram(self):
        """Exact V diag(weights) V^T as a list of lists of Fractions."""
        n = len(self.flags)
        r = len(self.V[0]) if n and self.V else 0
        w = self.weights or [Fraction(1)] * r
        return [[sum((self.V[i][k] * w[k] * self.V[j][k] for k in range(r)), Fraction(0))
                 for j in range(n)] for i in range(n)]


@dataclass
class RationalCertificate:
    level: int
    target: QuantumFlag
    bound: Fraction
    relation: str
    blocks: list
    slacks: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(certificate_to_dict(self), indent=1)

    @classmethod
    def from_json(cls, text):
        return certificate_from_dict(json.loads(text))


@dataclass
class VerificationResult:
    valid: bool
    bound: Fraction
    residual: QuantumFlag
    mismatch: tuple = None
    message: str = ""


def _frac(s):
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError, TypeError):
        raise CertificateError("bad rational %r" % (s,))


def certificate_to_dict(cert):
    target = cert.target
    if len(target.terms) == 1 and next(iter(target.terms.values())) == 1:
        tgt = next(iter(target.terms)).encoding()
    else:
        tgt = [{"coef": str(c), "tree": t.encoding()} for t, c in target.items()]
    blocks = []
    for b in cert.blocks:
        d = {"type": b.sigma.encoding(), "flags": [f.encoding() for f in b.flags],
             "V": [[str(v) for v in row] for row in b.V]}
        if b.weights is not None:
            d["weights"] = [str(w) for w in b.weights]
        blocks.append(d)
    return {"level": cert.level, "target": tgt, "bound": str(cert.bound),
            "relation": cert.relation, "blocks": blocks,
            "slacks": {t.encoding(): str(c) for t, c in sorted(cert.slacks.items(),
                                                                 key=lambda kv: kv[0].sort_key())}}


def certificate_from_dict(d):
    try:
        level = int(d["level"])
        tgt = d["target"]
        if isinstance(tgt, str):
            target = QuantumFlag({parse_tree(tgt): 1})
        else:
            target = QuantumFlag(sigma=EMPTY)
            for term in tgt:
                target = target + QuantumFlag({parse_tree(term["tree"]): _frac(term["coef"])})
        relation = d.get("relation", "eq")
        if relation not in ("eq", "geq"):
            raise CertificateError("relation must be 'eq' or 'geq'")
        blocks = []
        for b in d["blocks"]:
            flags = [parse_tree(f) for f in b["flags"]]
            V = [[_frac(v) for v in row] for row in b["V"]]
            w = [_frac(v) for v in b["weights"]] if b.get("weights") is not None else None
            blocks.append(CertificateBlock(parse_tree(b["type"]), flags, V, w))
        slacks = {parse_tree(t): _frac(c) for t, c in d.get("slacks", {}).items()}
        return RationalCertificate(level, target, _frac(d["bound"]), relation, blocks, slacks)
    except (KeyError, TypeError) as exc:
        raise CertificateError("malformed certificate: %s" % exc)


def load_certificate(path):
    with open(path) as fh:
        return RationalCertificate.from_json(fh.read())


def _lcm_den(values):
    d = 1
    for v in values:
        d = d * v.denominator // math.gcd(d, v.denominator)
    return d


def _block_products(block, level):
    """Coefficient data (counts (n, n, |T_L|) as ints, denom) for a block."""
    sigma = block.sigma
    h = build_level(level)
    for hb in h.blocks:
        if hb.sigma == sigma and set(hb.flags) >= set(block.flags):
            pos = {f: i for i, f in enumerate(hb.flags)}
            idx = [pos[f] for f in block.flags]
            return hb.counts[np.ix_(idx, idx)].astype(object), hb.denom
    mat = unlabeled_square_matrix(block.flags)
    basis = h.basis
    n = len(block.flags)
    entries = [[expand_to_level(mat[i][j], level) for j in range(n)] for i in range(n)]
    den = _lcm_den(c for row in entries for e in row for c in e.terms.values())
    counts = np.zeros((n, n, len(basis)), dtype=object)
    for i in range(n):
        for j in range(n):
            for u, c in entries[i][j].terms.items():
                counts[i, j, basis.index(u)] = int(c * den)
    return counts, den


def _check_block(block, level):
    sigma = block.sigma
    if not sigma.is_fully_labeled and not sigma.is_empty:
        raise CertificateError("block type %s has unlabelled leaves" % sigma)
    for f in block.flags:
        if flag_type(f) != sigma:
            raise CertificateError("flag %s does not have type %s" % (f, sigma))
    n = len(block.flags)
    if len(block.V) != n:
        raise CertificateError("V has %d rows for %d flags" % (len(block.V), n))
    widths = {len(row) for row in block.V}
    if len(widths) > 1:
        raise CertificateError("ragged V matrix")
    if block.weights is not None:
        if widths and len(block.weights) != widths.pop():
            raise CertificateError("weights do not match the columns of V")
        if any(w < 0 for w in block.weights):
            raise CertificateError("negative weight")
    for i in range(n):
        for j in range(n):
            if block.flags[i].size + block.flags[j].size - sigma.size > level:
                raise CertificateError("product of %s and %s exceeds level %d"
                                       % (block.flags[i], block.flags[j], level))


def sos_part(blocks, level):
    """Exact sum over blocks of <V D V^T, [[F F^T]]> on the basis T_L."""
    basis = enumerate_trees(level)
    total = [Fraction(0)] * len(basis)
    for block in blocks:
        _check_block(block, level)
        if not block.flags or not block.V or not block.V[0]:
            continue
        counts, den = _block_products(block, level)
        dv = _lcm_den(v for row in block.V for v in row)
        w = block.weights or [Fraction(1)] * len(block.V[0])
        dw = _lcm_den(w)
        vint = np.array([[int(v * dv) for v in row] for row in block.V], dtype=object)
        wint = np.array([int(x * dw) for x in w], dtype=object)
        gram = (vint * wint) @ vint.T
        num = np.tensordot(gram, counts, axes=([0, 1], [0, 1]))
        scale = dv * dv * dw * den
        for u in range(len(basis)):
            total[u] += Fraction(int(num[u]), scale)
    return QuantumFlag({basis[u]: c for u, c in enumerate(total) if c}, sigma=EMPTY)


def residual(cert):
    """bound*empty - target - sos - slacks, expanded on T_L."""
    L = cert.level
    for t, c in cert.slacks.items():
        if t.is_labeled or t.size > L:
            raise CertificateError("slack %s is not an unlabelled tree of size <= %d" % (t, L))
    lhs = expand_to_level(QuantumFlag({EMPTY: cert.bound}) - cert.target, L)
    slack = expand_to_level(QuantumFlag(cert.slacks, sigma=EMPTY), L) if cert.slacks else QuantumFlag(sigma=EMPTY)
    return lhs - sos_part(cert.blocks, L) - slack


def verify_certificate(cert):
    """Exact check of a certificate; never uses floating point."""
    if isinstance(cert, (str, bytes)):
        cert = RationalCertificate.from_json(cert)
    try:
        for t, c in cert.slacks.items():
            if c < 0:
                return VerificationResult(False, cert.bound, QuantumFlag(sigma=EMPTY), (t, c),
                                          "negative slack on %s" % t)
        res = residual(cert)
    except (CertificateError, TreeError, TypeMismatchError) as exc:
        return VerificationResult(False, cert.bound, QuantumFlag(sigma=EMPTY), None, str(exc))
    for t, c in res.items():
        if cert.relation == "eq" or c < 0:
            return VerificationResult(False, cert.bound, res, (t, c),
                                      "coefficient %s on %s violates relation %s"
                                      % (c, t.encoding(), cert.relation))
    return VerificationResult(True, cert.bound, res, None, "ok")


def kernel_check(block, vector):
    """True when V D V^T annihilates ``vector`` exactly (diagnostic only)."""
    g = block.gram()
    v = [Fraction(x) for x in vector]
    return all(sum((g[i][j] * v[j] for j in range(len(v))), Fraction(0)) == 0
               for i in range(len(g)))


def _round(values, denom):
    return [Fraction(int(round(v * denom)), denom) for v in values]


def _round_once(inst, sol, denom):
    level = inst.meta["level"]
    blocks = []
    for blk in inst.blocks:
        if blk.kind != "psd":
            continue
        x = sol.blocks[blk.name]
        lam, q = np.linalg.eigh(0.5 * (x + x.T))
        keep = lam > max(lam.max(), 0) * 1e-13
        v = q[:, keep] * np.sqrt(lam[keep])
        V = [_round(row, denom) for row in v]
        cols = [k for k in range(v.shape[1]) if any(V[i][k] for i in range(len(V)))]
        V = [[row[k] for k in cols] for row in V]
        if cols:
            blocks.append(CertificateBlock(blk.sigma, list(blk.flags), V))
    basis = inst.meta["basis"]
    slacks = {}
    if "slack" in sol.blocks:
        for u, v in zip(basis, _round(np.maximum(sol.blocks["slack"], 0), denom)):
            if v > 0:
                slacks[u] = v
    t = _round([float(sol.blocks["t"][0])], denom)[0]
    target = inst.meta["target"]
    if not isinstance(target, QuantumFlag):
        target = QuantumFlag({target: 1})
    trial = RationalCertificate(level, target, t, "geq", blocks, slacks)
    res = residual(trial)
    err = sum((abs(c) for c in res.terms.values()), Fraction(0))
    trial.bound = t + err
    return trial, err


def round_solution(inst, sol, denom_bound=10 ** 12, budget=None):
    """Round a numerical inducibility solution to a rigorous certificate.

    Eigenvalues of each block are clipped at zero, ``V = Q sqrt(Lambda)`` is
    rounded to the denominator ``denom_bound`` and slacks are rounded the same
    way.  The error f_err of the rounded identity is absorbed into the bound:
    ``bound = t + sum |f_err coefficients|``.  With a ``budget`` the smallest
    power of ten not above ``denom_bound`` whose error fits is found by
    bisection.
    """
    if inst.meta.get("kind") != "inducibility":
        raise CertificateError("rounding needs an inducibility instance")
    if budget is None:
        cert, _ = _round_once(inst, sol, denom_bound)
        return cert
    top = int(math.floor(math.log10(denom_bound)))
    best = None
    lo, hi = 1, top
    while lo <= hi:
        mid = (lo + hi) // 2
        cert, err = _round_once(inst, sol, 10 ** mid)
        if err <= budget:
            best = cert
            hi = mid - 1
        else:
            lo = mid + 1
    if best is None:
        cert, err = _round_once(inst, sol, denom_bound)
        raise RoundingBudgetError("rounding error %.3g exceeds budget %s" % (float(err), budget))
    return best
