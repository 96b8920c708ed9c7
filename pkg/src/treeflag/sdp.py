"""Semidefinite programs: exact assembly, a primal-dual interior point solver,
and SDPA sparse-format export.

Every instance has the standard form

    minimise    sum_b <C_b, X_b>
    subject to  sum_b A_b(X_b) = rhs,

where each block ``X_b`` is a PSD matrix, a nonnegative vector or a free
vector.  Coefficients are kept as integer arrays over a common denominator, so
assembly is exact; conversion to floats happens only when solving.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import logging

import numpy as np

from .flags import QuantumFlag, expand_to_level
from .hierarchy import build_level
from .trees import EMPTY, TreeError, as_tree

log = logging.getLogger(__name__)

STATUSES = ("optimal", "max-iter", "infeasible-suspected", "numerical-failure")


@dataclass
class SdpBlock:
    """One variable block.

    ``coeffs`` has shape (m, n, n) for PSD blocks and (m, n) for scalar blocks;
    the true coefficients are ``coeffs / denom``.  ``cost`` (scalar blocks only)
    is a list of rationals.
    """

    name: str
    kind: str
    coeffs: np.ndarray
    denom: int = 1
    cost: list = None
    sigma: object = None
    flags: list = None

    @property
    def size(self):
        return self.coeffs.shape[1]

    def float_coeffs(self):
        return np.asarray(self.coeffs, dtype=float) / self.denom

    def float_cost(self):
        if self.cost is None:
            return np.zeros(self.size)
        return np.array([float(c) for c in self.cost])


@dataclass
class SdpInstance:
    blocks: list
    rhs: list
    row_labels: list
    meta: dict = field(default_factory=dict)

    @property
    def n_constraints(self):
        return len(self.rhs)

    def block(self, name):
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)


@dataclass
class SdpSolution:
    status: str
    primal_objective: float
    dual_objective: float
    gap: float
    iterations: int
    blocks: dict
    y: np.ndarray
    history: list = field(default_factory=list)
    message: str = ""

    @property
    def objective(self):
        return self.primal_objective


def _target_vector(target, level):
    if isinstance(target, QuantumFlag):
        q = target
    else:
        q = QuantumFlag({as_tree(target): Fraction(1)})
    for t in q.terms:
        if t.is_labeled:
            raise TreeError("targets must be unlabelled trees")
        if t.size > level:
            raise TreeError("target %s has more leaves than the level %d" % (t, level))
    return expand_to_level(q, level)


def hierarchy_psd_blocks(level, prefix="sos"):
    """PSD blocks of all types smaller than the level (the rest act as slacks)."""
    h = build_level(level)
    out = []
    for b in h.blocks:
        if b.sigma.size == level:
            continue
        out.append(SdpBlock("%s:%s" % (prefix, b.sigma), "psd",
                            np.ascontiguousarray(np.transpose(b.counts, (2, 0, 1))),
                            b.denom, sigma=b.sigma, flags=list(b.flags)))
    return h, out


def assemble_inducibility_sdp(target, level):
    """SDP for the smallest t with t*empty - target a sum of squares plus slacks.

    One equality per basis tree U of the level:
    sum_sigma <M_sigma, A_sigma,U> + x_U - t = -target_U.
    """
    if level < 1:
        raise TreeError("level must be at least 1")
    tvec = _target_vector(target, level)
    h, blocks = hierarchy_psd_blocks(level)
    m = len(h.basis)
    blocks.append(SdpBlock("slack", "nonneg", np.eye(m, dtype=np.int64)))
    blocks.append(SdpBlock("t", "nonneg", -np.ones((m, 1), dtype=np.int64),
                           cost=[Fraction(1)]))
    rhs = [-tvec.coefficient(u) for u in h.basis]
    meta = {"kind": "inducibility", "level": level, "target": tvec if isinstance(target, QuantumFlag)
            else as_tree(target), "basis": h.basis}
    return SdpInstance(blocks, rhs, [u.encoding() for u in h.basis], meta)


# ---------------------------------------------------------------- solver


def _sym(a):
    return 0.5 * (a + a.T)


def _max_step(x, dx):
    """Largest alpha with x + alpha*dx PSD (inf when dx keeps it PSD)."""
    try:
        lo = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return 0.0
    li = np.linalg.inv(lo)
    lam = np.linalg.eigvalsh(_sym(li @ dx @ li.T)).min()
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x, dx):
    neg = dx < 0
    if not neg.any():
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


class _Problem:
    def __init__(self, inst):
        self.m = inst.n_constraints
        self.b = np.array([float(v) for v in inst.rhs])
        self.psd, self.lp, self.free = [], [], []
        for blk in inst.blocks:
            if blk.kind == "psd":
                self.psd.append(blk)
            elif blk.kind == "nonneg":
                self.lp.append(blk)
            elif blk.kind == "free":
                self.free.append(blk)
            else:
                raise ValueError("unknown block kind %r" % blk.kind)
        m = self.m
        self.A = [blk.float_coeffs() for blk in self.psd]
        self.C = [np.zeros((blk.size, blk.size)) for blk in self.psd]
        self.Alp = (np.hstack([blk.float_coeffs() for blk in self.lp])
                    if self.lp else np.zeros((m, 0)))
        self.clp = (np.concatenate([blk.float_cost() for blk in self.lp])
                    if self.lp else np.zeros(0))
        self.B = (np.hstack([blk.float_coeffs() for blk in self.free])
                  if self.free else np.zeros((m, 0)))
        self.cf = (np.concatenate([blk.float_cost() for blk in self.free])
                   if self.free else np.zeros(0))
        # row scaling for conditioning
        norms = np.zeros(m)
        for a in self.A:
            norms = np.maximum(norms, np.abs(a).reshape(m, -1).max(axis=1) if a.size else 0)
        if self.Alp.size:
            norms = np.maximum(norms, np.abs(self.Alp).max(axis=1))
        if self.B.size:
            norms = np.maximum(norms, np.abs(self.B).max(axis=1))
        norms[norms == 0] = 1.0
        self.scale = 1.0 / norms
        self.A = [a * self.scale[:, None, None] for a in self.A]
        self.Alp = self.Alp * self.scale[:, None]
        self.B = self.B * self.scale[:, None]
        self.b = self.b * self.scale

    def op(self, xs, x, u):
        out = self.Alp @ x + self.B @ u
        for a, xb in zip(self.A, xs):
            out = out + np.tensordot(a, xb, axes=([1, 2], [0, 1]))
        return out

    def adj(self, y):
        return [np.tensordot(y, a, axes=1) for a in self.A], self.Alp.T @ y, self.B.T @ y


def solve(inst, tol=1e-8, max_iter=200, verbose=False):
    """Mehrotra predictor-corrector interior point method (HKM direction).

    Stops when the relative duality gap and both infeasibilities fall below
    ``tol``.  Never raises on numerical trouble: the status reports it.
    """
    p = _Problem(inst)
    m = p.m
    nb = [a.shape[1] for a in p.A]
    nlp, nf = p.Alp.shape[1], p.B.shape[1]
    ntot = sum(nb) + nlp
    if m == 0:
        return SdpSolution("optimal", 0.0, 0.0, 0.0, 0, {}, np.zeros(0))

    anorm = max([np.abs(a).max() for a in p.A if a.size] + [np.abs(p.Alp).max() if nlp else 0, 1.0])
    xi = max(10.0, np.sqrt(max(nb + [1])), float(np.max(1 + np.abs(p.b))) / anorm)
    eta = max(10.0, np.sqrt(max(nb + [1])), anorm, float(np.max(np.abs(p.clp), initial=0)))
    xs = [xi * np.eye(n) for n in nb]
    zs = [eta * np.eye(n) for n in nb]
    x = xi * np.ones(nlp)
    z = eta * np.ones(nlp)
    u = np.zeros(nf)
    y = np.zeros(m)
    bnorm = 1 + np.linalg.norm(p.b)
    cnorm = 1 + np.linalg.norm(p.clp) + np.linalg.norm(p.cf)
    history = []
    status, message = "max-iter", ""
    it = 0

    def objectives():
        pobj = float(p.clp @ x + p.cf @ u) + sum(float(np.sum(c * xb)) for c, xb in zip(p.C, xs))
        return pobj, float(p.b @ y)

    best = None
    for it in range(1, max_iter + 1):
        rp = p.b - p.op(xs, x, u)
        ay, alpy, by = p.adj(y)
        rds = [c - a - zb for c, a, zb in zip(p.C, ay, zs)]
        rdl = p.clp - alpy - z
        rf = p.cf - by
        pobj, dobj = objectives()
        pinf = np.linalg.norm(rp) / bnorm
        dinf = (sum(np.linalg.norm(r) for r in rds) + np.linalg.norm(rdl)
                + np.linalg.norm(rf)) / cnorm
        gap = abs(pobj - dobj)
        rel = gap / (1 + abs(pobj) + abs(dobj))
        mu = (sum(float(np.sum(a * b)) for a, b in zip(xs, zs)) + float(x @ z)) / max(ntot, 1)
        history.append((pobj, dobj, pinf, dinf, mu))
        if verbose:
            log.info("it %3d pobj %.10g dobj %.10g pinf %.2e dinf %.2e mu %.2e",
                     it, pobj, dobj, pinf, dinf, mu)
        if rel < tol and pinf < tol and dinf < tol:
            status = "optimal"
            break
        merit = max(rel, pinf, dinf)
        if best is not None and merit > 1e3 * best[0] and best[0] < 1e-5:
            # numerical breakdown after near convergence: fall back to the best iterate
            merit, xs, x, u, zs, z, y = best
            history.append(history[best_it])
            message = "stopped at best iterate (accuracy %.2g)" % merit
            status = "optimal" if merit < 10 * tol else "max-iter"
            break
        if best is None or merit < best[0]:
            best = (merit, [a.copy() for a in xs], x.copy(), u.copy(),
                    [a.copy() for a in zs], z.copy(), y.copy())
            best_it = len(history) - 1
        scale = max(1.0, abs(pobj), abs(dobj))
        if (abs(pobj) > 1e9 and pinf < 1e-3) or (abs(dobj) > 1e9 and dinf < 1e-3) \
                or max([np.abs(a).max() for a in xs] + [np.abs(x).max(initial=0),
                                                        np.abs(u).max(initial=0)]) > 1e12:
            status = "infeasible-suspected"
            message = "iterates diverge (objective scale %.3g)" % scale
            break
        try:
            zinv = [np.linalg.inv(zb) for zb in zs]
            # Schur complement
            M = np.zeros((m, m))
            for a, xb, zi in zip(p.A, xs, zinv):
                g = np.einsum("kl,jlr,rs->jks", xb, a, zi, optimize=True)
                M += np.einsum("iks,jsk->ij", a, g, optimize=True)
            d = x / z if nlp else np.zeros(0)
            M += (p.Alp * d) @ p.Alp.T
            M = 0.5 * (M + M.T)
            try:
                chol = np.linalg.cholesky(M)
            except np.linalg.LinAlgError:
                chol = None
            if chol is not None:
                def msolve(r):
                    return np.linalg.solve(chol.T, np.linalg.solve(chol, r))

                if nf:
                    S = p.B.T @ msolve(p.B)
                    S = 0.5 * (S + S.T)

                def kkt(r1, r2):
                    if nf:
                        du = np.linalg.solve(S, p.B.T @ msolve(r1) - r2)
                        return msolve(r1 - p.B @ du), du
                    return msolve(r1), np.zeros(0)
            else:
                # rows reached only by free variables: solve the saddle point system
                K = np.block([[M, p.B], [p.B.T, np.zeros((nf, nf))]])

                def kkt(r1, r2):
                    sol = np.linalg.lstsq(K, np.concatenate([r1, r2]), rcond=None)[0]
                    return sol[:m], sol[m:]

            def direction(rcs, rcl):
                r1 = rp.copy()
                for a, xb, zi, rc, rd in zip(p.A, xs, zinv, rcs, rds):
                    t = rc @ zi - xb @ rd @ zi
                    r1 -= np.tensordot(a, _sym(t), axes=([1, 2], [0, 1]))
                if nlp:
                    r1 -= p.Alp @ (rcl / z - x * rdl / z)
                dy, du = kkt(r1, rf)
                for _ in range(3):
                    ady, alpdy, bdy = p.adj(dy)
                    dzs = [rd - a for rd, a in zip(rds, ady)]
                    dxs = [_sym(rc @ zi - xb @ dz @ zi)
                           for rc, xb, dz, zi in zip(rcs, xs, dzs, zinv)]
                    dz = rdl - alpdy
                    dx = (rcl - x * dz) / z if nlp else np.zeros(0)
                    # iterative refinement of the Newton step
                    e1 = rp - p.op(dxs, dx, du)
                    e2 = rf - bdy
                    if np.linalg.norm(e1) + np.linalg.norm(e2) <= 1e-14 * bnorm:
                        break
                    cy, cu = kkt(e1, e2)
                    dy, du = dy + cy, du + cu
                return dxs, dx, du, dy, dzs, dz

            def steps(dxs, dx, dzs, dz):
                ap = min([_max_step(xb, d) for xb, d in zip(xs, dxs)] + [_max_step_lp(x, dx)])
                ad = min([_max_step(zb, d) for zb, d in zip(zs, dzs)] + [_max_step_lp(z, dz)])
                return ap, ad

            # predictor
            rcs = [-xb @ zb for xb, zb in zip(xs, zs)]
            rcl = -x * z
            dxs, dx, du, dy, dzs, dz = direction(rcs, rcl)
            ap, ad = steps(dxs, dx, dzs, dz)
            ap, ad = min(1.0, ap), min(1.0, ad)
            mu_aff = (sum(float(np.sum((xb + ap * a) * (zb + ad * b)))
                          for xb, a, zb, b in zip(xs, dxs, zs, dzs))
                      + float((x + ap * dx) @ (z + ad * dz))) / max(ntot, 1)
            sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0
            # corrector
            rcs = [sigma * mu * np.eye(n) - xb @ zb - a @ b
                   for n, xb, zb, a, b in zip(nb, xs, zs, dxs, dzs)]
            rcl = sigma * mu - x * z - dx * dz
            dxs, dx, du, dy, dzs, dz = direction(rcs, rcl)
            ap, ad = steps(dxs, dx, dzs, dz)
            tau = 0.98 if rel < 1e-4 else 0.95
            ap, ad = min(1.0, tau * ap), min(1.0, tau * ad)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            status, message = "numerical-failure", str(exc)
            break
        if not (np.isfinite(ap) and np.isfinite(ad)) or max(ap, ad) < 1e-12:
            status, message = "numerical-failure", "step length collapsed"
            break
        xs = [xb + ap * d for xb, d in zip(xs, dxs)]
        x = x + ap * dx
        u = u + ap * du
        zs = [zb + ad * d for zb, d in zip(zs, dzs)]
        z = z + ad * dz
        y = y + ad * dy
    pobj, dobj = objectives()
    values = {}
    for blk, xb in zip(p.psd, xs):
        values[blk.name] = xb
    off = 0
    for blk in p.lp:
        values[blk.name] = x[off:off + blk.size]
        off += blk.size
    off = 0
    for blk in p.free:
        values[blk.name] = u[off:off + blk.size]
        off += blk.size
    return SdpSolution(status, pobj, dobj * 1.0, abs(pobj - dobj), it, values, y * p.scale,
                       history, message)


def inducibility(target, level, tol=1e-8, max_iter=200):
    inst = assemble_inducibility_sdp(target, level)
    return inst, solve(inst, tol=tol, max_iter=max_iter)


# ---------------------------------------------------------------- SDPA


def sdpa_data(inst):
    """SDPA data: (c, block_struct, entries) for  max F0.Y s.t. Fi.Y = ci.

    PSD blocks map to matrix blocks; nonnegative and free scalars share one
    diagonal block, a free scalar u being split as u+ - u-.
    """
    c = [float(v) for v in inst.rhs]
    struct = []
    entries = []
    diag = []  # (column coefficients, cost, sign)
    bno = 0
    for blk in inst.blocks:
        if blk.kind != "psd":
            continue
        bno += 1
        struct.append(blk.size)
        a = blk.float_coeffs()
        for i in range(a.shape[0]):
            nz = np.argwhere(np.triu(a[i]) != 0)
            for r, s in nz:
                entries.append((i + 1, bno, int(r) + 1, int(s) + 1, float(a[i, r, s])))
    for blk in inst.blocks:
        if blk.kind == "psd":
            continue
        a = blk.float_coeffs()
        cost = blk.float_cost()
        for j in range(blk.size):
            diag.append((a[:, j], cost[j], 1.0))
            if blk.kind == "free":
                diag.append((-a[:, j], -cost[j], -1.0))
    if diag:
        bno += 1
        struct.append(-len(diag))
        for pos, (col, cost, _) in enumerate(diag, start=1):
            if cost:
                entries.append((0, bno, pos, pos, -float(cost)))
            for i in np.flatnonzero(col):
                entries.append((int(i) + 1, bno, pos, pos, float(col[i])))
    entries.sort()
    return c, struct, entries


def export_sdpa(inst, path=None):
    c, struct, entries = sdpa_data(inst)
    lines = ['"treeflag SDP: %s"' % inst.meta.get("description", inst.meta.get("kind", "sdp")),
             "%d = mDIM" % len(c),
             "%d = nBLOCK" % len(struct),
             " ".join(str(s) for s in struct),
             " ".join(repr(v) for v in c)]
    lines += ["%d %d %d %d %r" % e for e in entries]
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_sdpa(text):
    """Parse SDPA sparse format into (c, block_struct, sorted entries)."""
    rows = []
    for line in text.splitlines():
        s = line.strip()
        if s[:1] in ('"', "*"):
            continue
        rows.append(s.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ")
                    .replace(")", " ").split())
    while rows and not rows[0]:
        rows.pop(0)
    m = int(rows[0][0])
    nblock = int(rows[1][0])
    struct = [int(v) for v in rows[2][:nblock]]
    c = [float(v) for v in rows[3][:m]] if len(rows) > 3 else []
    entries = [(int(f[0]), int(f[1]), int(f[2]), int(f[3]), float(f[4])) for f in rows[4:] if f]
    entries.sort()
    return c, struct, entries
