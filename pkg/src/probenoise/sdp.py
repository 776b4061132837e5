"""A small primal-dual interior-point solver for block-diagonal SDPs.

Standard form::

    minimize    sum_b <C_b, X_b> + c_f . x_f + offset
    subject to  sum_b <A_kb, X_b> + (A_f x_f)_k = b_k      k = 1..m
                X_b PSD (real symmetric), x_f free

with dual::

    maximize    b . y + offset
    subject to  C_b - sum_k y_k A_kb = S_b PSD,   A_f^T y = c_f

Search directions are HKM with a Mehrotra predictor-corrector. Free
variables are kept in the Newton system as a saddle-point block instead of
being split into two nonnegative parts. Intended for problems with a few
dozen blocks of size up to ~20 and a few hundred constraints.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import BadProblem


@dataclass(eq=False)
class SdpProblem:
    blocks: list[int]
    c: list[np.ndarray]
    a: list[np.ndarray]  # per block, shape (m, n_b, n_b)
    b: np.ndarray
    c_free: np.ndarray
    a_free: np.ndarray  # shape (m, n_free)
    offset: float = 0.0
    labels: list[str] = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def n_free(self) -> int:
        return len(self.c_free)

    def apply(self, x: list[np.ndarray], x_free: np.ndarray | None = None) -> np.ndarray:
        """``A(X) + A_f x_f``."""
        out = np.zeros(self.m)
        for ab, xb in zip(self.a, x):
            out += ab.reshape(self.m, -1) @ xb.ravel()
        if self.n_free and x_free is not None:
            out += self.a_free @ x_free
        return out

    def adjoint(self, y: np.ndarray) -> list[np.ndarray]:
        return [np.tensordot(y, ab, axes=1) for ab in self.a]

    def objective(self, x: list[np.ndarray], x_free: np.ndarray | None = None) -> float:
        val = sum(float(np.vdot(cb, xb)) for cb, xb in zip(self.c, x)) + self.offset
        if self.n_free and x_free is not None:
            val += float(self.c_free @ x_free)
        return val

    def scaled(self, factor: float) -> "SdpProblem":
        """Same constraints, objective (and offset) multiplied by ``factor``."""
        return SdpProblem(
            list(self.blocks),
            [factor * cb for cb in self.c],
            self.a,
            self.b,
            factor * self.c_free,
            self.a_free,
            factor * self.offset,
            list(self.labels),
        )

    def constraint_matrix(self) -> np.ndarray:
        """All constraints as rows over the vectorised variables (upper triangles + free)."""
        cols = []
        for n, ab in zip(self.blocks, self.a):
            iu = np.triu_indices(n)
            # off-diagonal entries appear twice in <A, X>
            w = np.where(iu[0] == iu[1], 1.0, 2.0)
            cols.append(ab[:, iu[0], iu[1]] * w)
        if self.n_free:
            cols.append(self.a_free)
        return np.hstack(cols) if cols else np.zeros((self.m, 0))

    def check_rank(self, tol: float = 1e-10):
        full = self.constraint_matrix()
        if self.m:
            sv = np.linalg.svd(full, compute_uv=False)
            rank = int(np.sum(sv > tol * max(1.0, sv[0])))
            if rank < self.m:
                raise BadProblem(f"constraints are linearly dependent (rank {rank} < {self.m})")
        if self.n_free:
            sv = np.linalg.svd(self.a_free, compute_uv=False)
            if sv.size < self.n_free or sv[-1] <= tol * max(1.0, sv[0]):
                raise BadProblem("free variables are not determined by the constraints")

    def to_json(self) -> dict:
        cons = []
        for k in range(self.m):
            entries = []
            for bi, ab in enumerate(self.a):
                for i, j in zip(*np.nonzero(np.triu(ab[k]))):
                    entries.append([bi, int(i), int(j), float(ab[k, i, j])])
            free = [[int(j), float(v)] for j, v in enumerate(self.a_free[k]) if v] if self.n_free else []
            cons.append({"rhs": float(self.b[k]), "entries": entries, "free": free})
        obj = []
        for bi, cb in enumerate(self.c):
            for i, j in zip(*np.nonzero(np.triu(cb))):
                obj.append([bi, int(i), int(j), float(cb[i, j])])
        return {
            "blocks": list(self.blocks),
            "n_free": self.n_free,
            "offset": self.offset,
            "objective": obj,
            "objective_free": self.c_free.tolist(),
            "constraints": cons,
            "labels": list(self.labels),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


class SdpBuilder:
    """Incremental assembly of an :class:`SdpProblem` from sparse terms."""

    def __init__(self):
        self.blocks: list[int] = []
        self.n_free = 0
        self._obj: dict[int, np.ndarray] = {}
        self._obj_free: dict[int, float] = {}
        self._rows: list[tuple[dict, dict, float]] = []
        self.labels: list[str] = []
        self.offset = 0.0

    def add_block(self, n: int) -> int:
        self.blocks.append(n)
        return len(self.blocks) - 1

    def add_free(self, count: int) -> np.ndarray:
        idx = np.arange(self.n_free, self.n_free + count)
        self.n_free += count
        return idx

    def objective(self, block: int, mat):
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        self._obj[block] = self._obj.get(block, 0.0) + mat

    def objective_free(self, index: int, value: float):
        self._obj_free[int(index)] = self._obj_free.get(int(index), 0.0) + float(value)

    def constrain(self, terms: dict, rhs: float, free: dict | None = None, label: str = ""):
        """Add ``sum <terms[b], X_b> + sum free[j] x_j = rhs``."""
        self._rows.append(({b: np.atleast_2d(np.asarray(t, dtype=float)) for b, t in terms.items()}, free or {}, float(rhs)))
        self.labels.append(label)
        return len(self._rows) - 1

    def build(self, check_rank: bool = True) -> SdpProblem:
        m = len(self._rows)
        a = [np.zeros((m, n, n)) for n in self.blocks]
        a_free = np.zeros((m, self.n_free))
        b = np.zeros(m)
        for k, (terms, free, rhs) in enumerate(self._rows):
            for bi, t in terms.items():
                a[bi][k] += (t + t.T) / 2
            for j, v in free.items():
                a_free[k, j] += v
            b[k] = rhs
        c = []
        for bi, n in enumerate(self.blocks):
            cb = self._obj.get(bi, np.zeros((n, n)))
            c.append((cb + cb.T) / 2)
        c_free = np.zeros(self.n_free)
        for j, v in self._obj_free.items():
            c_free[j] = v
        prob = SdpProblem(list(self.blocks), c, a, b, c_free, a_free, self.offset, list(self.labels))
        if check_rank:
            prob.check_rank()
        return prob


@dataclass
class SdpOptions:
    tol_feas: float = 1e-9
    tol_gap: float = 1e-9
    max_iter: int = 100
    step: float = 0.98
    refine: int = 2
    # stop after this many iterations without a new best merit
    stall_iterations: int = 8
    # accepted as optimal when the strict tolerances cannot be reached
    fallback_feas: float = 1e-8
    fallback_gap: float = 1e-7


OPTIMAL = "optimal"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_FAILURE = "numerical_failure"


@dataclass(eq=False)
class SdpSolution:
    x: list[np.ndarray]
    y: np.ndarray
    s: list[np.ndarray]
    x_free: np.ndarray
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    relative_gap: float
    status: str
    iterations: int
    history: list[dict] = field(default_factory=list, repr=False)

    @property
    def gap(self) -> float:
        return self.primal_objective - self.dual_objective

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def summary(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "primal_objective": self.primal_objective,
            "dual_objective": self.dual_objective,
            "gap": self.gap,
            "relative_gap": self.relative_gap,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "history": self.history,
        }


def _sym(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest ``t`` with ``x + t dx`` PSD (``x`` positive definite)."""
    if x.shape[0] == 1:
        return -x[0, 0] / dx[0, 0] if dx[0, 0] < 0 else np.inf
    l = np.linalg.cholesky(x)
    li = sla.solve_triangular(l, np.eye(x.shape[0]), lower=True)
    lam = np.linalg.eigvalsh(_sym(li @ dx @ li.T))[0]
    return -1.0 / lam if lam < 0 else np.inf


class _Measures:
    """Residuals and objective values of an iterate."""

    def __init__(self, prob: SdpProblem, x, xf, y, s, norm_b, norm_c):
        self.rp = prob.b - prob.apply(x, xf)
        aty = prob.adjoint(y)
        self.rd = [cb - ab - sb for cb, ab, sb in zip(prob.c, aty, s)]
        self.rf = prob.c_free - prob.a_free.T @ y if prob.n_free else np.zeros(0)
        self.pobj = prob.objective(x, xf)
        self.dobj = float(prob.b @ y) + prob.offset
        self.pinf = float(np.linalg.norm(self.rp)) / (1.0 + norm_b)
        dnorm = np.sqrt(sum(float(np.sum(r * r)) for r in self.rd) + float(self.rf @ self.rf))
        self.dinf = dnorm / (1.0 + norm_c)
        self.relgap = abs(self.pobj - self.dobj) / (1.0 + abs(self.pobj) + abs(self.dobj))


def solve(problem: SdpProblem, options: SdpOptions | None = None) -> SdpSolution:
    """Solve ``problem``; the returned solution carries a status instead of raising."""
    opt = options or SdpOptions()
    prob = problem
    m, nf = prob.m, prob.n_free
    ntot = sum(prob.blocks)
    norm_b = float(np.linalg.norm(prob.b))
    norm_c = float(np.sqrt(sum(np.sum(cb * cb) for cb in prob.c) + prob.c_free @ prob.c_free))

    x, s = [], []
    for n, ab, cb in zip(prob.blocks, prob.a, prob.c):
        anorm = np.sqrt(np.sum(ab * ab, axis=(1, 2)))
        xi = max(10.0, np.sqrt(n), n * float(np.max((1.0 + np.abs(prob.b)) / (1.0 + anorm))) if m else 10.0)
        eta = max(10.0, np.sqrt(n), float(anorm.max()) if m else 0.0, float(np.linalg.norm(cb)))
        x.append(xi * np.eye(n))
        s.append(eta * np.eye(n))
    y = np.zeros(m)
    xf = np.zeros(nf)

    history: list[dict] = []
    status = MAX_ITERATIONS
    it = 0
    meas = _Measures(prob, x, xf, y, s, norm_b, norm_c)
    best, best_merit, since_best = None, np.inf, 0
    for it in range(opt.max_iter + 1):
        mu = sum(float(np.vdot(xb, sb)) for xb, sb in zip(x, s)) / max(ntot, 1)
        history.append(
            {"iter": it, "pobj": meas.pobj, "dobj": meas.dobj, "pinf": meas.pinf, "dinf": meas.dinf, "relgap": meas.relgap, "mu": mu}
        )
        merit = max(meas.pinf / opt.tol_feas, meas.dinf / opt.tol_feas, meas.relgap / opt.tol_gap)
        if merit < best_merit:
            best, best_merit, since_best = (x, xf, y, s, meas, it), merit, 0
        else:
            since_best += 1
        if merit <= 1.0:
            status = OPTIMAL
            break
        if it == opt.max_iter:
            break
        if since_best >= opt.stall_iterations:
            status = NUMERICAL_FAILURE
            break
        try:
            nxt = _step(prob, x, xf, y, s, meas, mu, ntot, opt)
        except (np.linalg.LinAlgError, sla.LinAlgError, FloatingPointError, ValueError):
            nxt = None
        if nxt is None:
            status = NUMERICAL_FAILURE
            break
        x, xf, y, s = nxt
        meas = _Measures(prob, x, xf, y, s, norm_b, norm_c)

    if status != OPTIMAL:
        # near the end the Newton systems lose accuracy; report the best iterate seen
        x, xf, y, s, meas, _ = best
        if meas.pinf <= opt.fallback_feas and meas.dinf <= opt.fallback_feas and meas.relgap <= opt.fallback_gap:
            status = OPTIMAL
    return SdpSolution(
        x=x,
        y=y,
        s=s,
        x_free=xf,
        primal_objective=meas.pobj,
        dual_objective=meas.dobj,
        primal_residual=meas.pinf,
        dual_residual=meas.dinf,
        relative_gap=meas.relgap,
        status=status,
        iterations=it,
        history=history,
    )


def _step(prob: SdpProblem, x, xf, y, s, meas: _Measures, mu, ntot, opt: SdpOptions):
    m, nf = prob.m, prob.n_free
    sinv = []
    for sb in s:
        c = sla.cho_factor(sb, lower=True)
        sinv.append(_sym(sla.cho_solve(c, np.eye(sb.shape[0]))))

    # Schur complement M_kl = sum_b Tr(A_k X A_l S^-1)
    big = np.zeros((m, m))
    for ab, xb, si in zip(prob.a, x, sinv):
        g = xb @ ab @ si
        big += ab.reshape(m, -1) @ g.transpose(0, 2, 1).reshape(m, -1).T
    big = _sym(big)
    if nf:
        kkt = np.block([[big, prob.a_free], [prob.a_free.T, np.zeros((nf, nf))]])
    else:
        kkt = big
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu = sla.lu_factor(kkt, check_finite=True)
    if not np.all(np.diag(lu[0])):
        return None  # exactly singular system; treated as a stall

    # A(X R_d S^-1) does not depend on the centring term
    xrs = prob.apply([xb @ rb @ si for xb, rb, si in zip(x, meas.rd, sinv)])

    def direction(rc):
        r1 = meas.rp - prob.apply(rc) + xrs
        sol = sla.lu_solve(lu, np.concatenate([r1, meas.rf]))
        dy, dxf = sol[:m], sol[m:]
        aty = prob.adjoint(dy)
        ds = [rb - ab for rb, ab in zip(meas.rd, aty)]
        dx = [rcb - _sym(xb @ dsb @ si) for rcb, xb, dsb, si in zip(rc, x, ds, sinv)]
        # M is badly conditioned near the end; refine the primal equation
        # with corrections that keep the dual equations exact
        for _ in range(opt.refine):
            err = meas.rp - prob.apply(dx, dxf)
            if np.linalg.norm(err) <= 1e-15 * (1.0 + np.linalg.norm(meas.rp)):
                break
            corr = sla.lu_solve(lu, np.concatenate([err, np.zeros(nf)]))
            dy = dy + corr[:m]
            dxf = dxf + corr[m:]
            dsc = prob.adjoint(-corr[:m])
            ds = [dsb + c for dsb, c in zip(ds, dsc)]
            dx = [dxb - _sym(xb @ c @ si) for dxb, xb, c, si in zip(dx, x, dsc, sinv)]
        return dx, dxf, dy, ds

    def steps(dx, ds, frac):
        tp = min([_max_step(xb, dxb) for xb, dxb in zip(x, dx)] + [np.inf])
        td = min([_max_step(sb, dsb) for sb, dsb in zip(s, ds)] + [np.inf])
        return min(1.0, frac * tp), min(1.0, frac * td)

    # predictor
    dx, dxf, dy, ds = direction([-xb for xb in x])
    ap, ad = steps(dx, ds, 1.0)
    mu_aff = sum(float(np.vdot(xb + ap * dxb, sb + ad * dsb)) for xb, dxb, sb, dsb in zip(x, dx, s, ds)) / max(ntot, 1)
    sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0

    # corrector
    rc = [sigma * mu * si - xb - _sym(dxb @ dsb @ si) for si, xb, dxb, dsb in zip(sinv, x, dx, ds)]
    dx, dxf, dy, ds = direction(rc)
    ap, ad = steps(dx, ds, opt.step)
    if ap < 1e-10 and ad < 1e-10:
        return None
    x = [_sym(xb + ap * dxb) for xb, dxb in zip(x, dx)]
    xf = xf + ap * dxf
    y = y + ad * dy
    s = [_sym(sb + ad * dsb) for sb, dsb in zip(s, ds)]
    return x, xf, y, s


@dataclass
class CertificateReport:
    primal_residual: float
    dual_residual: float
    primal_objective: float
    dual_objective: float
    relative_gap: float
    min_eig_x: float
    min_eig_s: float
    feas_tol: float = 1e-8
    gap_tol: float = 1e-7
    psd_tol: float = 1e-9

    @property
    def weak_duality(self) -> bool:
        return self.dual_objective <= self.primal_objective + self.gap_tol * (1.0 + abs(self.primal_objective))

    @property
    def passed(self) -> bool:
        return (
            self.primal_residual <= self.feas_tol
            and self.dual_residual <= self.feas_tol
            and self.relative_gap <= self.gap_tol
            and self.min_eig_x >= -self.psd_tol
            and self.min_eig_s >= -self.psd_tol
            and self.weak_duality
        )


def verify_solution(problem: SdpProblem, solution: SdpSolution) -> CertificateReport:
    """Recompute residuals, gap and PSD margins of ``solution`` from the problem data alone."""
    p = problem
    x, s, y, xf = solution.x, solution.s, solution.y, solution.x_free
    ax = np.zeros(p.m)
    for ab, xb in zip(p.a, x):
        ax += np.einsum("kij,ij->k", ab, xb)
    if p.n_free:
        ax += p.a_free @ xf
    rp = np.linalg.norm(p.b - ax) / (1.0 + np.linalg.norm(p.b))
    rd2 = 0.0
    for cb, ab, sb in zip(p.c, p.a, s):
        r = cb - np.einsum("k,kij->ij", y, ab) - sb
        rd2 += float(np.sum(r * r))
    if p.n_free:
        rf = p.c_free - p.a_free.T @ y
        rd2 += float(rf @ rf)
    norm_c = np.sqrt(sum(np.sum(cb * cb) for cb in p.c) + p.c_free @ p.c_free)
    pobj = sum(float(np.sum(cb * xb)) for cb, xb in zip(p.c, x)) + p.offset
    if p.n_free:
        pobj += float(p.c_free @ xf)
    dobj = float(p.b @ y) + p.offset
    return CertificateReport(
        primal_residual=float(rp),
        dual_residual=float(np.sqrt(rd2) / (1.0 + norm_c)),
        primal_objective=pobj,
        dual_objective=dobj,
        relative_gap=abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj)),
        min_eig_x=min(float(np.linalg.eigvalsh(xb)[0]) for xb in x) if x else 0.0,
        min_eig_s=min(float(np.linalg.eigvalsh(sb)[0]) for sb in s) if s else 0.0,
    )
