"""Incompatibility robustness SDPs and compatibility regions.

All programs share one template. With trivial weights ``t`` (for A) and
``s`` (for B) taken from the noise model, a scalar ``lam in [0, 1]`` and
Hermitian ``C_ij >= 0``::

    sum_j C_ij = a(lam) A_i + (1 - a(lam)) t_i I
    sum_i C_ij = b(lam) B_j + (1 - b(lam)) s_j I

where ``a(lam) = a0 + a1 lam`` and ``b(lam) = b0 + b1 lam``, and ``lam`` is
maximised. ``a = b = lam`` is the robustness program, ``a = p`` fixed with
``b = lam`` gives the largest compatible ``q`` at a given ``p``, and
``a = p lam, b = q lam`` tests membership of ``(p, q)``.

Each ``C_ij`` is represented by a real symmetric ``2d x 2d`` block and only
its projection onto embedded Hermitian matrices is constrained; a PSD block
projects to a PSD embedded matrix, so nothing is lost.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidJoint, SolverFailure
from .linalg import dag, hermitian_basis, real_embedding, real_unembedding
from .povm import JointPovm, NoiseModel, Povm, apply_noise, as_model, check_marginals
from .sdp import SdpBuilder, SdpOptions, SdpProblem, SdpSolution, solve, verify_solution

MEMBERSHIP_TOL = 1e-6


@dataclass(frozen=True)
class _Layout:
    na: int
    nb: int
    d: int
    lam: int  # block index of lam; slack is lam + 1

    def block(self, i: int, j: int) -> int:
        return i * self.nb + j


def _check_pair(a: Povm, b: Povm, model: NoiseModel):
    if a.dim != b.dim:
        raise DimensionMismatch(f"POVMs act on C^{a.dim} and C^{b.dim}")
    return model.weights(a), model.weights(b)


def _noise_program(a: Povm, b: Povm, ta, tb, alin=(0.0, 1.0), blin=(0.0, 1.0)) -> tuple[SdpProblem, _Layout]:
    d, na, nb = a.dim, a.n_outcomes, b.n_outcomes
    basis = hermitian_basis(d)
    emb = [real_embedding(g, check=False) / 2 for g in basis]
    tr_g = np.trace(basis, axis1=1, axis2=2).real
    ca = np.einsum("rxy,iyx->ir", basis, a.effects).real
    cb = np.einsum("rxy,jyx->jr", basis, b.effects).real

    sb = SdpBuilder()
    for _ in range(na * nb):
        sb.add_block(2 * d)
    lam = sb.add_block(1)
    sb.add_block(1)
    lay = _Layout(na, nb, d, lam)

    def side(coef, t, lin, i, r):
        c0, c1 = lin
        rhs = c0 * coef[i, r] + (1.0 - c0) * t[i] * tr_g[r]
        return -c1 * (coef[i, r] - t[i] * tr_g[r]), rhs

    for i in range(na):
        for r in range(len(basis)):
            lam_coef, rhs = side(ca, ta, alin, i, r)
            terms = {lay.block(i, j): emb[r] for j in range(nb)}
            if lam_coef:
                terms[lam] = lam_coef
            sb.constrain(terms, rhs, label=f"row {i} g{r}")
    # the last column follows from the rows and the others
    for j in range(nb - 1):
        for r in range(len(basis)):
            lam_coef, rhs = side(cb, tb, blin, j, r)
            terms = {lay.block(i, j): emb[r] for i in range(na)}
            if lam_coef:
                terms[lam] = lam_coef
            sb.constrain(terms, rhs, label=f"col {j} g{r}")
    sb.constrain({lam: 1.0, lam + 1: 1.0}, 1.0, label="lam + slack")
    sb.objective(lam, -1.0)
    return sb.build(), lay


def build_primal(a: Povm, b: Povm, model) -> SdpProblem:
    """Standard-form SDP whose optimum is ``-alpha*`` (minimisation of ``-alpha``)."""
    model = as_model(model)
    ta, tb = _check_pair(a, b, model)
    return _noise_program(a, b, ta, tb)[0]


def build_dual(a: Povm, b: Povm, model) -> SdpProblem:
    """The dual program in its Hermitian-multiplier form.

    Minimise ``1 + sum Tr X_i A_i + sum Tr Y_j B_j`` over Hermitian ``X_i``,
    ``Y_j`` with ``X_i + Y_j >= 0`` and
    ``1 + sum Tr X_i A_i + sum Tr Y_j B_j >= sum t_i Tr X_i + sum s_j Tr Y_j``.
    The multipliers are free variables in the basis expansion, ``Y`` of the
    last outcome is fixed to zero (the program is invariant under
    ``X_i + H, Y_j - H``), each ``X_i + Y_j`` is matched by a PSD block and
    the trace inequality by a scalar slack.
    """
    model = as_model(model)
    ta, tb = _check_pair(a, b, model)
    d, na, nb = a.dim, a.n_outcomes, b.n_outcomes
    basis = hermitian_basis(d)
    nr = len(basis)
    emb = [real_embedding(g, check=False) / 2 for g in basis]
    tr_g = np.trace(basis, axis1=1, axis2=2).real
    ca = np.einsum("rxy,iyx->ir", basis, a.effects).real
    cb = np.einsum("rxy,jyx->jr", basis, b.effects).real

    sb = SdpBuilder()
    xs = sb.add_free(na * nr).reshape(na, nr)
    ys = sb.add_free((nb - 1) * nr).reshape(nb - 1, nr)
    for i in range(na):
        for j in range(nb):
            blk = sb.add_block(2 * d)
            for r in range(nr):
                free = {xs[i, r]: -1.0}
                if j < nb - 1:
                    free[ys[j, r]] = -1.0
                sb.constrain({blk: emb[r]}, 0.0, free=free, label=f"Z{i}{j} g{r}")
    kappa = sb.add_block(1)
    free = {}
    for i in range(na):
        for r in range(nr):
            free[xs[i, r]] = -(ca[i, r] - ta[i] * tr_g[r])
            sb.objective_free(xs[i, r], ca[i, r])
    for j in range(nb - 1):
        for r in range(nr):
            free[ys[j, r]] = -(cb[j, r] - tb[j] * tr_g[r])
            sb.objective_free(ys[j, r], cb[j, r])
    sb.constrain({kappa: 1.0}, 1.0, free=free, label="trace inequality")
    sb.offset = 1.0
    return sb.build()


def dual_value(a: Povm, b: Povm, x: np.ndarray, y: np.ndarray) -> float:
    """``1 + sum Tr X_i A_i + sum Tr Y_j B_j``."""
    return float(1.0 + np.einsum("ixy,iyx->", x, a.effects).real + np.einsum("jxy,jyx->", y, b.effects).real)


@dataclass(eq=False)
class RobustnessResult:
    model: str
    alpha_star: float
    joint: JointPovm
    x: np.ndarray  # dual multipliers X_i, shape (Na, d, d)
    y: np.ndarray  # dual multipliers Y_j, shape (Nb, d, d)
    gap: float
    status: str
    weights_a: np.ndarray = field(repr=False)
    weights_b: np.ndarray = field(repr=False)
    solution: SdpSolution | None = field(default=None, repr=False)
    problem: SdpProblem | None = field(default=None, repr=False)

    @property
    def dual_psd_margin(self) -> float:
        """Smallest eigenvalue over all ``X_i + Y_j``."""
        return min(
            float(np.linalg.eigvalsh(xi + yj)[0]) for xi in self.x for yj in self.y
        )

    def trace_slack(self, a: Povm, b: Povm) -> float:
        """Slack of the dual trace inequality (nonnegative when feasible)."""
        tx = np.trace(self.x, axis1=1, axis2=2).real
        ty = np.trace(self.y, axis1=1, axis2=2).real
        return dual_value(a, b, self.x, self.y) - float(self.weights_a @ tx + self.weights_b @ ty)

    def to_json(self) -> dict:
        return {"model": self.model, "alpha_star": self.alpha_star, "gap": self.gap, "status": self.status}


def _extract_joint(sol: SdpSolution, lay: _Layout) -> np.ndarray:
    grid = np.empty((lay.na, lay.nb, lay.d, lay.d), dtype=complex)
    for i in range(lay.na):
        for j in range(lay.nb):
            grid[i, j] = real_unembedding(sol.x[lay.block(i, j)])
    return grid


def _solve_checked(prob: SdpProblem, options: SdpOptions | None) -> SdpSolution:
    sol = solve(prob, options)
    if not sol.optimal:
        raise SolverFailure(
            f"SDP solver stopped with status {sol.status} after {sol.iterations} iterations "
            f"(primal residual {sol.primal_residual:.2e}, dual residual {sol.dual_residual:.2e}, "
            f"relative gap {sol.relative_gap:.2e})",
            solution=sol,
        )
    return sol


def robustness(a: Povm, b: Povm, model, options: SdpOptions | None = None) -> RobustnessResult:
    """Largest ``alpha`` such that the ``alpha``-noisy versions of ``a`` and ``b`` are compatible."""
    model = as_model(model)
    ta, tb = _check_pair(a, b, model)
    prob, lay = _noise_program(a, b, ta, tb)
    sol = _solve_checked(prob, options)
    alpha = float(np.clip(sol.x[lay.lam][0, 0], 0.0, 1.0))

    basis = hermitian_basis(lay.d)
    nr = len(basis)
    yrow = sol.y[: lay.na * nr].reshape(lay.na, nr)
    ycol = sol.y[lay.na * nr: lay.na * nr + (lay.nb - 1) * nr].reshape(lay.nb - 1, nr)
    x = -np.einsum("ir,rxy->ixy", yrow, basis)
    y = np.zeros((lay.nb, lay.d, lay.d), dtype=complex)
    y[:-1] = -np.einsum("jr,rxy->jxy", ycol, basis)

    grid = _extract_joint(sol, lay)
    try:
        joint = JointPovm(grid)
    except InvalidJoint as exc:
        raise SolverFailure(f"optimal joint failed validation: {exc}", solution=sol) from exc
    return RobustnessResult(
        model=model.kind,
        alpha_star=alpha,
        joint=joint,
        x=x,
        y=y,
        gap=sol.gap,
        status=sol.status,
        weights_a=ta,
        weights_b=tb,
        solution=sol,
        problem=prob,
    )


def solve_dual(a: Povm, b: Povm, model, options: SdpOptions | None = None) -> SdpSolution:
    return _solve_checked(build_dual(a, b, model), options)


def ray_level(a: Povm, b: Povm, model, p: float, q: float, options: SdpOptions | None = None) -> float:
    """Largest ``s`` in ``[0, 1]`` such that ``a^(s p)`` and ``b^(s q)`` are compatible."""
    model = as_model(model)
    ta, tb = _check_pair(a, b, model)
    apply_noise(a, model, p)  # range check
    apply_noise(b, model, q)
    return _ray_solve(a, b, ta, tb, p, q, options)[0]


def _ray_solve(a, b, ta, tb, p, q, options=None):
    prob, lay = _noise_program(a, b, ta, tb, (0.0, p), (0.0, q))
    sol = _solve_checked(prob, options)
    return float(sol.x[lay.lam][0, 0]), _extract_joint(sol, lay)


def is_compatible(a: Povm, b: Povm, model, p: float, q: float, tol: float = 1e-7) -> bool:
    """Whether ``a^p`` and ``b^q`` admit a joint POVM."""
    return ray_level(a, b, model, p, q) >= 1.0 - tol


def max_compatible_q(a: Povm, b: Povm, model, p: float, options: SdpOptions | None = None) -> tuple[float, np.ndarray]:
    """Largest ``q`` with ``a^p`` and ``b^q`` compatible, and a joint attaining it."""
    model = as_model(model)
    ta, tb = _check_pair(a, b, model)
    apply_noise(a, model, p)
    prob, lay = _noise_program(a, b, ta, tb, (p, 0.0), (0.0, 1.0))
    sol = _solve_checked(prob, options)
    return float(np.clip(sol.x[lay.lam][0, 0], 0.0, 1.0)), _extract_joint(sol, lay)


def _row_job(args):
    a, b, model, p = args
    try:
        return max_compatible_q(a, b, model, p)
    except SolverFailure:
        # no strictly feasible point (e.g. rank-deficient effects at p = 1);
        # the caller falls back to one ray program per grid point
        return None


def _row_by_rays(a, b, model, p, levels):
    ta, tb = model.weights(a), model.weights(b)
    comp = np.zeros(len(levels), dtype=bool)
    grids = {}
    for j, q in enumerate(levels):
        s, grid = _ray_solve(a, b, ta, tb, p, q)
        if s < 1.0 - MEMBERSHIP_TOL:
            break  # compatibility is monotone in q
        comp[j], grids[j] = True, grid
    return comp, grids


def _point_job(args):
    a, b, model, p, q = args
    return ray_level(a, b, model, p, q)


@dataclass(eq=False)
class CompatibilityRegion:
    model: str
    levels: np.ndarray  # grid values shared by both axes
    compatible: np.ndarray  # bool, indexed [p, q]
    boundary: np.ndarray  # largest compatible q per p (nan where unknown)
    certificate_deviation: float = 0.0

    @property
    def resolution(self) -> int:
        return len(self.levels)

    def is_monotone(self) -> bool:
        """Compatibility is preserved when either level is lowered."""
        c = self.compatible.astype(int)
        return bool(np.all(np.diff(c, axis=0) <= 0) and np.all(np.diff(c, axis=1) <= 0))

    def grid_boundary(self, axis: int = 0) -> np.ndarray:
        """Largest compatible level along each row (axis 0) or column (axis 1); -1 if none."""
        c = self.compatible if axis == 0 else self.compatible.T
        out = np.full(self.resolution, -1.0)
        for k, line in enumerate(c):
            idx = np.nonzero(line)[0]
            if idx.size:
                out[k] = self.levels[idx[-1]]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "q", "compatible"])
        for i, p in enumerate(self.levels):
            for j, q in enumerate(self.levels):
                w.writerow([f"{p:.6g}", f"{q:.6g}", int(self.compatible[i, j])])
        return buf.getvalue()


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def compatibility_region(
    a: Povm,
    b: Povm,
    model,
    resolution: int = 101,
    method: str = "rows",
    workers: int = 1,
    validate: bool = True,
) -> CompatibilityRegion:
    """Grid of ``(p, q)`` in ``[0, 1]^2`` for which ``a^p`` and ``b^q`` are compatible.

    ``method="rows"`` solves one SDP per ``p`` for the largest compatible
    ``q``; since lowering ``q`` keeps compatibility, that decides the whole
    row. Rows whose program has no strictly feasible point fall back to one
    membership SDP per grid point. A joint is then built for every compatible point by mixing the
    optimal joint with the product of ``a^p`` and the trivial POVM, and
    checked against the noisy marginals. ``method="pointwise"`` solves one
    SDP per grid point.
    """
    model = as_model(model)
    _check_pair(a, b, model)
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    levels = np.linspace(0.0, 1.0, resolution)
    comp = np.zeros((resolution, resolution), dtype=bool)
    boundary = np.full(resolution, np.nan)
    worst = 0.0

    if method == "pointwise":
        jobs = [(a, b, model, p, q) for p in levels for q in levels]
        vals = np.array(_map(_point_job, jobs, workers)).reshape(resolution, resolution)
        comp = vals >= 1.0 - MEMBERSHIP_TOL
        for i in range(resolution):
            idx = np.nonzero(comp[i])[0]
            boundary[i] = levels[idx[-1]] if idx.size else np.nan
        return CompatibilityRegion(model.kind, levels, comp, boundary)
    if method != "rows":
        raise ValueError(f"unknown method {method!r}")

    rows = _map(_row_job, [(a, b, model, p) for p in levels], workers)
    tb = model.weights(b)
    eye = np.eye(a.dim)
    for i, (p, row) in enumerate(zip(levels, rows)):
        if row is None:
            comp[i], grids = _row_by_rays(a, b, model, p, levels)
            idx = np.nonzero(comp[i])[0]
            boundary[i] = levels[idx[-1]] if idx.size else np.nan
        else:
            qstar, cstar = row
            boundary[i] = qstar
            comp[i] = levels <= qstar + MEMBERSHIP_TOL
        if not validate:
            continue
        ap = apply_noise(a, model, p)
        product = np.einsum("ixy,j->ijxy", ap.effects, tb)
        for j in np.nonzero(comp[i])[0]:
            q = levels[j]
            if row is None:
                grid = grids[j]
            else:
                mix = min(1.0, q / qstar) if qstar > 0 else 0.0
                grid = mix * cstar + (1.0 - mix) * product
            rep = check_marginals(JointPovm(grid), ap, apply_noise(b, model, q), tol=MEMBERSHIP_TOL)
            if not rep.passed:
                raise SolverFailure(f"joint certificate at (p, q) = ({p:.4g}, {q:.4g}) is off by {rep.max_deviation:.2e}")
            worst = max(worst, rep.max_deviation)
    return CompatibilityRegion(model.kind, levels, comp, boundary, worst)


def boundary_distance(r1: CompatibilityRegion, r2: CompatibilityRegion, limit: float = 0.7) -> float:
    """Largest difference between two grid boundaries over rows and columns with level ``<= limit``.

    Boundaries are clipped at ``limit`` so only the part of each region
    inside ``[0, limit]^2`` is compared.
    """
    if not np.allclose(r1.levels, r2.levels):
        raise ValueError("regions use different grids")
    sel = r1.levels <= limit + 1e-12
    dist = 0.0
    for axis in (0, 1):
        b1 = np.minimum(r1.grid_boundary(axis)[sel], limit)
        b2 = np.minimum(r2.grid_boundary(axis)[sel], limit)
        dist = max(dist, float(np.max(np.abs(b1 - b2))))
    return dist


def containment_violations(inner: CompatibilityRegion, outer: CompatibilityRegion) -> list[tuple[float, float]]:
    """Grid points compatible in ``inner`` but not in ``outer``."""
    idx = np.argwhere(inner.compatible & ~outer.compatible)
    return [(float(inner.levels[i]), float(inner.levels[j])) for i, j in idx]


FOURIER_OMEGA = np.exp(2j * np.pi / 3)


def fourier_example() -> tuple[Povm, Povm]:
    """A diagonal two-outcome POVM on C^3 and one built from Fourier-basis projectors."""
    a = Povm([np.diag([1 / 3, 2 / 3, 0.0]), np.diag([2 / 3, 1 / 3, 1.0])])
    w = FOURIER_OMEGA
    f = np.array([[1, 1, 1], [1, w, w**2], [1, w**2, w]]) / np.sqrt(3)
    proj = np.einsum("xk,yk->kxy", f, f.conj())
    return a, Povm([proj[0] + proj[1], proj[2]])


def qubit_mub_example() -> tuple[Povm, Povm]:
    """Sharp qubit measurements along x and z."""
    from .povm import unbiased_qubit_povm

    return unbiased_qubit_povm([1.0, 0.0, 0.0]), unbiased_qubit_povm([0.0, 0.0, 1.0])


def pair_corpus(count: int = 20, seed: int = 0, max_dim: int = 3, max_outcomes: int = 3) -> list[tuple[Povm, Povm]]:
    """Seeded random POVM pairs on a shared space, outcome counts drawn independently."""
    from .povm import random_povm

    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        d = int(rng.integers(2, max_dim + 1))
        na, nb = (int(k) for k in rng.integers(2, max_outcomes + 1, size=2))
        out.append((random_povm(d, na, rng), random_povm(d, nb, rng)))
    return out


def certificate_report(result: RobustnessResult):
    """Independent check of the SDP certificate behind ``result``."""
    return verify_solution(result.problem, result.solution)
