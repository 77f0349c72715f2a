"""First-order systems du = sum_j F^j(t, x, u, Du) dX^j by characteristics.

The characteristic triple (a, b, c) per seed x follows

    da = - sum_j F_p^j(t, a, b, c) dX^j
    db =   sum_j (F^j - F_p^j . c)(t, a, b, c) dX^j
    dc =   sum_j (F_x^j + F_u^j c)(t, a, b, c) dX^j

seeded at (x, phi(x), Dphi(x)). The solution is read off as
u(t, y) = b_t(a_t^{-1}(y)), Du(t, y) = c_t(a_t^{-1}(y)) before the first
fold of the characteristic map. Seed and evaluation sets live on
axis-aligned uniform boxes, d <= 3.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fields import DEFAULT_FD_STEP, SmoothMap
from .paths import PathError, SampledPath, dyadic_prefix, dyadic_steps
from .reports import (CheckReport, ResidualReport, make_check_report,
                      make_residual_report)


class CausticError(RuntimeError):
    """Evaluation requested at or beyond the first characteristic fold."""


class InversionError(RuntimeError):
    """Batched Newton on the characteristic map failed to converge."""


@dataclass(frozen=True)
class ScalarHamiltonian:
    """One driver component F(t, x, u, p) with partials, batched.

    value: (t, x (..., d), u (...), p (..., d)) -> (...)
    dx -> (..., d), du -> (...), dp -> (..., d); finite differences with
    fd_step fill in whatever is not supplied analytically.
    """

    value: Callable
    dx: Callable | None = None
    du: Callable | None = None
    dp: Callable | None = None
    fd_step: float = DEFAULT_FD_STEP

    def value_at(self, t, x, u, p):
        return np.asarray(self.value(t, x, u, p), dtype=float)

    def dx_at(self, t, x, u, p):
        if self.dx is not None:
            return np.asarray(self.dx(t, x, u, p), dtype=float)
        return self._fd_vec(lambda xx: self.value_at(t, xx, u, p), x)

    def dp_at(self, t, x, u, p):
        if self.dp is not None:
            return np.asarray(self.dp(t, x, u, p), dtype=float)
        return self._fd_vec(lambda pp: self.value_at(t, x, u, pp), p)

    def du_at(self, t, x, u, p):
        if self.du is not None:
            return np.asarray(self.du(t, x, u, p), dtype=float)
        h = self.fd_step
        return (self.value_at(t, x, u + h, p) - self.value_at(t, x, u - h, p)) / (2 * h)

    def _fd_vec(self, fn, z):
        z = np.asarray(z, dtype=float)
        h = self.fd_step
        cols = []
        for k in range(z.shape[-1]):
            e = np.zeros(z.shape[-1])
            e[k] = h
            cols.append((fn(z + e) - fn(z - e)) / (2 * h))
        return np.stack(cols, axis=-1)

    @property
    def is_analytic(self) -> bool:
        return all(fn is not None for fn in (self.dx, self.du, self.dp))


@dataclass(frozen=True)
class HamiltonianSpec:
    """All driver components of the right-hand side, state dimension d."""

    state_dim: int
    components: tuple

    def __post_init__(self):
        if not self.components:
            raise PathError("at least one driver component is required")

    @property
    def n_drivers(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class GridBox:
    """Axis-aligned uniform box grid, d <= 3."""

    lower: tuple
    upper: tuple
    counts: tuple

    def __post_init__(self):
        lo, hi, ct = (np.atleast_1d(np.asarray(v)) for v in (self.lower, self.upper, self.counts))
        if not (1 <= lo.size <= 3):
            raise PathError("grid boxes support 1 <= d <= 3")
        if lo.size != hi.size or lo.size != ct.size:
            raise PathError("lower/upper/counts disagree in dimension")
        if np.any(hi <= lo) or np.any(ct.astype(int) < 2):
            raise PathError("need lower < upper and counts >= 2 per axis")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in hi))
        object.__setattr__(self, "counts", tuple(int(v) for v in ct))

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.counts))

    def axes(self) -> list:
        return [np.linspace(self.lower[k], self.upper[k], self.counts[k])
                for k in range(self.dim)]

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=-1)


def interp_nodal(box: GridBox, nodal: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of nodal data (m, S...) at x (k, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    axes = box.axes()
    idx, wts = [], []
    for ax, coords in enumerate(axes):
        c = np.clip(np.searchsorted(coords, x[:, ax], side="right") - 1, 0, coords.size - 2)
        w = (x[:, ax] - coords[c]) / (coords[c + 1] - coords[c])
        idx.append(c)
        wts.append(w)
    out = 0.0
    for corner in itertools.product((0, 1), repeat=box.dim):
        weight = np.ones(x.shape[0])
        flat = np.zeros(x.shape[0], dtype=int)
        for ax, bit in enumerate(corner):
            weight = weight * (wts[ax] if bit else 1.0 - wts[ax])
            flat = flat * box.counts[ax] + idx[ax] + bit
        vals = nodal[flat]
        out = out + weight.reshape((-1,) + (1,) * (vals.ndim - 1)) * vals
    return out


def _cell_corners(box: GridBox, x: np.ndarray) -> np.ndarray:
    """Flat seed indices of the 2^d corners of each query's cell, (k, 2^d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    axes = box.axes()
    idx = []
    for ax, coords in enumerate(axes):
        idx.append(np.clip(np.searchsorted(coords, x[:, ax], side="right") - 1,
                           0, coords.size - 2))
    corners = []
    for corner in itertools.product((0, 1), repeat=box.dim):
        flat = np.zeros(x.shape[0], dtype=int)
        for ax, bit in enumerate(corner):
            flat = flat * box.counts[ax] + idx[ax] + bit
        corners.append(flat)
    return np.stack(corners, axis=-1)


@dataclass(frozen=True)
class CharTriple:
    """Characteristic curves (a, b, c) of one seed on the driver grid."""

    a: SampledPath
    b: SampledPath
    c: SampledPath


def _char_core(H: HamiltonianSpec, X: SampledPath, A0, B0, C0, substeps: int = 1):
    """Batched Euler for the characteristic system over all seeds."""
    times = X.times
    n = times.size
    dX = np.diff(X.values, axis=0)
    a = np.array(np.atleast_2d(A0), dtype=float)
    b = np.array(np.atleast_1d(B0), dtype=float)
    c = np.array(np.atleast_2d(C0), dtype=float)
    m = a.shape[0]
    A = np.empty((n, m, a.shape[1]))
    B = np.empty((n, m))
    C = np.empty_like(A)
    A[0], B[0], C[0] = a, b, c
    alive_idx = np.full(m, n - 1, dtype=int)
    alive = np.ones(m, dtype=bool)
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n - 1):
            dt = times[i + 1] - times[i]
            dxs = dX[i] / substeps
            for s in range(substeps):
                ts = times[i] + dt * (s / substeps)
                da = np.zeros_like(a)
                db = np.zeros_like(b)
                dc = np.zeros_like(c)
                for j, comp in enumerate(H.components):
                    fv = comp.value_at(ts, a, b, c)
                    fp = comp.dp_at(ts, a, b, c)
                    fx = comp.dx_at(ts, a, b, c)
                    fu = comp.du_at(ts, a, b, c)
                    da = da - fp * dxs[j]
                    db = db + (fv - np.einsum("md,md->m", fp, c)) * dxs[j]
                    dc = dc + (fx + fu[:, None] * c) * dxs[j]
                a, b, c = a + da, b + db, c + dc
            bad = alive & ~(np.isfinite(a).all(axis=1) & np.isfinite(b)
                            & np.isfinite(c).all(axis=1))
            if np.any(bad):
                alive_idx[bad] = i
                alive &= ~bad
                a[bad], b[bad], c[bad] = A[i][bad], B[i][bad], C[i][bad]
            A[i + 1] = np.where(alive[:, None], a, A[i])
            B[i + 1] = np.where(alive, b, B[i])
            C[i + 1] = np.where(alive[:, None], c, C[i])
            a, b, c = A[i + 1].copy(), B[i + 1].copy(), C[i + 1].copy()
    return A, B, C, alive_idx


def solve_characteristics(H: HamiltonianSpec, X: SampledPath, init,
                          substeps: int = 1) -> CharTriple:
    """Characteristic triple from one seed (x, u, p)."""
    x, u, p = init
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if X.dim != H.n_drivers:
        raise PathError("driver dimension does not match the component count")
    A, B, C, alive = _char_core(H, X, x[None], [float(u)], p[None], substeps)
    if alive[0] != X.n_points - 1:
        raise ArithmeticError(f"characteristics blew up after t={X.times[alive[0]]}")
    return CharTriple(
        a=SampledPath(X.times, A[:, 0]),
        b=SampledPath(X.times, B[:, 0]),
        c=SampledPath(X.times, C[:, 0]),
    )


def seed_from_initial_data(phi: SmoothMap, x: np.ndarray):
    """(x, phi(x), Dphi(x)) for a scalar initial condition phi."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u = phi.value_at(x)[..., 0]
    p = phi.jacobian_at(x)[..., 0, :]
    return x, u, p


@dataclass(frozen=True)
class CharField:
    """Characteristic triples over a seed box, with fold diagnostics.

    jac holds the central-difference Jacobian D_x a_t across neighboring
    seeds and det its determinant. tau is the first linearly interpolated
    zero crossing of det per seed, clamped to the horizon when det never
    changes sign; folded records which seeds actually crossed, so a
    fold-free seed stays usable at t = horizon.
    """

    box: GridBox
    seeds: np.ndarray
    times: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    jac: np.ndarray
    det: np.ndarray
    tau: np.ndarray
    folded: np.ndarray
    alive_until: np.ndarray

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def index_of(self, t: float) -> int:
        i = int(np.searchsorted(self.times, t))
        if i >= self.times.size or self.times[i] != t:
            raise PathError(f"time {t!r} is not a driver grid point")
        return i

    def triple(self, seed_index: int) -> CharTriple:
        return CharTriple(
            a=SampledPath(self.times, self.A[:, seed_index]),
            b=SampledPath(self.times, self.B[:, seed_index]),
            c=SampledPath(self.times, self.C[:, seed_index]),
        )

    def tau_map(self) -> np.ndarray:
        return self.tau.reshape(self.box.counts)


def _seed_gradient(box: GridBox, resh: np.ndarray) -> list:
    """np.gradient along each seed axis, second-order at edges when possible."""
    return [np.gradient(resh, ax, axis=1 + k, edge_order=2 if ax.size >= 3 else 1)
            for k, ax in enumerate(box.axes())]


def _seed_jacobian(box: GridBox, A: np.ndarray) -> np.ndarray:
    """D_x a_t across seeds: central differences inside, one-sided at edges."""
    n = A.shape[0]
    resh = A.reshape((n,) + box.counts + (box.dim,))
    cols = _seed_gradient(box, resh)
    jac = np.stack(cols, axis=-1)  # (n, *counts, d, d): [..., i, j] = d a_i / d x_j
    return jac.reshape(n, -1, box.dim, box.dim)


def _first_zero_crossing(times: np.ndarray, det: np.ndarray):
    """Linear-interpolation time of the first sign change per seed column.

    Returns (tau, folded). Columns whose det never changes sign get
    tau = horizon with folded = False, so tau <= horizon always holds.
    """
    n, m = det.shape
    tau = np.full(m, float(times[-1]))
    folded = np.zeros(m, dtype=bool)
    sign_change = (det[:-1] > 0) & (det[1:] <= 0)
    for j in range(m):
        if det[0, j] <= 0:
            tau[j] = times[0]
            folded[j] = True
            continue
        hits = np.nonzero(sign_change[:, j])[0]
        if hits.size:
            i = hits[0]
            d0, d1 = det[i, j], det[i + 1, j]
            tau[j] = times[i] + d0 / (d0 - d1) * (times[i + 1] - times[i])
            folded[j] = True
    return tau, folded


def build_char_field(H: HamiltonianSpec, X: SampledPath, phi: SmoothMap,
                     box: GridBox, substeps: int = 1) -> CharField:
    if box.dim != H.state_dim:
        raise PathError("seed box dimension does not match the state dimension")
    seeds, u0, p0 = seed_from_initial_data(phi, box.points())
    A, B, C, alive_idx = _char_core(H, X, seeds, u0, p0, substeps)
    jac = _seed_jacobian(box, A)
    det = np.linalg.det(jac)
    tau, folded = _first_zero_crossing(X.times, det)
    return CharField(box=box, seeds=seeds, times=X.times, A=A, B=B, C=C,
                     jac=jac, det=det, tau=tau, folded=folded,
                     alive_until=X.times[alive_idx])


def _invert_batch(field: CharField, idx: int, targets: np.ndarray,
                  newton_tol: float, max_iter: int, x0: np.ndarray | None = None):
    """Newton on the interpolated map a_t.

    Returns (x, ok, pre, inside): convergence, pre-fold cell corners, and
    preimage-in-seed-box masks. Outside the box the interpolant
    extrapolates linearly, so only in-hull preimages are trustworthy.
    """
    Y = np.atleast_2d(np.asarray(targets, dtype=float))
    A = field.A[idx]
    J = field.jac[idx]
    if x0 is None:
        d2 = np.linalg.norm(A[None, :, :] - Y[:, None, :], axis=2)
        x = field.seeds[np.argmin(d2, axis=1)].copy()
    else:
        x = np.array(x0, dtype=float)
    r = interp_nodal(field.box, A, x) - Y
    for _ in range(max_iter):
        nrm = np.linalg.norm(r, axis=1)
        live = nrm > newton_tol
        if not live.any():
            break
        jq = interp_nodal(field.box, J, x)
        dets = np.linalg.det(jq)
        singular = np.abs(dets) < 1e-14
        jq[singular] = np.eye(field.box.dim)
        delta = np.linalg.solve(jq, r[..., None])[..., 0]
        delta[singular | ~live] = 0.0
        x = x - delta
        r = interp_nodal(field.box, A, x) - Y
    ok = np.linalg.norm(r, axis=1) <= newton_tol
    t_val = field.times[idx]
    corners = _cell_corners(field.box, x)
    blocked = field.folded[corners] & (field.tau[corners] <= t_val)
    pre = ~blocked.any(axis=1)
    lo = np.asarray(field.box.lower)
    hi = np.asarray(field.box.upper)
    inside = ((x >= lo) & (x <= hi)).all(axis=1)
    return x, ok, pre, inside


def invert_char_map(field: CharField, t: float, y, newton_tol: float = 1e-10,
                    max_iter: int = 50) -> np.ndarray:
    """Preimage under the interpolated characteristic map at grid time t."""
    idx = field.index_of(t)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    x, ok, pre, inside = _invert_batch(field, idx, y[None, :], newton_tol, max_iter)
    if not pre[0]:
        raise CausticError(f"t={t} is at or beyond the fold for this region")
    if not inside[0]:
        raise InversionError("preimage left the seeded box; enlarge the seed grid")
    if not ok[0]:
        raise InversionError("Newton on the characteristic map did not converge")
    return x[0]


@dataclass(frozen=True)
class SolutionField:
    """u and Du assembled on evaluation points over a set of grid times.

    valid marks entries whose inversion converged from a pre-fold cell;
    sigma_proxy is the first time an evaluation point stops being valid
    (+inf when it never does). tau_map carries the per-seed fold times
    (clamped to the horizon for seeds that never fold).
    """

    points: np.ndarray
    times: np.ndarray
    u: np.ndarray
    du: np.ndarray
    valid: np.ndarray
    tau_map: np.ndarray
    sigma_proxy: np.ndarray


def assemble_solution(field: CharField, t: float, points,
                      newton_tol: float = 1e-10, max_iter: int = 50):
    """One time slice: (u (k,), du (k, d), valid (k,)) at the given points."""
    idx = field.index_of(t)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    x, ok, pre, inside = _invert_batch(field, idx, pts, newton_tol, max_iter)
    valid = ok & pre & inside
    u = interp_nodal(field.box, field.B[idx], x)
    du = interp_nodal(field.box, field.C[idx], x)
    u[~valid] = np.nan
    du[~valid] = np.nan
    return u, du, valid


def assemble_solution_field(field: CharField, points, times=None,
                            newton_tol: float = 1e-10, max_iter: int = 50) -> SolutionField:
    """Assemble u, Du over many times, warm-starting the inversions."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if times is None:
        times = field.times
    times = np.asarray(times, dtype=float)
    k = pts.shape[0]
    u = np.empty((times.size, k))
    du = np.empty((times.size, k, field.box.dim))
    valid = np.empty((times.size, k), dtype=bool)
    x_prev = None
    for r, t in enumerate(times):
        idx = field.index_of(float(t))
        x, ok, pre, inside = _invert_batch(field, idx, pts, newton_tol, max_iter, x0=x_prev)
        v = ok & pre & inside
        u[r] = interp_nodal(field.box, field.B[idx], x)
        du[r] = interp_nodal(field.box, field.C[idx], x)
        u[r, ~v] = np.nan
        du[r, ~v] = np.nan
        valid[r] = v
        x_prev = np.where(v[:, None], x, pts)
    sigma = np.full(k, np.inf)
    for j in range(k):
        bad = np.nonzero(~valid[:, j])[0]
        if bad.size:
            sigma[j] = float(times[bad[0]])
    return SolutionField(points=pts, times=times, u=u, du=du, valid=valid,
                         tau_map=field.tau.copy(), sigma_proxy=sigma)


def pde_residual(sol: SolutionField, H: HamiltonianSpec, X: SampledPath,
                 phi: SmoothMap, levels: int = 3) -> ResidualReport:
    """sup over valid (t, x) of |u - phi(x) - sum_j int F^j(r, x, u, Du) dX^j|.

    The solution must be sampled on the full driver grid; each dyadic
    level re-sums the integrand on its own sub-grid (left tags).
    """
    if not np.array_equal(sol.times, X.times):
        raise PathError("pde_residual needs the solution on the driver grid")
    X = dyadic_prefix(X, levels)
    steps = dyadic_steps(X.n_points, levels)
    n, k = X.n_points, sol.u.shape[1]
    G = np.zeros((H.n_drivers, n, k))
    pts = sol.points
    with np.errstate(invalid="ignore"):
        for j, comp in enumerate(H.components):
            for i in range(n):
                G[j, i] = comp.value_at(X.times[i], pts, sol.u[i], sol.du[i])
    phi0 = phi.value_at(pts)[..., 0]
    always_valid = sol.valid[:n].all(axis=0)
    if not always_valid.any():
        raise CausticError("no evaluation point stays valid over the horizon")
    out = []
    for step in steps:
        tsel = np.arange(0, n, step)
        dXk = np.diff(X.values[tsel], axis=0)  # (nk-1, ndrv)
        incr = np.einsum("jik,ij->ik", G[:, tsel[:-1], :], dXk)
        W = np.concatenate([np.zeros((1, k)), np.cumsum(incr, axis=0)])
        resid = sol.u[tsel] - phi0[None, :] - W
        sup = float(np.max(np.abs(resid[:, always_valid])))
        out.append((float(np.max(np.diff(X.times[tsel]))), sup))
    return make_residual_report(out, scale=float(np.nanmax(np.abs(sol.u))))


def verify_inverse_flow_equation(field: CharField, H: HamiltonianSpec, X: SampledPath,
                                 points, levels: int = 3,
                                 newton_tol: float = 1e-10, max_iter: int = 50) -> ResidualReport:
    """Differenced a_t^{-1}(y) against its displayed driving equation.

    The inverse-point path and the integrand
    (D_x a_t)^{-1} F_p^j(t, y, b(a^{-1}(y)), c(a^{-1}(y))) are tabulated on
    the finest grid; each level compares increments against left sums on
    its sub-grid. Points must stay pre-fold over the whole horizon.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    block = 2 ** (levels - 1)
    n_int = ((field.times.size - 1) // block) * block
    if n_int < block:
        raise PathError(
            f"{field.times.size - 1} intervals cannot support {levels} dyadic levels"
        )
    n = n_int + 1
    k = pts.shape[0]
    P = np.empty((n, k, field.box.dim))
    SJ = np.empty((H.n_drivers, n, k, field.box.dim))
    x_prev = None
    for i in range(n):
        x, ok, pre, inside = _invert_batch(field, i, pts, newton_tol, max_iter, x0=x_prev)
        if not pre.all():
            raise CausticError("inverse-flow check needs pre-fold points throughout")
        if not (ok & inside).all():
            raise InversionError("inverse-flow check lost coverage of a preimage")
        P[i] = x
        x_prev = x
        bq = interp_nodal(field.box, field.B[i], x)
        cq = interp_nodal(field.box, field.C[i], x)
        jq = interp_nodal(field.box, field.jac[i], x)
        jinv = np.linalg.inv(jq)
        for j, comp in enumerate(H.components):
            fp = comp.dp_at(field.times[i], pts, bq, cq)
            SJ[j, i] = np.einsum("kde,ke->kd", jinv, fp)
    steps = dyadic_steps(n, levels)
    out = []
    scale = float(np.max(np.abs(P)))
    for step in steps:
        tsel = np.arange(0, n, step)
        dXk = np.diff(X.values[tsel], axis=0)
        incr = np.einsum("jikd,ij->ikd", SJ[:, tsel[:-1]], dXk)
        W = np.concatenate([np.zeros((1, k, field.box.dim)), np.cumsum(incr, axis=0)])
        resid = (P[tsel] - P[0][None]) - W
        out.append((float(np.max(np.diff(field.times[tsel]))),
                    float(np.max(np.linalg.norm(resid, axis=2)))))
    return make_residual_report(out, scale=scale)


def verify_compatibility(field: CharField, tol: float = 1e-3) -> CheckReport:
    """D_x b_t = c_t . D_x a_t across seeds and times (central differences)."""
    n = field.times.size
    box = field.box
    b_resh = field.B.reshape((n,) + box.counts)
    db = np.stack(_seed_gradient(box, b_resh), axis=-1).reshape(n, -1, box.dim)
    rhs = np.einsum("nme,nmei->nmi", field.C, field.jac)
    resid = np.linalg.norm(db - rhs, axis=2)  # (n, m)
    flat = int(np.argmax(resid))
    ti, si = np.unravel_index(flat, resid.shape)
    return CheckReport(
        max_residual=float(resid[ti, si]),
        arg_max_point=tuple(float(v) for v in field.seeds[si]),
        passed=bool(resid[ti, si] <= tol),
        tol=float(tol),
        details={"time": float(field.times[ti])},
    )
