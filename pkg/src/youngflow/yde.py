"""Differential systems dY = f(Y) dX: explicit Euler, flows, inversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import FieldSpec
from .paths import PathError, SampledPath


class BlowUpError(ArithmeticError):
    """State left the finite range; carries the last valid time."""

    def __init__(self, last_valid_time: float):
        super().__init__(f"state became non-finite after t={last_valid_time}")
        self.last_valid_time = last_valid_time


class NewtonError(RuntimeError):
    """Newton iteration failed to meet its residual tolerance."""

    def __init__(self, message: str, best_residual: float):
        super().__init__(f"{message} (best residual {best_residual:.3e})")
        self.best_residual = best_residual


@dataclass(frozen=True)
class SolveConfig:
    scheme: str = "euler"
    substeps_per_interval: int = 1

    def __post_init__(self):
        if self.scheme != "euler":
            raise PathError(f"unknown scheme {self.scheme!r}; only 'euler' is implemented")
        if self.substeps_per_interval < 1:
            raise PathError("substeps_per_interval must be >= 1")


def _check_compat(field: FieldSpec, X: SampledPath):
    if X.is_operator:
        raise PathError("drivers must be vector paths")
    if field.driver_dim != X.dim:
        raise PathError(
            f"field expects a {field.driver_dim}-dim driver, path has dim {X.dim}"
        )


def _euler_core(field: FieldSpec, X: SampledPath, y0s: np.ndarray,
                cfg: SolveConfig, with_jacobian: bool, stop_index: int | None = None):
    """Batched explicit Euler over the driver grid.

    Y_{i+1} = Y_i + f(t_i, Y_i) (X_{t_{i+1}} - X_{t_i}); substeps split each
    increment evenly (the driver is linear between samples). Rows that turn
    non-finite are frozen at their last valid grid state and recorded in
    alive_idx. Returns (states (n, m, d), jacobians or None, alive_idx (m,)).
    """
    times = X.times
    n = times.size if stop_index is None else stop_index + 1
    dX = np.diff(X.values[:n], axis=0)
    y = np.array(np.atleast_2d(y0s), dtype=float)
    m, d = y.shape
    states = np.empty((n, m, d))
    states[0] = y
    jac = None
    jacs = None
    if with_jacobian:
        jac = np.broadcast_to(np.eye(d), (m, d, d)).copy()
        jacs = np.empty((n, m, d, d))
        jacs[0] = jac
    alive_idx = np.full(m, n - 1, dtype=int)
    alive = np.ones(m, dtype=bool)
    sub = cfg.substeps_per_interval
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n - 1):
            dt = times[i + 1] - times[i]
            dxs = dX[i] / sub
            for s in range(sub):
                ts = times[i] + dt * (s / sub)
                f = field.value_at(ts, y)
                if with_jacobian:
                    df = field.jacobian_at(ts, y)
                    step_lin = np.einsum("mdnk,n->mdk", df, dxs)
                    jac = jac + np.einsum("mde,mek->mdk", step_lin, jac)
                y = y + np.einsum("mdn,n->md", f, dxs)
            bad = alive & ~np.isfinite(y).all(axis=1)
            if with_jacobian:
                bad |= alive & ~np.isfinite(jac).all(axis=(1, 2))
            if np.any(bad):
                alive_idx[bad] = i
                alive &= ~bad
                y[bad] = states[i][bad]
                if with_jacobian:
                    jac[bad] = jacs[i][bad]
            states[i + 1] = np.where(alive[:, None], y, states[i])
            y = states[i + 1].copy()
            if with_jacobian:
                jacs[i + 1] = np.where(alive[:, None, None], jac, jacs[i])
                jac = jacs[i + 1].copy()
    return states, jacs, alive_idx


def solve_yde(field: FieldSpec, X: SampledPath, y0, cfg: SolveConfig | None = None) -> SampledPath:
    """Solve dY = f(Y) dX from y0; raises BlowUpError on non-finite state."""
    cfg = cfg or SolveConfig()
    _check_compat(field, X)
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    states, _, alive_idx = _euler_core(field, X, y0[None, :], cfg, with_jacobian=False)
    if alive_idx[0] != X.n_points - 1:
        raise BlowUpError(float(X.times[alive_idx[0]]))
    return SampledPath(X.times, states[:, 0, :])


@dataclass(frozen=True)
class FlowMap:
    """Flow of dY = f(Y) dX over a batch of initial points.

    states has shape (n, m, d), jacobians (n, m, d, d) from the variational
    recursion J_{i+1} = (I + sum_j D_y f_j dX^j) J_i. alive_until[i] is the
    last time the i-th trajectory was finite; beyond it the stored state is
    frozen. The producing field/driver/config are kept so the flow can be
    re-evaluated from fresh initial points.
    """

    field: FieldSpec
    driver: SampledPath
    cfg: SolveConfig
    initial_points: np.ndarray
    states: np.ndarray
    jacobians: np.ndarray
    alive_until: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.driver.times

    @property
    def n_points(self) -> int:
        return self.initial_points.shape[0]

    def index_of(self, t: float) -> int:
        return self.driver.index_of(t)

    def state_at(self, t: float) -> np.ndarray:
        return self.states[self.index_of(t)]

    def jacobian_at(self, t: float) -> np.ndarray:
        return self.jacobians[self.index_of(t)]

    def trajectory(self, i: int) -> SampledPath:
        return SampledPath(self.times, self.states[:, i, :])

    def jacobian_path(self, i: int) -> SampledPath:
        return SampledPath(self.times, self.jacobians[:, i, :, :])

    def evaluate(self, x, stop_index: int | None = None) -> np.ndarray:
        """Fresh Euler evaluation of the flow from new initial points x.

        Identical arithmetic to the stored solve (bitwise, by the
        recurrence structure). Returns states (k, m, d) up to stop_index.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        states, _, alive = _euler_core(
            self.field, self.driver, x, self.cfg, with_jacobian=False, stop_index=stop_index
        )
        want = (self.driver.n_points - 1) if stop_index is None else stop_index
        if np.any(alive < want):
            raise BlowUpError(float(self.times[int(alive.min())]))
        return states


def solve_flow(field: FieldSpec, X: SampledPath, initial_points, cfg: SolveConfig | None = None) -> FlowMap:
    cfg = cfg or SolveConfig()
    _check_compat(field, X)
    pts = np.atleast_2d(np.asarray(initial_points, dtype=float))
    states, jacs, alive_idx = _euler_core(field, X, pts, cfg, with_jacobian=True)
    return FlowMap(
        field=field,
        driver=X,
        cfg=cfg,
        initial_points=pts,
        states=states,
        jacobians=jacs,
        alive_until=X.times[alive_idx],
    )


def invert_flow(flow: FlowMap, t: float, y, newton_tol: float = 1e-10,
                max_iter: int = 50, initial_guess=None) -> np.ndarray:
    """Solve Y_t(x) = y for x by damped Newton iteration.

    Residuals come from fresh Euler evaluations of the flow; derivatives
    use the stored Jacobian of the initial point nearest the current
    iterate; the starting guess is the initial point whose endpoint image
    is nearest y (or the caller's warm start). Steps are halved while the
    residual increases.
    """
    idx = flow.index_of(t)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if initial_guess is not None:
        x = np.atleast_1d(np.asarray(initial_guess, dtype=float)).copy()
    else:
        images = flow.states[idx]
        x = flow.initial_points[int(np.argmin(np.linalg.norm(images - y, axis=1)))].copy()

    def residual(xc):
        return flow.evaluate(xc[None, :], stop_index=idx)[-1, 0] - y

    r = residual(x)
    rn = float(np.linalg.norm(r))
    for _ in range(max_iter):
        if rn <= newton_tol:
            return x
        near = int(np.argmin(np.linalg.norm(flow.initial_points - x, axis=1)))
        jac = flow.jacobians[idx, near]
        try:
            delta = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            raise NewtonError("stored Jacobian is singular at the Newton seed", rn)
        for _ in range(9):
            cand = x - delta
            try:
                rc = residual(cand)
            except BlowUpError:
                delta = 0.5 * delta
                continue
            rcn = float(np.linalg.norm(rc))
            if rcn < rn:
                break
            delta = 0.5 * delta
        else:
            raise NewtonError("damped Newton made no progress", rn)
        x, r, rn = cand, rc, rcn
    if rn <= newton_tol:
        return x
    raise NewtonError(f"no convergence within {max_iter} iterations", rn)
