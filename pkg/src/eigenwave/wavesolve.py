"""Wave-equation time-steppers and linear solvers for the implicit system.

Two three-level schemes advance W^n ~ w(x, t^n):

    explicit:  W^{n+1} = 2 W^n - W^{n-1} + dt^2 L W^n
    implicit:  M W^{n+1} = 2 W^n - W^{n-1} + (dt^2/2) L W^{n-1},
               M = I - (dt^2/2) L

Both start from W^0 = v0 with zero initial velocity, which gives the special
first steps W^1 = v0 + (dt^2/2) L v0 and M W^1 = v0 respectively.  The
implicit matrix M is symmetric positive definite on active points (eigenvalues
1 + lambda_h^2 dt^2 / 2), so it can be solved by a dense factorization, plain
conjugate gradients, or a geometric multigrid V-cycle with red-black
Gauss-Seidel smoothing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import ConfigError, SolverError, StabilityError
from .grid import (GridFunction, StructuredGrid, active_slab, ip_weights,
                   pack_active, scatter_active)
from .laplacian import (DENSE_CAP, DiscreteLaplacian, assemble_dense,
                        axis_symbol_max, fill_ghost, unpack_active)
from .filters import SchemeKind


class SolverKind(Enum):
    DIRECT = "direct"
    CG = "cg"
    MULTIGRID = "multigrid"


@dataclass(frozen=True)
class LinearSolverSpec:
    """How to solve the definite implicit system.

    ``tol`` is a relative 2-norm residual bound for the iterative methods;
    the direct method factors the dense matrix once and is exact to roundoff.
    """

    kind: SolverKind = SolverKind.DIRECT
    tol: float = 1e-10
    max_iter: int = 500
    pre_smooth: int = 2
    post_smooth: int = 1
    coarsest: int = 8
    diagonal_precondition: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ConfigError(f"solver tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError("solver max_iter must be >= 1")


@dataclass(frozen=True)
class ImplicitMatrix:
    """M = I - (dt^2/2) L restricted to active points."""

    lap: DiscreteLaplacian
    dt: float

    def apply_packed(self, y):
        return y - 0.5 * self.dt ** 2 * self.lap.apply_packed(y)

    def diagonal(self):
        """The (constant) diagonal entry of M on the uniform stencil."""
        lap = self.lap
        stencil_center = {2: 2.0, 4: 30.0 / 12.0}[lap.order]
        s = sum(stencil_center / h ** 2 for h in lap.grid.h)
        return 1.0 + 0.5 * self.dt ** 2 * lap.bc.c ** 2 * s


@dataclass
class WaveState:
    """Two consecutive time levels of the wave solution."""

    w_prev: GridFunction
    w_curr: GridFunction
    n: int
    dt: float


def stable_dt_explicit(lap, cfl):
    """Largest stable explicit step scaled by ``cfl``; dt_max = 2/lambda_h^max."""
    if not 0.0 < cfl <= 1.0:
        raise ConfigError(f"cfl must lie in (0, 1], got {cfl}")
    return cfl * 2.0 / lap.max_eigenvalue_bound()


def first_step(v0, scheme, lap, dt, solver=None):
    """Advance from the initial data to time level 1 (zero initial velocity)."""
    if scheme == SchemeKind.EXPLICIT:
        lv = lap.apply(v0)
        w1 = GridFunction(v0.grid, v0.values + 0.5 * dt ** 2 * lv.values)
        fill_ghost(w1, lap.bc, lap.order)
    else:
        b = pack_active(v0, lap.bc)
        y, _ = solver.solve(b, x0=b)
        w1 = unpack_active(lap.grid, y, lap.bc, lap.order)
    return WaveState(v0, w1, 1, dt)


def advance_step(state, scheme, lap, solver=None):
    """One step of the chosen scheme; ghosts are refreshed on the new level."""
    dt = state.dt
    wp, wc = state.w_prev, state.w_curr
    if scheme == SchemeKind.EXPLICIT:
        lw = lap.apply(wc)
        wn = GridFunction(wc.grid, 2.0 * wc.values - wp.values + dt ** 2 * lw.values)
        fill_ghost(wn, lap.bc, lap.order)
    else:
        lw_prev = lap.apply(wp)
        rhs = GridFunction(wc.grid,
                           2.0 * wc.values - wp.values + 0.5 * dt ** 2 * lw_prev.values)
        b = pack_active(rhs, lap.bc)
        y, _ = solver.solve(b, x0=pack_active(wc, lap.bc))
        wn = unpack_active(lap.grid, y, lap.bc, lap.order)
    return WaveState(wc, wn, state.n + 1, dt)


def march(v0, n_steps, scheme, lap, dt, solver=None, guard_factor=1e8, on_level=None):
    """Run ``n_steps`` steps from v0, with a blow-up guard on every level.

    ``on_level(n, w)`` is called for every time level including n=0; the guard
    raises StabilityError once the max-norm exceeds ``guard_factor`` times the
    initial amplitude (or stops being finite).
    """
    scale = float(np.max(np.abs(v0.values)))
    limit = guard_factor * max(scale, np.finfo(float).tiny)
    if on_level is not None:
        on_level(0, v0)
    if n_steps == 0:
        return WaveState(v0, v0, 0, dt)
    state = first_step(v0, scheme, lap, dt, solver)
    while True:
        amp = float(np.max(np.abs(state.w_curr.values)))
        if not np.isfinite(amp) or amp > limit:
            raise StabilityError(
                f"wave amplitude grew to {amp:.3e} (limit {limit:.3e}) at step "
                f"{state.n}; the time step is unstable for this scheme",
                step=state.n, amplitude=amp)
        if on_level is not None:
            on_level(state.n, state.w_curr)
        if state.n >= n_steps:
            return state
        state = advance_step(state, scheme, lap, solver)


def _cg(matvec, b, x0, tol, max_iter, weights=None, diag=None):
    """Plain conjugate gradients with a relative 2-norm stopping rule.

    ``weights`` selects the inner product in which the operator is
    self-adjoint (needed when Neumann boundary points are active); the
    stopping test stays in the plain 2-norm.  ``diag`` enables the scalar
    Jacobi preconditioner.
    """
    def dot(u, v):
        return float(u @ v) if weights is None else float(u @ (weights * v))

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), 0
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - matvec(x)
    z = r if diag is None else r / diag
    p = z.copy()
    rz = dot(r, z)
    for it in range(1, max_iter + 1):
        if np.linalg.norm(r) <= tol * b_norm:
            return x, it - 1
        ap = matvec(p)
        alpha = rz / dot(p, ap)
        x += alpha * p
        r -= alpha * ap
        z = r if diag is None else r / diag
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = float(np.linalg.norm(b - matvec(x)) / b_norm)
    if res <= tol:
        return x, max_iter
    raise SolverError(f"cg did not reach tol={tol:.1e} in {max_iter} iterations "
                      f"(residual {res:.3e})", residual=res, iterations=max_iter)


class _MgIncompatible(Exception):
    pass


# a level at or below this many unknowns is solved densely instead of being
# coarsened further; keeps desk-scale cycles from being dominated by python
# dispatch on near-empty grids
COARSE_DIRECT_CAP = 300


class MultigridHierarchy:
    """Geometric multigrid for M = I - (dt^2/2) L, order-2 Cartesian grids.

    Levels coarsen by a factor of two per axis until every axis has at most
    ``coarsest`` cells or the level is small enough to factor directly; the
    coarse operators are rediscretizations of the same shifted Laplacian.
    Smoothing is red-black Gauss-Seidel over the active points, restriction is
    full weighting, prolongation is multilinear interpolation, and the
    coarsest level is solved densely.
    """

    def __init__(self, lap, dt, spec):
        if lap.order != 2:
            raise _MgIncompatible("multigrid supports the order-2 operator only")
        self.spec = spec
        self.dt = dt
        self.levels = []
        grid, bc = lap.grid, lap.bc
        n = grid.n_cells
        while True:
            level = _MgLevel(StructuredGrid(grid.extents, n, 1), bc, dt)
            self.levels.append(level)
            if max(n) <= spec.coarsest:
                break
            if len(self.levels) >= 2 and level.lap.n_active <= COARSE_DIRECT_CAP:
                break
            if any(m % 2 != 0 or m // 2 < 4 for m in n):
                if len(self.levels) == 1:
                    raise _MgIncompatible(
                        f"grid {grid.n_cells} cannot be coarsened (odd cell count)")
                break
            n = tuple(m // 2 for m in n)
        self.levels[-1].factor_dense()

    def vcycle(self, b, y, level=0):
        """One V-cycle on grid functions; returns the improved ``y``."""
        lev = self.levels[level]
        if level == len(self.levels) - 1:
            return lev.solve_dense(b)
        for _ in range(self.spec.pre_smooth):
            lev.smooth(y, b)
        r = lev.residual(y, b)
        rc = lev.restrict_to(self.levels[level + 1], r)
        ec = GridFunction.zeros(self.levels[level + 1].grid)
        ec = self.vcycle(rc, ec, level + 1)
        y.values += lev.prolong_from(self.levels[level + 1], ec).values
        for _ in range(self.spec.post_smooth):
            lev.smooth(y, b)
        return y

    def solve(self, b_vec, x0=None, tol=None, max_iter=None):
        """Iterate V-cycles to a relative residual; returns (y, cycles)."""
        tol = self.spec.tol if tol is None else tol
        max_iter = self.spec.max_iter if max_iter is None else max_iter
        lev = self.levels[0]
        b_norm = float(np.linalg.norm(b_vec))
        if b_norm == 0.0:
            return np.zeros_like(b_vec), 0
        b = lev.to_gridfunction(b_vec)
        y = lev.to_gridfunction(x0) if x0 is not None else GridFunction.zeros(lev.grid)
        for cycle in range(max_iter + 1):
            res = lev.residual_norm(y, b) / b_norm
            if res <= tol:
                return pack_active(y, lev.bc), cycle
            if cycle == max_iter:
                raise SolverError(f"multigrid stalled at residual {res:.3e} "
                                  f"after {max_iter} cycles (tol {tol:.1e})",
                                  residual=res, iterations=max_iter)
            y = self.vcycle(b, y)


class _MgLevel:
    """Operator, smoother masks, and transfers for one multigrid level."""

    def __init__(self, grid, bc, dt):
        self.grid = grid
        self.bc = bc
        self.dt = dt
        self.lap = DiscreteLaplacian(grid, 2, bc)
        self.matrix = ImplicitMatrix(self.lap, dt)
        self.diag = self.matrix.diagonal()
        self.slab = active_slab(grid, bc)
        # with every face Dirichlet the 5/7-point stencil on active points only
        # ever reads boundary zeros, so ghost fills inside the cycle are skipped
        self.needs_fill = not bc.is_all_dirichlet()
        # checkerboard masks over the active slab, colored by global index sum
        idx = [np.arange(s.start, s.stop) - grid.ghost_width for s in self.slab]
        parity = np.zeros(tuple(len(i) for i in idx), dtype=int)
        for d, i in enumerate(idx):
            view = [1] * grid.dim
            view[d] = len(i)
            parity = parity + i.reshape(view)
        self.color_masks = (parity % 2 == 0, parity % 2 == 1)
        self._dense = None

    def to_gridfunction(self, vec):
        return scatter_active(self.grid, vec, self.bc)

    def _neighbor_sum(self, u):
        """(dt^2 c^2 / 2) * sum_d (u_{i-e_d} + u_{i+e_d}) / h_d^2 on the slab."""
        v = u.values
        c2 = 0.5 * self.dt ** 2 * self.bc.c ** 2
        out = np.zeros(tuple(s.stop - s.start for s in self.slab))
        for d in range(self.grid.dim):
            w = c2 / self.grid.h[d] ** 2
            for off in (-1, 1):
                sl = list(self.slab)
                sl[d] = slice(self.slab[d].start + off, self.slab[d].stop + off)
                out += w * v[tuple(sl)]
        return out

    def smooth(self, y, b):
        """One red-black Gauss-Seidel sweep of M y = b (grid functions)."""
        b_slab = b.values[self.slab]
        for mask in self.color_masks:
            if self.needs_fill:
                fill_ghost(y, self.bc)
            update = (b_slab + self._neighbor_sum(y)) / self.diag
            y.values[self.slab][mask] = update[mask]
        if self.needs_fill:
            fill_ghost(y, self.bc)
        return y

    def residual(self, y, b):
        if self.needs_fill:
            fill_ghost(y, self.bc)
        r = GridFunction.zeros(self.grid)
        r.values[self.slab] = (b.values[self.slab]
                               - self.diag * y.values[self.slab]
                               + self._neighbor_sum(y))
        if self.needs_fill:
            fill_ghost(r, self.bc)
        return r

    def residual_norm(self, y, b):
        if self.needs_fill:
            fill_ghost(y, self.bc)
        r = (b.values[self.slab] - self.diag * y.values[self.slab]
             + self._neighbor_sum(y))
        return float(np.linalg.norm(r.ravel()))

    def restrict_to(self, coarse, r):
        """Full-weighting restriction onto the coarse level's grid function.

        Separable per axis: smooth with (1/4, 1/2, 1/4) along the axis, then
        keep every second point.  Ghost layers of the residual supply the
        values one beyond the boundary; axes not yet processed keep theirs.
        """
        vals = r.values
        for d in range(self.grid.dim):
            n = vals.shape[d]
            left = [slice(None)] * vals.ndim
            core = [slice(None)] * vals.ndim
            right = [slice(None)] * vals.ndim
            left[d] = slice(0, n - 2)
            core[d] = slice(1, n - 1)
            right[d] = slice(2, n)
            smoothed = (0.25 * vals[tuple(left)] + 0.5 * vals[tuple(core)]
                        + 0.25 * vals[tuple(right)])
            sub = [slice(None)] * smoothed.ndim
            sub[d] = slice(0, smoothed.shape[d], 2)
            vals = smoothed[tuple(sub)]
        rc = GridFunction.zeros(coarse.grid)
        gw = coarse.grid.ghost_width
        core_c = tuple(slice(gw, gw + n + 1) for n in coarse.grid.n_cells)
        rc.values[core_c] = vals
        return fill_ghost(rc, self.bc) if self.needs_fill else rc

    def prolong_from(self, coarse, ec):
        """Multilinear interpolation of the coarse correction onto this level."""
        gw = self.grid.ghost_width
        vals = ec.values[tuple(slice(gw, gw + n + 1) for n in coarse.grid.n_cells)]
        for d in range(self.grid.dim):
            n_c = vals.shape[d] - 1
            shape = list(vals.shape)
            shape[d] = 2 * n_c + 1
            out = np.zeros(shape)
            even = [slice(None)] * vals.ndim
            even[d] = slice(0, 2 * n_c + 1, 2)
            out[tuple(even)] = vals
            odd = [slice(None)] * vals.ndim
            odd[d] = slice(1, 2 * n_c + 1, 2)
            lo = [slice(None)] * vals.ndim
            lo[d] = slice(0, n_c)
            hi = [slice(None)] * vals.ndim
            hi[d] = slice(1, n_c + 1)
            out[tuple(odd)] = 0.5 * (vals[tuple(lo)] + vals[tuple(hi)])
            vals = out
        ef = GridFunction.zeros(self.grid)
        core = tuple(slice(gw, gw + n + 1) for n in self.grid.n_cells)
        ef.values[core] = vals
        return fill_ghost(ef, self.bc) if self.needs_fill else ef

    def factor_dense(self):
        a = assemble_dense(self.lap, cap=DENSE_CAP)
        m = np.eye(a.shape[0]) - 0.5 * self.dt ** 2 * a
        self._dense = scipy.linalg.lu_factor(m)

    def solve_dense(self, b):
        y_vec = scipy.linalg.lu_solve(self._dense, pack_active(b, self.bc))
        y = scatter_active(self.grid, y_vec, self.bc)
        return fill_ghost(y, self.bc) if self.needs_fill else y


def mg_vcycle(hierarchy, b, y):
    """One V-cycle over active vectors; returns the improved iterate."""
    lev = hierarchy.levels[0]
    b_gf = lev.to_gridfunction(b)
    y_gf = lev.to_gridfunction(y)
    if lev.needs_fill:
        fill_ghost(y_gf, lev.bc)
    y_gf = hierarchy.vcycle(b_gf, y_gf)
    return pack_active(y_gf, lev.bc)


class DefiniteSolver:
    """Solver context for M = I - (dt^2/2) L, reused across time steps.

    Tracks the number of solves and total inner iterations so a run can
    report mean iterations (V-cycles) per solve.
    """

    def __init__(self, lap, dt, spec):
        self.lap = lap
        self.dt = dt
        self.spec = spec
        self.matrix = ImplicitMatrix(lap, dt)
        self.n_solves = 0
        self.total_iterations = 0
        self._weights = None
        if not lap.bc.is_all_dirichlet():
            self._weights = ip_weights(lap.grid, lap.bc)
        self._mg = None
        self._factor = None
        if spec.kind == SolverKind.DIRECT:
            a = assemble_dense(lap, cap=DENSE_CAP)
            m = np.eye(a.shape[0]) - 0.5 * dt ** 2 * a
            if lap.bc.is_all_dirichlet():
                self._factor = ("cho", scipy.linalg.cho_factor(m))
            else:
                self._factor = ("lu", scipy.linalg.lu_factor(m))
        elif spec.kind == SolverKind.MULTIGRID:
            try:
                self._mg = MultigridHierarchy(lap, dt, spec)
            except _MgIncompatible as exc:
                warnings.warn(f"{exc}; falling back to conjugate gradients")
                self._mg = None

    def solve(self, b, x0=None):
        """Solve M y = b; returns (y, iterations)."""
        self.n_solves += 1
        if self.spec.kind == SolverKind.DIRECT:
            kind, fac = self._factor
            y = (scipy.linalg.cho_solve(fac, b) if kind == "cho"
                 else scipy.linalg.lu_solve(fac, b))
            return y, 0
        if self._mg is not None:
            y, iters = self._mg.solve(b, x0=x0)
        else:
            diag = self.matrix.diagonal() if self.spec.diagonal_precondition else None
            y, iters = _cg(self.matrix.apply_packed, b, x0,
                           self.spec.tol, self.spec.max_iter,
                           weights=self._weights, diag=diag)
        self.total_iterations += iters
        return y, iters

    @property
    def mean_iterations(self):
        return self.total_iterations / self.n_solves if self.n_solves else 0.0


def solve_definite_system(matrix, b, spec, x0=None):
    """One-shot solve of M y = b per the solver spec (context not reused)."""
    solver = DefiniteSolver(matrix.lap, matrix.dt, spec)
    y, _ = solver.solve(np.asarray(b, dtype=float), x0=x0)
    return y
