"""The filtered wave-solve operator: one matrix-vector product per wave solve.

Applying the operator to an active vector y means: place y on the grid, fill
boundary/ghost values, march the wave equation over the filter window, and
accumulate the trapezoid-weighted filter sum inside the time loop (both
endpoints included).  The result is packed back to an active vector.  The
operator shares eigenvectors with the discrete Laplacian; its eigenvalue for a
spatial mode lambda_h is the scalar ``beta_tilde_d(lambda_h)`` from
:mod:`eigenwave.filters`, which is what every validation test leans on.

Counters track wave solves, time steps, and inner linear iterations; they are
the cost metrics reported by the harness.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .filters import FilterSpec, SchemeKind, beta_tilde_d
from .grid import GridFunction, ip_weights, n_active, pack_active
from .laplacian import DiscreteLaplacian, unpack_active
from .wavesolve import DefiniteSolver, LinearSolverSpec, march


class EigenWaveOperator:
    """Matrix-free linear operator over active vectors.

    One instance owns a single solver context (the implicit factorization or
    multigrid hierarchy is built once and reused across applications), so an
    instance must be applied from one thread at a time.
    """

    def __init__(self, lap, filter_spec, scheme, solver=None, guard_factor=1e8):
        if not isinstance(scheme, SchemeKind):
            raise ConfigError(f"scheme must be a SchemeKind, got {scheme!r}")
        self.lap = lap
        self.filter = filter_spec
        self.scheme = scheme
        self.solver_spec = solver if solver is not None else LinearSolverSpec()
        self.guard_factor = guard_factor
        self.n = n_active(lap.grid, lap.bc)
        self.weights = ip_weights(lap.grid, lap.bc)
        self.wave_solves = 0
        self.time_steps = 0
        self.linear_iterations = 0
        self._solver = None
        if scheme == SchemeKind.IMPLICIT:
            self._solver = DefiniteSolver(lap, filter_spec.dt, self.solver_spec)

    @property
    def solver_context(self):
        return self._solver

    def counters(self):
        return {"wave_solves": self.wave_solves,
                "time_steps": self.time_steps,
                "linear_iterations": self.linear_iterations}

    def apply(self, y):
        """One wave solve: returns the filtered solution as an active vector."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise ConfigError(f"expected active vector of length {self.n}, "
                              f"got shape {y.shape}")
        lap = self.lap
        spec = self.filter
        v0 = unpack_active(lap.grid, y, lap.bc, lap.order)
        coef = spec.quadrature_coefficients()
        acc = np.zeros(lap.grid.shape)

        def accumulate(n, w):
            acc[...] += coef[n] * w.values

        iters_before = self._solver.total_iterations if self._solver else 0
        march(v0, spec.n_steps, self.scheme, lap, spec.dt,
              solver=self._solver, guard_factor=self.guard_factor,
              on_level=accumulate)
        self.wave_solves += 1
        self.time_steps += spec.n_steps
        if self._solver is not None:
            self.linear_iterations += self._solver.total_iterations - iters_before
        return pack_active(GridFunction(lap.grid, acc), lap.bc)

    # alias matching the usual black-box naming in matrix-free eigensolvers
    matvec = apply

    def spectrum_map(self, lambdas):
        """Scalar transfer values for given spatial eigenvalues (no grid work)."""
        lambdas = np.asarray(lambdas, dtype=float)
        if np.any(lambdas < 0):
            raise ValueError("lambdas must be nonnegative")
        return beta_tilde_d(lambdas, self.filter, self.scheme)


def operator_for(lap, omega, n_periods=1, scheme=SchemeKind.IMPLICIT,
                 n_its=10, cfl=0.9, solver=None, adjust_omega=False):
    """Convenience constructor wiring the step count to the scheme.

    Implicit runs take ``n_its`` steps per period regardless of the grid;
    explicit runs take the smallest step count satisfying the CFL bound at the
    given ``cfl`` fraction.  With ``adjust_omega`` the implicit target is
    reduced so the discrete filter peaks at the requested frequency.
    """
    from .filters import adjusted_omega
    from .wavesolve import stable_dt_explicit

    if scheme == SchemeKind.IMPLICIT:
        target = adjusted_omega(omega, n_its) if adjust_omega else omega
        spec = FilterSpec(target, n_periods, n_periods * n_its)
    else:
        t_final = n_periods * 2.0 * np.pi / omega
        dt_max = stable_dt_explicit(lap, cfl)
        n_steps = max(int(np.ceil(t_final / dt_max)), 1)
        spec = FilterSpec(omega, n_periods, n_steps)
    return EigenWaveOperator(lap, spec, scheme, solver=solver)
