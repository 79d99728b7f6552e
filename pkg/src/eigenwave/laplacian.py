"""Matrix-free finite-difference Laplacian with boundary-condition ghost fill.

The operator is ``c^2`` times the sum of 1D second-derivative stencils,

    order 2:  (1, -2, 1) / h^2
    order 4:  (-1, 16, -30, 16, -1) / (12 h^2)

applied at every active point.  Ghost values come from reflection through each
face: odd extension for Dirichlet (boundary value pinned to zero) and even
extension for Neumann.  On boxes these closures make tensor-product sine and
cosine modes exact eigenvectors of the discrete operator at both orders, which
is what the validation oracles rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError, ResourceLimitError
from .grid import (BCKind, BoundaryConditionSpec, GridFunction, StructuredGrid,
                   active_slab, pack_active, scatter_active)

DENSE_CAP = 5000

# per-axis stencils, offset -> coefficient (to be divided by h^2)
_STENCILS = {
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    4: {-2: -1.0 / 12.0, -1: 16.0 / 12.0, 0: -30.0 / 12.0,
        1: 16.0 / 12.0, 2: -1.0 / 12.0},
}


def _plane(ndim, axis, index):
    """Index tuple selecting one plane orthogonal to ``axis``."""
    sl = [slice(None)] * ndim
    sl[axis] = index
    return tuple(sl)


def fill_ghost(u, bc, order=None):
    """Fill boundary and ghost values of ``u`` in place; returns ``u``.

    Dirichlet faces get a zero boundary value and odd-extension ghosts,
    u(-k h) = -u(k h); Neumann faces get even-extension ghosts,
    u(-k h) = u(k h), with the boundary value left alone (it is active).
    The per-axis rules commute, so corners are well defined.
    """
    grid = u.grid
    if bc.dim != grid.dim:
        raise ConfigError(f"boundary spec has {bc.dim} axes, grid has {grid.dim}")
    gw = grid.ghost_width
    if order is not None and gw < order // 2:
        raise ConfigError(f"order {order} needs ghost_width >= {order // 2}, grid has {gw}")
    v = u.values
    nd = grid.dim
    for d, n in enumerate(grid.n_cells):
        low, high = bc.faces[d]
        b_lo, b_hi = gw, gw + n
        if low == BCKind.DIRICHLET:
            v[_plane(nd, d, b_lo)] = 0.0
        if high == BCKind.DIRICHLET:
            v[_plane(nd, d, b_hi)] = 0.0
        sign_lo = -1.0 if low == BCKind.DIRICHLET else 1.0
        sign_hi = -1.0 if high == BCKind.DIRICHLET else 1.0
        for k in range(1, gw + 1):
            v[_plane(nd, d, b_lo - k)] = sign_lo * v[_plane(nd, d, b_lo + k)]
            v[_plane(nd, d, b_hi + k)] = sign_hi * v[_plane(nd, d, b_hi - k)]
    return u


def unpack_active(grid, y, bc, order=None):
    """Active vector -> grid function with consistent boundary/ghost values."""
    u = scatter_active(grid, y, bc)
    return fill_ghost(u, bc, order)


def axis_symbol(order, theta):
    """h^2 times the (negated) 1D stencil eigenvalue at phase ``theta``.

    Applying the 1D stencil to exp(i*theta*x/h) multiplies it by
    -axis_symbol(order, theta)/h^2.
    """
    theta = np.asarray(theta, dtype=float)
    if order == 2:
        return 4.0 * np.sin(theta / 2.0) ** 2
    if order == 4:
        return (30.0 - 32.0 * np.cos(theta) + 2.0 * np.cos(2.0 * theta)) / 12.0
    raise ConfigError(f"order must be 2 or 4, got {order}")


def axis_symbol_max(order):
    """Maximum of :func:`axis_symbol` over all phases (at theta = pi)."""
    return {2: 4.0, 4: 16.0 / 3.0}[order]


@dataclass(frozen=True)
class DiscreteLaplacian:
    """Order-2 or order-4 discrete ``c^2 * Laplacian`` on a structured grid."""

    grid: StructuredGrid
    order: int
    bc: BoundaryConditionSpec

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ConfigError(f"order must be 2 or 4, got {self.order}")
        if self.grid.ghost_width < self.order // 2:
            raise ConfigError(f"order {self.order} needs ghost_width >= "
                              f"{self.order // 2}, grid has {self.grid.ghost_width}")
        if self.bc.dim != self.grid.dim:
            raise ConfigError("boundary spec dimension does not match grid")

    @property
    def n_active(self):
        from .grid import n_active
        return n_active(self.grid, self.bc)

    def apply(self, u, out=None):
        """Apply the stencil; ghosts of ``u`` must already be consistent.

        The result is defined on the non-ghost points (ghost entries of the
        output are zero).
        """
        grid = self.grid
        gw = grid.ghost_width
        nd = grid.dim
        core = tuple(slice(gw, gw + n + 1) for n in grid.n_cells)
        if out is None:
            out = GridFunction.zeros(grid)
        else:
            out.values[...] = 0.0
        acc = out.values[core]
        v = u.values
        c2 = self.bc.c ** 2
        for d in range(nd):
            inv_h2 = c2 / grid.h[d] ** 2
            for off, coef in _STENCILS[self.order].items():
                sl = list(core)
                sl[d] = slice(core[d].start + off, core[d].stop + off)
                acc += (coef * inv_h2) * v[tuple(sl)]
        return out

    def apply_packed(self, y):
        """Active-vector form: unpack, fill ghosts, apply, pack."""
        u = unpack_active(self.grid, y, self.bc, self.order)
        return pack_active(self.apply(u), self.bc)

    def max_eigenvalue_bound(self):
        """Largest lambda_h of the operator, from the per-axis symbol maxima."""
        total = sum(axis_symbol_max(self.order) / h ** 2 for h in self.grid.h)
        return self.bc.c * np.sqrt(total)


@lru_cache(maxsize=8)
def assemble_dense(lap, cap=DENSE_CAP):
    """Dense matrix of the operator over active points (small problems only).

    Column ``j`` is the packed application to the ``j``-th unit vector, so the
    matrix reproduces :meth:`DiscreteLaplacian.apply_packed` exactly.
    """
    n = lap.n_active
    if n > cap:
        raise ResourceLimitError(f"dense assembly of {n} unknowns exceeds cap {cap}")
    a = np.empty((n, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        a[:, j] = lap.apply_packed(e)
        e[j] = 0.0
    return a
