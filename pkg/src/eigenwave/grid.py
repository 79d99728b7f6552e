"""Tensor-product Cartesian grids with ghost layers and active-point packing.

A grid in d dimensions (d = 1, 2, 3) covers an axis-aligned box with
``n_cells[d]`` uniform cells per axis.  Storage for a field includes
``ghost_width`` extra layers beyond each face, so axis ``d`` holds
``n_cells[d] + 1 + 2*ghost_width`` points.  Point ``i`` (storage index) sits at
``x = a + (i - ghost_width)*h``:

    ghost ... ghost | boundary  interior ... interior  boundary | ghost ... ghost
        i < gw           i = gw                       i = gw + n      i > gw + n

Active points are the unknowns of the eigenvalue problem.  Along each axis the
active index range is the strict interior, extended to include the boundary
point on faces with a Neumann condition (the boundary value is an unknown
there; the condition itself is enforced through the ghost fill).  A point is
active when it is active along every axis, so the active set is always a
rectangular slab and packing is a single strided copy.

The packed ordering is lexicographic with the x axis fastest, which keeps
active vectors bit-identical across runs for identical configurations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError


class BCKind(Enum):
    """Homogeneous boundary condition applied on one face."""

    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


@dataclass(frozen=True)
class BoundaryConditionSpec:
    """Per-face boundary conditions plus the constant wave speed.

    ``faces[d] = (low, high)`` are the conditions on the two faces normal to
    axis ``d``.
    """

    faces: tuple
    c: float = 1.0

    def __post_init__(self):
        if self.c <= 0:
            raise ConfigError(f"wave speed must be positive, got c={self.c}")
        for pair in self.faces:
            if len(pair) != 2 or not all(isinstance(k, BCKind) for k in pair):
                raise ConfigError(f"malformed face specification: {pair!r}")

    @classmethod
    def dirichlet(cls, dim, c=1.0):
        return cls(tuple((BCKind.DIRICHLET, BCKind.DIRICHLET) for _ in range(dim)), c)

    @classmethod
    def neumann(cls, dim, c=1.0):
        return cls(tuple((BCKind.NEUMANN, BCKind.NEUMANN) for _ in range(dim)), c)

    @property
    def dim(self):
        return len(self.faces)

    def is_all_dirichlet(self):
        return all(k == BCKind.DIRICHLET for pair in self.faces for k in pair)


@dataclass(frozen=True)
class StructuredGrid:
    """Uniform Cartesian grid on a box, with ghost layers.

    extents     per-axis interval ((a, b), ...)
    n_cells     per-axis cell count
    ghost_width ghost layers per face (1 for the order-2 stencil, 2 for order 4)
    """

    extents: tuple
    n_cells: tuple
    ghost_width: int
    h: tuple = field(init=False)

    def __post_init__(self):
        dim = len(self.n_cells)
        if not 1 <= dim <= 3 or len(self.extents) != dim:
            raise ConfigError(f"dimension must be 1, 2 or 3 with matching extents, "
                              f"got {self.extents!r} / {self.n_cells!r}")
        if self.ghost_width not in (1, 2):
            raise ConfigError(f"ghost_width must be 1 or 2, got {self.ghost_width}")
        spacings = []
        for (a, b), n in zip(self.extents, self.n_cells):
            if not n >= 4:
                raise ConfigError(f"need at least 4 cells per axis, got {n}")
            if not b > a:
                raise ConfigError(f"degenerate extent [{a}, {b}]")
            spacings.append((b - a) / n)
        object.__setattr__(self, "h", tuple(spacings))

    @property
    def dim(self):
        return len(self.n_cells)

    @property
    def shape(self):
        """Total storage points per axis, ghosts included."""
        gw = self.ghost_width
        return tuple(n + 1 + 2 * gw for n in self.n_cells)

    @property
    def total_points(self):
        return int(np.prod(self.shape))

    def axis_coords(self, d):
        """Coordinates of all storage points along axis ``d``, ghosts included."""
        a, _ = self.extents[d]
        idx = np.arange(self.shape[d]) - self.ghost_width
        return a + idx * self.h[d]

    def meshgrid(self):
        """Coordinate arrays of shape ``self.shape``, one per axis."""
        axes = [self.axis_coords(d) for d in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def classify(self):
        """Point classification codes: 0 interior, 1 boundary, 2 ghost.

        Ghost wins over boundary; the three sets partition all points.
        """
        gw = self.ghost_width
        codes = np.zeros(self.shape, dtype=np.int8)
        boundary = np.zeros(self.shape, dtype=bool)
        for d, n in enumerate(self.n_cells):
            idx = np.arange(self.shape[d]) - gw
            ghost_d = (idx < 0) | (idx > n)
            bnd_d = (idx == 0) | (idx == n)
            shape = [1] * self.dim
            shape[d] = self.shape[d]
            codes = np.maximum(codes, np.where(ghost_d.reshape(shape), 2, 0))
            boundary |= bnd_d.reshape(shape)
        codes[(codes == 0) & boundary] = 1
        return codes


def build_grid(dim, extents, n_cells, ghost_width):
    """Construct a grid, normalizing scalar/single-pair arguments.

    ``extents`` may be one (a, b) pair applied to every axis, ``n_cells`` may
    be a single integer.
    """
    if np.isscalar(n_cells):
        n_cells = (int(n_cells),) * dim
    else:
        n_cells = tuple(int(n) for n in n_cells)
    extents = list(extents)
    if len(extents) == 2 and np.isscalar(extents[0]):
        extents = [tuple(extents)] * dim
    extents = tuple((float(a), float(b)) for a, b in extents)
    if len(extents) != dim or len(n_cells) != dim:
        raise ConfigError(f"extents/n_cells do not match dim={dim}")
    return StructuredGrid(extents, n_cells, int(ghost_width))


@dataclass
class GridFunction:
    """A real field over every grid point, ghost layers included."""

    grid: StructuredGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ConfigError(f"field shape {self.values.shape} does not match "
                              f"grid storage shape {self.grid.shape}")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))

    def copy(self):
        return GridFunction(self.grid, self.values.copy())


def active_slab(grid, bc=None):
    """Per-axis slices bounding the active points.

    With no boundary-condition spec every face is treated as Dirichlet and the
    slab is the strict interior.
    """
    gw = grid.ghost_width
    slices = []
    for d, n in enumerate(grid.n_cells):
        if bc is None:
            low = high = BCKind.DIRICHLET
        else:
            low, high = bc.faces[d]
        lo = gw if low == BCKind.NEUMANN else gw + 1
        hi = gw + n + 1 if high == BCKind.NEUMANN else gw + n
        slices.append(slice(lo, hi))
    return tuple(slices)


def n_active(grid, bc=None):
    return int(np.prod([s.stop - s.start for s in active_slab(grid, bc)]))


def pack_active(u, bc=None):
    """Copy the active points of ``u`` into a vector, x axis fastest."""
    return u.values[active_slab(u.grid, bc)].ravel(order="F").copy()


def scatter_active(grid, y, bc=None):
    """Place an active vector on a fresh grid function; no boundary fill.

    Boundary and ghost points are left at zero; callers that need consistent
    ghosts should use :func:`eigenwave.laplacian.unpack_active`.
    """
    slab = active_slab(grid, bc)
    shape = tuple(s.stop - s.start for s in slab)
    y = np.asarray(y, dtype=float)
    if y.shape != (int(np.prod(shape)),):
        raise ConfigError(f"active vector has length {y.shape}, expected {np.prod(shape)}")
    u = GridFunction.zeros(grid)
    u.values[slab] = y.reshape(shape, order="F")
    return u


def ip_weights(grid, bc):
    """Trapezoid weights over the active points, packed in active order.

    Active boundary points (Neumann faces) carry weight 1/2 per incident face.
    For all-Dirichlet problems this is identically one; it is the inner
    product in which the discrete operators are self-adjoint.
    """
    slab = active_slab(grid, bc)
    axes = []
    for d, s in enumerate(slab):
        w = np.ones(s.stop - s.start)
        low, high = bc.faces[d]
        if low == BCKind.NEUMANN:
            w[0] = 0.5
        if high == BCKind.NEUMANN:
            w[-1] = 0.5
        axes.append(w)
    full = np.ones(tuple(len(w) for w in axes))
    for d, w in enumerate(axes):
        view = [1] * len(axes)
        view[d] = len(w)
        full = full * w.reshape(view)
    return full.ravel(order="F")
