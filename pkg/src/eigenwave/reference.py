"""Ground-truth spectra for validation on boxes.

Three sources of reference eigenpairs:

* the continuous spectrum of the Dirichlet box (separation of variables),
* the exact spectrum of the discrete operator on the box, available in closed
  form because sampled sine modes are exact stencil eigenvectors under the
  odd-extension boundary closure,
* a dense eigendecomposition of the assembled operator for small problems.

A :class:`ReferenceSpectrum` keeps the flat sorted eigenvalue list (repeated
per multiplicity), the clustering into (near-)degenerate groups, and an
orthonormal basis of each cluster's eigenspace as packed active vectors, which
is what the eigenvector-error metric projects onto.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .eigensolve import small_symmetric_eig
from .grid import BCKind, active_slab, ip_weights
from .laplacian import DENSE_CAP, assemble_dense, axis_symbol


@dataclass
class SpectralCluster:
    lam: float                 # representative (first) eigenvalue
    multiplicity: int
    basis: np.ndarray | None   # n_active x multiplicity, orthonormal columns
    first_index: int           # index of the first member in the flat list


@dataclass
class ReferenceSpectrum:
    """Sorted reference eigenvalues with multiplicity clustering."""

    lambdas: np.ndarray
    clusters: list
    provenance: str

    def __post_init__(self):
        self.cluster_index = np.empty(len(self.lambdas), dtype=int)
        for ci, cl in enumerate(self.clusters):
            self.cluster_index[cl.first_index:cl.first_index + cl.multiplicity] = ci

    def nearest(self, lam):
        """Index (into the flat list) of the closest reference eigenvalue."""
        if len(self.lambdas) == 0:
            raise ConfigError("reference spectrum is empty")
        k = int(np.searchsorted(self.lambdas, lam))
        candidates = [i for i in (k - 1, k) if 0 <= i < len(self.lambdas)]
        return min(candidates, key=lambda i: abs(self.lambdas[i] - lam))

    def cluster_of(self, k):
        return self.clusters[self.cluster_index[k]]

    @property
    def lambda_max(self):
        return float(self.lambdas[-1]) if len(self.lambdas) else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["lambda", "multiplicity"])
            for cl in self.clusters:
                writer.writerow([f"{cl.lam:.6f}", cl.multiplicity])


def cluster_multiplicities(lambdas, rel_tol=1e-8):
    """Greedy clustering of a sorted eigenvalue list into degenerate groups.

    Adjacent values join a cluster when their gap is at most ``rel_tol``
    relative to the larger one.  Returns a list of index lists.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    clusters = []
    current = []
    for i, lam in enumerate(lambdas):
        if current and (lam - lambdas[current[-1]]
                        > rel_tol * max(abs(lam), abs(lambdas[current[-1]]), 1e-300)):
            clusters.append(current)
            current = []
        current.append(i)
    if current:
        clusters.append(current)
    return clusters


def eigenspace_distance(v, basis):
    """Max-norm distance from ``v`` to its orthogonal projection onto the span."""
    if basis is None or basis.size == 0:
        raise ValueError("empty eigenspace basis")
    r = v - basis @ (basis.T @ v)
    return float(np.max(np.abs(r)))


def _mode_table(extents, lambda_max, c, per_axis_max=None):
    """All sine-mode index tuples with continuous lambda <= lambda_max."""
    dim = len(extents)
    lengths = [b - a for a, b in extents]
    caps = []
    for d in range(dim):
        cap = int(np.floor(lambda_max * lengths[d] / (np.pi * c))) + 1
        if per_axis_max is not None:
            cap = min(cap, per_axis_max[d])
        caps.append(max(cap, 1))
    modes = np.stack([g.ravel() for g in
                      np.meshgrid(*[np.arange(1, cap + 1) for cap in caps],
                                  indexing="ij")], axis=1)
    return modes, lengths


def analytic_continuous_box(extents, lambda_max, c=1.0, grid=None, bc=None):
    """Continuous Dirichlet-box spectrum up to ``lambda_max``.

    lambda = pi c sqrt(sum (m_d / L_d)^2) with product-of-sines
    eigenfunctions.  When a grid is supplied the eigenfunctions are sampled
    on its active points and orthonormalized per cluster; otherwise cluster
    bases are None.
    """
    modes, lengths = _mode_table(extents, lambda_max, c)
    lams = np.pi * c * np.sqrt(
        ((modes / np.asarray(lengths)) ** 2).sum(axis=1))
    keep = lams <= lambda_max
    return _build_spectrum(lams[keep], modes[keep], "analytic-continuous",
                           grid=grid, bc=bc, extents=extents)


def analytic_discrete_box(grid, order, lambda_max, c=1.0, build_basis=True):
    """Exact spectrum of the discrete Dirichlet-box operator up to lambda_max.

    lambda_h = c sqrt(sum_d s_p(m_d pi h_d / L_d) / h_d^2) with the per-axis
    stencil symbol s_p; eigenvectors are the sampled sine products, which are
    exactly orthogonal in the active-point inner product.
    """
    extents = grid.extents
    lengths = [b - a for a, b in extents]
    per_axis_max = [n - 1 for n in grid.n_cells]
    modes, _ = _mode_table(extents, lambda_max * 1.0000001, c,
                           per_axis_max=per_axis_max)
    lam2 = np.zeros(len(modes))
    for d in range(grid.dim):
        theta = modes[:, d] * np.pi * grid.h[d] / lengths[d]
        lam2 += axis_symbol(order, theta) / grid.h[d] ** 2
    lams = c * np.sqrt(lam2)
    keep = lams <= lambda_max
    return _build_spectrum(lams[keep], modes[keep], "analytic-discrete",
                           grid=grid if build_basis else None, bc=None,
                           extents=extents)


def _sample_mode(grid, extents, mode):
    """Sampled product-of-sines mode on the active (interior) slab, unit norm."""
    slab = active_slab(grid, None)
    vals = np.ones(tuple(s.stop - s.start for s in slab))
    for d in range(grid.dim):
        a, b = extents[d]
        x = grid.axis_coords(d)[slab[d]]
        s = np.sin(mode[d] * np.pi * (x - a) / (b - a))
        view = [1] * grid.dim
        view[d] = len(s)
        vals = vals * s.reshape(view)
    v = vals.ravel(order="F")
    return v / np.linalg.norm(v)


def _build_spectrum(lams, modes, provenance, grid=None, bc=None, extents=None):
    order = np.argsort(lams, kind="stable")
    lams = lams[order]
    modes = modes[order]
    clusters = []
    for members in cluster_multiplicities(lams):
        basis = None
        if grid is not None:
            cols = [_sample_mode(grid, extents, modes[i]) for i in members]
            basis = np.stack(cols, axis=1)
            # sampled sines are orthogonal already; re-orthonormalize anyway
            basis, _ = np.linalg.qr(basis)
        clusters.append(SpectralCluster(float(lams[members[0]]), len(members),
                                        basis, members[0]))
    return ReferenceSpectrum(lams, clusters, provenance)


def dense_reference(lap, cap=DENSE_CAP, cluster_rtol=1e-8):
    """Reference spectrum from a dense eigendecomposition of the operator.

    For configurations with active Neumann boundary points the assembled
    matrix is self-adjoint only in the trapezoid inner product; it is
    symmetrized by the corresponding diagonal similarity before
    diagonalization and the eigenvectors are mapped back.
    """
    a = assemble_dense(lap, cap=cap)
    if lap.bc.is_all_dirichlet():
        mu, vecs = small_symmetric_eig(a)
    else:
        w = ip_weights(lap.grid, lap.bc)
        rt = np.sqrt(w)
        mu, z = small_symmetric_eig(a * (rt[:, None] / rt[None, :]))
        vecs = z / rt[:, None]
    scale = float(np.max(np.abs(mu))) if len(mu) else 1.0
    if np.any(mu > 1e-10 * max(scale, 1.0)):
        raise NumericalError(
            f"assembled operator has a positive eigenvalue ({mu.max():.3e}); "
            f"the discretization is not negative semi-definite")
    lams = np.sqrt(np.maximum(-mu, 0.0))[::-1]      # ascending in lambda
    vecs = vecs[:, ::-1]
    clusters = []
    for members in cluster_multiplicities(lams, rel_tol=cluster_rtol):
        basis = vecs[:, members]
        basis, _ = np.linalg.qr(basis)
        clusters.append(SpectralCluster(float(lams[members[0]]), len(members),
                                        basis, members[0]))
    return ReferenceSpectrum(np.asarray(lams), clusters, "dense")
