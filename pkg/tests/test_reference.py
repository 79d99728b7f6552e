import numpy as np
import pytest

import eigenwave as ew
from eigenwave.laplacian import axis_symbol
from eigenwave.reference import (analytic_continuous_box, analytic_discrete_box,
                                 cluster_multiplicities, dense_reference,
                                 eigenspace_distance)


def test_continuous_unit_square_lowest_modes():
    ref = analytic_continuous_box(((0, 1), (0, 1)), lambda_max=12.0)
    assert ref.lambdas[0] == pytest.approx(np.pi * np.sqrt(2.0), rel=1e-14)
    # (1,2)/(2,1) share pi sqrt(5) with multiplicity two
    cl = ref.cluster_of(ref.nearest(np.pi * np.sqrt(5.0)))
    assert cl.multiplicity == 2
    assert cl.lam == pytest.approx(np.pi * np.sqrt(5.0), rel=1e-14)


def test_continuous_unit_interval():
    ref = analytic_continuous_box(((0, 1),), lambda_max=20.0)
    expect = np.pi * np.arange(1, 7)
    assert np.allclose(ref.lambdas[:6], expect, rtol=1e-14)


def test_discrete_square128_value_from_symbol():
    g = ew.build_grid(2, (0, 1), 128, 1)
    ref = analytic_discrete_box(g, 2, 10.0)
    cl = ref.cluster_of(ref.nearest(7.02))
    assert f"{cl.lam:.6f}" == "7.024215"
    assert cl.multiplicity == 2


def test_discrete_order4_closer_to_continuous():
    g2 = ew.build_grid(2, (0, 1), 16, 1)
    g4 = ew.build_grid(2, (0, 1), 16, 2)
    lam = np.pi * np.sqrt(5.0)
    r2 = analytic_discrete_box(g2, 2, 10.0, build_basis=False)
    r4 = analytic_discrete_box(g4, 4, 10.0, build_basis=False)
    e2 = abs(r2.lambdas[r2.nearest(lam)] - lam)
    e4 = abs(r4.lambdas[r4.nearest(lam)] - lam)
    assert e4 < e2 / 10


def test_discrete_eigenvectors_satisfy_eigenrelation():
    for order, gw in [(2, 1), (4, 2)]:
        g = ew.build_grid(2, (0, 1), 12, gw)
        bc = ew.BoundaryConditionSpec.dirichlet(2)
        lap = ew.DiscreteLaplacian(g, order, bc)
        ref = analytic_discrete_box(g, order, 25.0)
        checked = 0
        for cl in ref.clusters:
            for i in range(cl.multiplicity):
                phi = cl.basis[:, i]
                r = lap.apply_packed(phi) + cl.lam ** 2 * phi
                assert np.max(np.abs(r)) <= 1e-10 * cl.lam ** 2
                checked += 1
        assert checked >= 20


def test_dense_agrees_with_analytic_on_16_square():
    g = ew.build_grid(2, (0, 1), 16, 1)
    bc = ew.BoundaryConditionSpec.dirichlet(2)
    lap = ew.DiscreteLaplacian(g, 2, bc)
    dref = dense_reference(lap)
    aref = analytic_discrete_box(g, 2, dref.lambda_max * 1.01)
    assert len(dref.lambdas) == len(aref.lambdas) == 15 ** 2
    assert np.max(np.abs(dref.lambdas - aref.lambdas) / aref.lambdas) <= 1e-11
    # same multiplicity structure
    assert [c.multiplicity for c in dref.clusters] == \
        [c.multiplicity for c in aref.clusters]


def test_dense_1d_tridiagonal_spectrum():
    g = ew.build_grid(1, (0, 1), 8, 1)
    bc = ew.BoundaryConditionSpec.dirichlet(1)
    ref = dense_reference(ew.DiscreteLaplacian(g, 2, bc))
    h = g.h[0]
    expect = np.sort((2.0 / h) * np.sin(np.arange(1, 8) * np.pi * h / 2))
    assert np.allclose(ref.lambdas, expect, rtol=1e-12)


def test_dense_neumann_includes_zero_mode():
    g = ew.build_grid(1, (0, 1), 8, 1)
    bc = ew.BoundaryConditionSpec.neumann(1)
    ref = dense_reference(ew.DiscreteLaplacian(g, 2, bc))
    assert ref.lambdas[0] == pytest.approx(0.0, abs=1e-7)
    h = g.h[0]
    expect = (2.0 / h) * np.sin(np.arange(0, 9) * np.pi * h / 2)
    assert np.allclose(ref.lambdas, np.sort(expect), atol=1e-7)


def test_cluster_multiplicities_basic():
    groups = cluster_multiplicities([1.0, 1.0 + 1e-12, 2.0])
    assert [len(g) for g in groups] == [2, 1]


def test_cluster_near_degenerate_split():
    # a pair separated by more than the tolerance is reported as singletons
    groups = cluster_multiplicities([1.0, 1.0 + 1e-5, 2.0], rel_tol=1e-8)
    assert [len(g) for g in groups] == [1, 1, 1]


def test_square_degeneracy_pattern():
    g = ew.build_grid(2, (0, 1), 16, 1)
    ref = analytic_discrete_box(g, 2, 15.0, build_basis=False)
    for cl in ref.clusters:
        assert cl.multiplicity in (1, 2)


def test_eigenspace_distance_properties():
    rng = np.random.default_rng(6)
    w, _ = np.linalg.qr(rng.standard_normal((40, 3)))
    inside = w @ rng.standard_normal(3)
    assert eigenspace_distance(inside, w) <= 1e-12
    outside = rng.standard_normal(40)
    outside -= w @ (w.T @ outside)
    assert eigenspace_distance(outside, w) == pytest.approx(
        np.max(np.abs(outside)), rel=1e-12)
    # invariant under orthogonal mixing of the basis
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    v = rng.standard_normal(40)
    assert eigenspace_distance(v, w @ q) == pytest.approx(
        eigenspace_distance(v, w), rel=1e-10)
    with pytest.raises(ValueError):
        eigenspace_distance(v, np.zeros((40, 0)))


def test_reference_csv_export(tmp_path):
    g = ew.build_grid(2, (0, 1), 8, 1)
    ref = analytic_discrete_box(g, 2, 12.0)
    path = tmp_path / "reference.csv"
    ref.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "lambda,multiplicity"
    assert len(lines) == len(ref.clusters) + 1
