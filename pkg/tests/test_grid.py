import numpy as np
import pytest

import eigenwave as ew
from eigenwave.errors import ConfigError


def test_1d_interval_active_points():
    g = ew.build_grid(1, (0, 1), 10, 1)
    assert ew.n_active(g) == 9
    bc = ew.BoundaryConditionSpec.dirichlet(1)
    slab = ew.active_slab(g, bc)
    x = g.axis_coords(0)[slab[0]]
    assert np.allclose(x, np.arange(1, 10) * 0.1)


def test_2d_square128_active_count():
    g = ew.build_grid(2, (0, 1), 128, 1)
    assert ew.n_active(g) == 127 ** 2 == 16129


def test_3d_box_active_count_with_two_ghost_layers():
    g = ew.build_grid(3, (0, 1), 20, 2)
    assert ew.n_active(g) == 19 ** 3 == 6859
    assert g.shape == (25, 25, 25)


def test_endpoint_reproduced_exactly():
    g = ew.build_grid(1, (0.25, 1.75), 12, 1)
    x = g.axis_coords(0)
    gw = g.ghost_width
    assert x[gw] == 0.25
    assert abs(x[gw + 12] - 1.75) <= 4 * np.finfo(float).eps * 1.75


def test_classification_partitions_all_points():
    for dim, n in [(1, 8), (2, 6), (3, 4)]:
        g = ew.build_grid(dim, (0, 1), n, 2)
        codes = g.classify()
        interior = int(np.count_nonzero(codes == 0))
        boundary = int(np.count_nonzero(codes == 1))
        ghost = int(np.count_nonzero(codes == 2))
        assert interior + boundary + ghost == g.total_points
        assert interior == (n - 1) ** dim
        assert boundary == (n + 1) ** dim - (n - 1) ** dim


def test_pack_constant_field():
    g = ew.build_grid(1, (0, 1), 4, 1)
    u = ew.GridFunction(g, np.ones(g.shape))
    assert np.array_equal(ew.pack_active(u), np.ones(3))


def test_pack_unpack_roundtrip_bit_exact():
    rng = np.random.default_rng(42)
    for dim in (1, 2, 3):
        g = ew.build_grid(dim, (0, 2), 6, 1)
        for bc in (ew.BoundaryConditionSpec.dirichlet(dim),
                   ew.BoundaryConditionSpec.neumann(dim)):
            y = rng.standard_normal(ew.n_active(g, bc))
            u = ew.unpack_active(g, y, bc)
            assert np.array_equal(ew.pack_active(u, bc), y)


def test_active_ordering_x_fastest():
    g = ew.build_grid(2, (0, 1), 4, 1)
    u = ew.GridFunction.zeros(g)
    # tag each interior point with 10*j + i (i, j interior indices from 1)
    gw = g.ghost_width
    for j in range(1, 4):
        for i in range(1, 4):
            u.values[gw + i, gw + j] = 10 * j + i
    packed = ew.pack_active(u)
    assert np.array_equal(packed, [11, 12, 13, 21, 22, 23, 31, 32, 33])


def test_unpack_dirichlet_odd_extension():
    g = ew.build_grid(1, (0, 1), 4, 1)
    bc = ew.BoundaryConditionSpec.dirichlet(1)
    u = ew.unpack_active(g, np.array([1.0, 2.0, 3.0]), bc)
    assert np.array_equal(u.values, [-1.0, 0.0, 1.0, 2.0, 3.0, 0.0, -3.0])


def test_unpack_neumann_even_extension():
    g = ew.build_grid(1, (0, 1), 4, 1)
    bc = ew.BoundaryConditionSpec.neumann(1)
    u = ew.unpack_active(g, np.array([1.0, 2.0, 3.0, 4.0, 5.0]), bc)
    assert np.array_equal(u.values, [2.0, 1.0, 2.0, 3.0, 4.0, 5.0, 4.0])


def test_unpack_length_mismatch_rejected():
    g = ew.build_grid(1, (0, 1), 4, 1)
    bc = ew.BoundaryConditionSpec.dirichlet(1)
    with pytest.raises(ConfigError):
        ew.unpack_active(g, np.ones(5), bc)


def test_degenerate_and_undersized_grids_rejected():
    with pytest.raises(ConfigError):
        ew.build_grid(1, (1, 1), 8, 1)
    with pytest.raises(ConfigError):
        ew.build_grid(1, (0, 1), 3, 1)
    with pytest.raises(ConfigError):
        ew.build_grid(1, (0, 1), 8, 3)


def test_packing_deterministic_across_builds():
    y = np.linspace(-1, 1, 25)
    outs = []
    for _ in range(2):
        g = ew.build_grid(2, (0, 1), 6, 1)
        bc = ew.BoundaryConditionSpec.dirichlet(2)
        u = ew.unpack_active(g, y, bc)
        outs.append(ew.pack_active(ew.GridFunction(g, u.values * 2.0), bc))
    assert np.array_equal(outs[0], outs[1])


def test_ip_weights_neumann_faces():
    g = ew.build_grid(1, (0, 1), 4, 1)
    w = ew.ip_weights(g, ew.BoundaryConditionSpec.neumann(1))
    assert np.array_equal(w, [0.5, 1, 1, 1, 0.5])
    wd = ew.ip_weights(g, ew.BoundaryConditionSpec.dirichlet(1))
    assert np.array_equal(wd, np.ones(3))
