import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amli.mesh import (
    MeshHierarchy,
    build_hierarchy,
    cell_centers,
    cell_dofs,
    coefficient_field,
    dof_count,
    dof_grids,
    macro_topology,
    macro_topology_for,
)


@pytest.mark.parametrize("dim,n,count", [(2, 1, 4), (2, 2, 12), (2, 8, 144), (3, 1, 6), (3, 2, 36), (3, 4, 240)])
def test_dof_count(dim, n, count):
    assert dof_count(dim, n) == count
    assert sum(g.size for g in dof_grids(dim, n)) == count


def test_dof_count_rejects_dimension():
    with pytest.raises(ValueError):
        dof_count(4, 2)


def test_dof_grids_2d_layout():
    H, V = dof_grids(2, 2)
    assert H.shape == (2, 3) and V.shape == (3, 2)
    assert H[0, 0] == 0 and V[0, 0] == 6


def test_single_cell_local_order():
    np.testing.assert_array_equal(cell_dofs(2, 1), [[0, 1, 2, 3]])
    np.testing.assert_array_equal(cell_dofs(3, 1), [[0, 1, 2, 3, 4, 5]])


@pytest.mark.parametrize("dim,n", [(2, 3), (2, 4), (3, 2), (3, 3)])
def test_every_dof_shared_by_one_or_two_cells(dim, n):
    counts = np.bincount(cell_dofs(dim, n).ravel(), minlength=dof_count(dim, n))
    boundary = 2 * dim * n ** (dim - 1)
    assert set(counts) == {1, 2}
    assert np.sum(counts == 1) == boundary


def test_shared_dof_between_neighbouring_cells_2d():
    dofs = cell_dofs(2, 2)
    centers = cell_centers(2, 2)
    # cell (0,0) and its upper neighbour (0,1) share the top/bottom edge
    lo = np.flatnonzero(np.all(np.isclose(centers, [0.25, 0.25]), axis=1))[0]
    up = np.flatnonzero(np.all(np.isclose(centers, [0.25, 0.75]), axis=1))[0]
    assert dofs[lo, 1] == dofs[up, 0]
    right = np.flatnonzero(np.all(np.isclose(centers, [0.75, 0.25]), axis=1))[0]
    assert dofs[lo, 3] == dofs[right, 2]


def test_hierarchy_sizes():
    hier = MeshHierarchy(2, 4, 3)
    assert [hier.n(l) for l in range(4)] == [4, 8, 16, 32]
    assert hier.h(3) == 1 / 32
    assert hier.num_cells(1) == 64 and hier.num_dofs(0) == 40
    assert hier.finest == 3
    with pytest.raises(ValueError):
        hier.n(4)


def test_hierarchy_from_inverse_h():
    assert MeshHierarchy.from_inverse_h(2, 512).levels == 7
    assert MeshHierarchy.from_inverse_h(3, 64).levels == 5
    with pytest.raises(ValueError):
        MeshHierarchy.from_inverse_h(2, 24)


def test_build_hierarchy_validates():
    with pytest.raises(ValueError):
        build_hierarchy(2, 1, 2)
    with pytest.raises(ValueError):
        build_hierarchy(2, 4, 0)
    assert build_hierarchy(3).n0 == 2


@pytest.mark.parametrize("dim,n", [(2, 2), (2, 8), (3, 2), (3, 4)])
def test_macro_topology_partitions_fine_dofs(dim, n):
    topo = macro_topology_for(dim, n)
    all_dofs = np.concatenate([topo.interior.ravel(), topo.entities.ravel()])
    assert np.array_equal(np.sort(all_dofs), np.arange(dof_count(dim, n)))
    assert topo.n_agg == dof_count(dim, n // 2)
    assert topo.block_size == (4 if dim == 2 else 12)
    assert topo.n_interior + topo.n_diff + topo.n_agg == topo.n_dofs


def test_macro_topology_rejects_odd():
    with pytest.raises(ValueError):
        macro_topology_for(2, 3)
    with pytest.raises(ValueError):
        macro_topology(MeshHierarchy(2, 2, 1), 0)


@pytest.mark.parametrize("dim,n", [(2, 4), (3, 2)])
def test_transform_rows_are_orthogonal_and_invertible(dim, n):
    J = macro_topology_for(dim, n).transform.toarray()
    G = J @ J.T
    np.testing.assert_allclose(G, np.diag(np.diag(G)), atol=1e-15)
    assert abs(np.linalg.det(J)) > 0


@settings(max_examples=20, deadline=None)
@given(dim=st.sampled_from([2, 3]), half=st.integers(1, 3), seed=st.integers(0, 10_000))
def test_apply_matches_sparse_transform(dim, half, seed):
    topo = macro_topology_for(dim, 2 * half)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(topo.n_dofs)
    J = topo.transform
    np.testing.assert_allclose(topo.apply(x), J @ x, atol=1e-14)
    np.testing.assert_allclose(topo.apply_transpose(x), J.T @ x, atol=1e-14)


def test_aggregate_of_constant_entity_values_is_the_value():
    topo = macro_topology_for(3, 4)
    x = np.zeros(topo.n_dofs)
    x[topo.entities[5]] = 2.0
    z = topo.apply(x)
    assert z[topo.n_interior + topo.n_diff + 5] == pytest.approx(2.0)
    assert np.all(z[topo.n_interior : topo.n_interior + topo.n_diff] == 0)


def test_constant_coefficients():
    hier = MeshHierarchy(2, 4, 1)
    c = coefficient_field(hier, alpha=3.0, beta=2.0)
    assert c.is_constant and c.alpha.shape == (64,) and c.beta == 2.0 and c.level == 1


@pytest.mark.parametrize("dim,n0,pattern", [(2, 4, "checkerboard2d"), (3, 2, "jump3d")])
def test_checkerboard_alternates_by_region(dim, n0, pattern):
    hier = MeshHierarchy(dim, n0, 1)
    c = coefficient_field(hier, pattern, kappa=1e-4, alpha=1.0)
    centers = cell_centers(dim, hier.n(1))
    odd = np.sum(centers > 0.5, axis=1) % 2 == 1
    assert np.all(c.alpha[odd] == 1e-4) and np.all(c.alpha[~odd] == 1.0)
    assert odd.mean() == pytest.approx(0.5)


def test_coefficient_errors():
    with pytest.raises(ValueError):
        coefficient_field(MeshHierarchy(2, 4, 1), "checkerboard3d")
    with pytest.raises(ValueError):
        coefficient_field(MeshHierarchy(2, 3, 1), "checkerboard2d")
    with pytest.raises(ValueError):
        coefficient_field(MeshHierarchy(2, 4, 1), "stripes")
    with pytest.raises(ValueError):
        coefficient_field(MeshHierarchy(2, 4, 1), alpha=-1.0)
