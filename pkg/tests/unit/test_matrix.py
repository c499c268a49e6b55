"""Tests for block-sparse storage, partitionings, adjacency and Matrix Market I/O."""

import numpy as np
import pytest
import scipy.sparse as sp

from hlu.errors import DimensionError, MatrixMarketError
from hlu.matrix import (
    AdjacencyGraph,
    BlockSparseMatrix,
    Partitioning,
    Symmetry,
    as_dense_block,
    build_adjacency,
    extract_block,
    iter_blocks,
    load_matrix_market,
    save_matrix_market,
)
from hlu.problems import GridSpec, poisson, random_dominant


def test_duplicates_are_summed():
    """Repeated coordinates add up."""
    m = BlockSparseMatrix(3, [0, 0, 2], [1, 1, 2], [1.5, 2.5, -1.0])
    assert m.nnz == 2
    assert m.to_dense()[0, 1] == 4.0
    assert m.to_dense()[2, 2] == -1.0


def test_cancelling_duplicates_are_dropped():
    """Duplicates summing to zero leave no entry."""
    m = BlockSparseMatrix(2, [0, 0, 1], [1, 1, 1], [1.0, -1.0, 2.0])
    assert m.nnz == 1


def test_storage_is_read_only():
    """Test that stored arrays cannot be written."""
    m = BlockSparseMatrix(2, [0, 1], [0, 1], [1.0, 2.0])
    with pytest.raises(ValueError):
        m.csr.data[0] = 5.0


@pytest.mark.parametrize(
    "rows, cols, values",
    [([0, 2], [0, 0], [1.0, 1.0]), ([0], [-1], [1.0]), ([0, 1], [0], [1.0, 2.0])],
)
def test_bad_coordinates(rows, cols, values):
    """Out-of-range or mismatched coordinates are rejected."""
    with pytest.raises(DimensionError):
        BlockSparseMatrix(2, rows, cols, values)


def test_non_finite_values_rejected():
    """Infinite entries are rejected."""
    with pytest.raises(ValueError):
        BlockSparseMatrix(2, [0], [0], [np.inf])


def test_from_dense_and_matvec():
    """Test dense construction and matvec."""
    dense = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])
    m = BlockSparseMatrix.from_dense(dense, Symmetry.SYMMETRIC)
    assert m.nnz == 7
    assert m.is_symmetric()
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(m.matvec(x), dense @ x)
    with pytest.raises(DimensionError):
        m.matvec(np.ones(4))


def test_entries_are_row_major():
    """Entries come out sorted by row then column."""
    m = BlockSparseMatrix(3, [2, 0, 1], [0, 2, 1], [3.0, 1.0, 2.0])
    rows, cols, values = m.entries()
    np.testing.assert_array_equal(rows, [0, 1, 2])
    np.testing.assert_array_equal(cols, [2, 1, 0])
    np.testing.assert_array_equal(values, [1.0, 2.0, 3.0])


def test_as_dense_block_checks_shape():
    """Test dense block validation."""
    block = as_dense_block([[1, 2], [3, 4]], rows=2, cols=2)
    assert block.dtype == np.float64
    assert block.flags.c_contiguous
    with pytest.raises(DimensionError):
        as_dense_block([1.0, 2.0])
    with pytest.raises(DimensionError):
        as_dense_block(np.zeros((2, 3)), rows=3)
    with pytest.raises(ValueError):
        as_dense_block([[np.nan]])


# ========== Partitionings and adjacency ==========


def test_partitioning_must_be_surjective():
    """Every cluster needs at least one index."""
    with pytest.raises(DimensionError):
        Partitioning(np.array([0, 0, 2]), 3)
    with pytest.raises(DimensionError):
        Partitioning(np.array([0, 3]), 2)


def test_partitioning_members():
    """Test cluster membership and sizes."""
    p = Partitioning(np.array([1, 0, 1, 0, 2]), 3)
    np.testing.assert_array_equal(p.members(0), [1, 3])
    np.testing.assert_array_equal(p.members(1), [0, 2])
    np.testing.assert_array_equal(p.sizes(), [2, 2, 1])
    assert p.indicator().shape == (5, 3)
    with pytest.raises(DimensionError):
        p.members(3)


def _two_block() -> tuple[BlockSparseMatrix, Partitioning]:
    # A_{1,0} has an entry, A_{0,1} does not
    dense = np.array(
        [
            [4.0, 0.0, 0.0, 0.0],
            [0.0, 4.0, 0.0, 0.0],
            [0.0, 1.0, 4.0, 0.0],
            [0.0, 0.0, 0.0, 4.0],
        ]
    )
    return BlockSparseMatrix.from_dense(dense), Partitioning(np.array([0, 0, 1, 1]), 2)


def test_adjacency_direction():
    """Adjacency follows the column-to-row direction."""
    m, p = _two_block()
    g = build_adjacency(m, p)
    assert g.edges() == {(0, 0), (1, 1), (0, 1)}
    assert (0, 1) in g.edges()
    assert (1, 0) not in g.edges()
    np.testing.assert_array_equal(g.undirected().toarray(), [[0, 1], [1, 0]])


def test_adjacency_matches_nonzero_blocks():
    """Cluster edges match the nonzero blocks."""
    m = random_dominant(60, density=0.05, seed=3)
    labels = np.random.default_rng(0).integers(0, 6, m.n)
    labels[:6] = np.arange(6)
    p = Partitioning(labels, 6)
    edges = build_adjacency(m, p).edges()
    for i in range(6):
        for j in range(6):
            block = extract_block(m, p, j, i)
            assert ((i, j) in edges) == bool(np.any(block != 0))


def test_extract_and_iter_blocks():
    """Test block extraction and iteration."""
    m, p = _two_block()
    np.testing.assert_array_equal(extract_block(m, p, 1, 0), [[0.0, 1.0], [0.0, 0.0]])
    blocks = list(iter_blocks(m, p))
    assert [(i, j) for i, j, _ in blocks] == [(0, 0), (1, 0), (1, 1)]
    rebuilt = np.zeros((4, 4))
    for i, j, block in blocks:
        rebuilt[np.ix_(p.members(i), p.members(j))] = block
    np.testing.assert_array_equal(rebuilt, m.to_dense())


def test_graph_components_and_restrict():
    """Test connected components and subgraphs."""
    m = BlockSparseMatrix.from_scipy(sp.block_diag([np.ones((2, 2)), np.ones((3, 3))]))
    g = AdjacencyGraph.of_matrix(m)
    count, labels = g.connected_components()
    assert count == 2
    assert labels[0] == labels[1] != labels[2]
    sub = g.restrict([2, 3, 4])
    assert sub.n_vertices == 3
    assert sub.connected_components()[0] == 1


# ========== Matrix Market ==========


def test_load_identity(tmp_path):
    """Load a 2x2 identity."""
    path = tmp_path / "eye.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 1.0\n")
    m = load_matrix_market(path)
    assert m.n == 2
    np.testing.assert_array_equal(m.to_dense(), np.eye(2))


def test_load_symmetric_mirrors(tmp_path):
    """Symmetric files are mirrored on load."""
    path = tmp_path / "sym.mtx"
    path.write_text(
        "%%MatrixMarket matrix coordinate real symmetric\n3 3 3\n1 1 2.0\n2 1 -1.0\n3 3 5.0\n"
    )
    m = load_matrix_market(path)
    assert m.symmetry is Symmetry.SYMMETRIC
    dense = m.to_dense()
    assert dense[0, 1] == dense[1, 0] == -1.0
    assert m.nnz == 4


def test_load_rejects_complex(tmp_path):
    """Complex files are refused."""
    path = tmp_path / "c.mtx"
    path.write_text("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1.0 0.0\n")
    with pytest.raises(MatrixMarketError):
        load_matrix_market(path)


def test_load_rejects_rectangular(tmp_path):
    """Rectangular files are refused."""
    path = tmp_path / "r.mtx"
    path.write_text("%%MatrixMarket matrix coordinate real general\n2 3 1\n1 1 1.0\n")
    with pytest.raises(MatrixMarketError):
        load_matrix_market(path)


def test_load_missing_file(tmp_path):
    """A missing file raises OSError."""
    with pytest.raises(OSError):
        load_matrix_market(tmp_path / "missing.mtx")


def test_save_empty_matrix(tmp_path):
    """An empty matrix saves and reloads."""
    path = tmp_path / "empty.mtx"
    save_matrix_market(BlockSparseMatrix(3, [], [], []), path)
    lines = [line for line in path.read_text().splitlines() if not line.startswith("%")]
    assert lines[0].split() == ["3", "3", "0"]
    assert load_matrix_market(path).nnz == 0


@pytest.mark.parametrize("symmetry", [Symmetry.GENERAL, Symmetry.SYMMETRIC])
def test_save_load_preserves_entries(tmp_path, symmetry):
    """Test saving then loading a scaled Laplacian."""
    m = poisson(GridSpec((5, 4)))
    values = m.csr.copy()
    values.data = values.data * np.pi
    original = BlockSparseMatrix.from_scipy(values, symmetry)
    path = tmp_path / "p.mtx"
    save_matrix_market(original, path)
    assert load_matrix_market(path).same_entries(original)


def test_save_general_for_nonsymmetric_hint(tmp_path):
    """A false symmetric hint is saved as general."""
    m = BlockSparseMatrix(2, [0, 0, 1], [0, 1, 1], [1.0, 2.0, 1.0], Symmetry.SYMMETRIC)
    path = tmp_path / "ns.mtx"
    save_matrix_market(m, path)
    assert "general" in path.read_text().splitlines()[0]
    assert load_matrix_market(path).same_entries(m)


@pytest.mark.parametrize("value", ["nan", "inf"])
def test_load_rejects_non_finite_entries(tmp_path, value):
    """A NaN or infinite entry in the file is a Matrix Market error."""
    path = tmp_path / "bad.mtx"
    path.write_text(f"%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 {value}\n2 2 1.0\n")
    with pytest.raises(MatrixMarketError, match="finite"):
        load_matrix_market(path)
