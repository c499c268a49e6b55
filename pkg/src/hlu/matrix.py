"""
Block-sparse matrix storage, partitioned views and the adjacency graph.

Matrices are ingested as coordinate lists (duplicates summed) and kept as a
canonical CSR matrix. A :class:`Partitioning` groups indices into clusters;
:func:`build_adjacency` gives the cluster-level directed graph and
:func:`extract_block` the dense sub-blocks ``A_{i,j}``.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterator, TypeAlias

import numpy as np
import numpy.typing as npt
import scipy.io
import scipy.sparse as sp

from .errors import DimensionError, MatrixMarketError

logger = logging.getLogger(__name__)

DenseBlock: TypeAlias = npt.NDArray[np.float64]


def as_dense_block(
    data: npt.ArrayLike, rows: int | None = None, cols: int | None = None
) -> DenseBlock:
    """Validate and normalize a dense edge payload.

    Args:
        data: Anything convertible to a 2D float array
        rows: Expected row count (unchecked when None)
        cols: Expected column count (unchecked when None)

    Returns:
        C-contiguous float64 array

    Raises:
        DimensionError: Wrong rank or shape
        ValueError: Non-finite entries
    """
    block = np.ascontiguousarray(data, dtype=np.float64)
    if block.ndim != 2:
        raise DimensionError(f"dense block must be 2D, got {block.ndim}D")
    if rows is not None and block.shape[0] != rows:
        raise DimensionError(f"expected {rows} rows, got {block.shape[0]}")
    if cols is not None and block.shape[1] != cols:
        raise DimensionError(f"expected {cols} columns, got {block.shape[1]}")
    if not np.all(np.isfinite(block)):
        raise ValueError("dense block has non-finite entries")
    return block


class Symmetry(str, Enum):
    """Symmetry hint carried with a matrix (Matrix Market vocabulary)."""

    GENERAL = "general"
    SYMMETRIC = "symmetric"


class BlockSparseMatrix:
    """Square sparse matrix in canonical CSR form.

    Duplicate coordinates are summed and exact zeros dropped on construction.
    Instances are immutable.
    """

    def __init__(
        self,
        n: int,
        rows: npt.ArrayLike,
        cols: npt.ArrayLike,
        values: npt.ArrayLike,
        symmetry: Symmetry = Symmetry.GENERAL,
    ) -> None:
        """Build from a coordinate list.

        Args:
            n: Matrix dimension
            rows: Row indices in [0, n)
            cols: Column indices in [0, n)
            values: Real finite values
            symmetry: Symmetry hint

        Raises:
            DimensionError: Mismatched lengths or indices out of range
            ValueError: Non-finite values
        """
        if n < 0:
            raise DimensionError(f"matrix size must be non-negative, got {n}")
        r = np.asarray(rows, dtype=np.int64).ravel()
        c = np.asarray(cols, dtype=np.int64).ravel()
        v = np.asarray(values, dtype=np.float64).ravel()
        if not (r.size == c.size == v.size):
            raise DimensionError(
                f"coordinate arrays differ in length: {r.size}, {c.size}, {v.size}"
            )
        if r.size and (r.min() < 0 or r.max() >= n or c.min() < 0 or c.max() >= n):
            raise DimensionError(f"coordinate outside [0, {n})")
        if not np.all(np.isfinite(v)):
            raise ValueError("matrix entries must be finite")

        csr = sp.csr_matrix((v, (r, c)), shape=(n, n), dtype=np.float64)
        csr.sum_duplicates()
        csr.eliminate_zeros()
        csr.sort_indices()
        for array in (csr.data, csr.indices, csr.indptr):
            array.flags.writeable = False

        self._csr = csr
        self.n = n
        self.symmetry = Symmetry(symmetry)

    @classmethod
    def from_scipy(
        cls, matrix: sp.spmatrix | sp.sparray, symmetry: Symmetry = Symmetry.GENERAL
    ) -> "BlockSparseMatrix":
        """Wrap any square scipy sparse matrix."""
        coo = sp.coo_matrix(matrix)
        if coo.shape[0] != coo.shape[1]:
            raise DimensionError(f"matrix must be square, got {coo.shape}")
        return cls(coo.shape[0], coo.row, coo.col, coo.data, symmetry)

    @classmethod
    def from_dense(
        cls, dense: npt.ArrayLike, symmetry: Symmetry = Symmetry.GENERAL
    ) -> "BlockSparseMatrix":
        """Wrap a dense square array (zeros are dropped)."""
        array = np.asarray(dense, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise DimensionError(f"matrix must be square, got {array.shape}")
        return cls.from_scipy(sp.coo_matrix(array), symmetry)

    @property
    def csr(self) -> sp.csr_matrix:
        """Read-only canonical CSR storage."""
        return self._csr

    @property
    def nnz(self) -> int:
        return int(self._csr.nnz)

    def entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coordinate list in row-major order.

        Returns:
            (rows, cols, values) arrays
        """
        coo = self._csr.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy()

    def to_dense(self) -> DenseBlock:
        return np.asarray(self._csr.toarray(), dtype=np.float64)

    def matvec(self, x: npt.ArrayLike) -> np.ndarray:
        """Sparse matrix-vector product."""
        vector = np.asarray(x, dtype=np.float64)
        if vector.shape != (self.n,):
            raise DimensionError(f"expected vector of length {self.n}, got {vector.shape}")
        return np.asarray(self._csr @ vector)

    def is_symmetric(self) -> bool:
        """Exact structural and numerical symmetry."""
        return (self._csr != self._csr.T).nnz == 0

    def same_entries(self, other: "BlockSparseMatrix") -> bool:
        """Bitwise equality of the canonical entry sets."""
        if self.n != other.n or self.nnz != other.nnz:
            return False
        a, b = self._csr, other.csr
        return (
            np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data)
        )

    def __repr__(self) -> str:
        return f"BlockSparseMatrix(n={self.n}, nnz={self.nnz}, symmetry={self.symmetry.value})"


@dataclass(frozen=True)
class Partitioning:
    """Surjective map from indices onto clusters ``0 .. n_clusters-1``."""

    cluster_of: np.ndarray
    n_clusters: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.cluster_of, dtype=np.int64)
        if labels.ndim != 1:
            raise DimensionError("cluster_of must be one-dimensional")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_clusters):
            raise DimensionError(f"cluster id outside [0, {self.n_clusters})")
        counts = np.bincount(labels, minlength=self.n_clusters)
        if np.any(counts == 0):
            empty = np.flatnonzero(counts == 0)[:5].tolist()
            raise DimensionError(f"partitioning is not surjective, empty clusters {empty}")
        labels.flags.writeable = False
        object.__setattr__(self, "cluster_of", labels)

    @property
    def n(self) -> int:
        return int(self.cluster_of.size)

    @cached_property
    def _members(self) -> list[np.ndarray]:
        order = np.argsort(self.cluster_of, kind="stable")
        bounds = np.cumsum(np.bincount(self.cluster_of, minlength=self.n_clusters))
        return np.split(order, bounds[:-1])

    def members(self, cluster: int) -> np.ndarray:
        """Indices of a cluster in ascending order."""
        if not 0 <= cluster < self.n_clusters:
            raise DimensionError(f"cluster {cluster} outside [0, {self.n_clusters})")
        return self._members[cluster]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.cluster_of, minlength=self.n_clusters)

    def indicator(self) -> sp.csr_matrix:
        """n-by-n_clusters 0/1 membership matrix."""
        ones = np.ones(self.n, dtype=np.float64)
        return sp.csr_matrix(
            (ones, (np.arange(self.n), self.cluster_of)), shape=(self.n, self.n_clusters)
        )


@dataclass(frozen=True)
class AdjacencyGraph:
    """Directed graph with one vertex per cluster.

    ``matrix[i, j]`` is set iff there is an edge ``i -> j``, i.e. the block
    ``A_{j,i}`` has a nonzero entry.
    """

    matrix: sp.csr_matrix

    @property
    def n_vertices(self) -> int:
        return int(self.matrix.shape[0])

    def edges(self) -> set[tuple[int, int]]:
        coo = self.matrix.tocoo()
        return {(int(i), int(j)) for i, j in zip(coo.row, coo.col)}

    def undirected(self) -> sp.csr_matrix:
        """Symmetric 0/1 pattern without self loops."""
        pattern = (self.matrix + self.matrix.T).astype(bool).astype(np.int8).tocsr()
        pattern.setdiag(0)
        pattern.eliminate_zeros()
        pattern.sort_indices()
        return pattern

    def restrict(self, members: npt.ArrayLike) -> "AdjacencyGraph":
        """Induced subgraph; vertex ``k`` of the result is ``members[k]``."""
        idx = np.asarray(members, dtype=np.int64)
        return AdjacencyGraph(self.matrix[idx][:, idx].tocsr())

    @classmethod
    def of_matrix(cls, m: BlockSparseMatrix) -> "AdjacencyGraph":
        """Graph with one vertex per index (the trivial partitioning)."""
        return cls((m.csr.T != 0).tocsr())

    def connected_components(self) -> tuple[int, np.ndarray]:
        from scipy.sparse.csgraph import connected_components

        count, labels = connected_components(self.undirected(), directed=False)
        return int(count), labels


def build_adjacency(m: BlockSparseMatrix, p: Partitioning) -> AdjacencyGraph:
    """Cluster-level adjacency graph of a matrix.

    Args:
        m: Matrix
        p: Partitioning covering [0, n)

    Returns:
        Graph with edge ``i -> j`` iff ``A_{j,i}`` has a nonzero entry,
        self edges included.
    """
    if p.n != m.n:
        raise DimensionError(f"partitioning covers {p.n} indices, matrix has {m.n}")
    pattern = m.csr.copy()
    pattern.data = np.ones_like(pattern.data)
    ind = p.indicator()
    blocks = (ind.T @ pattern @ ind).tocsr()  # blocks[J, I] counts nonzeros of A_{J,I}
    edges = (blocks.T > 0).tocsr()
    edges.sort_indices()
    return AdjacencyGraph(edges)


def extract_block(m: BlockSparseMatrix, p: Partitioning, i: int, j: int) -> DenseBlock:
    """Dense block ``A_{i,j}`` with rows of cluster i and columns of cluster j."""
    if p.n != m.n:
        raise DimensionError(f"partitioning covers {p.n} indices, matrix has {m.n}")
    rows = p.members(i)
    cols = p.members(j)
    return np.ascontiguousarray(m.csr[rows][:, cols].toarray(), dtype=np.float64)


def iter_blocks(
    m: BlockSparseMatrix, p: Partitioning
) -> Iterator[tuple[int, int, DenseBlock]]:
    """Yield every nonzero block ``(i, j, A_{i,j})`` in row-major cluster order."""
    graph = build_adjacency(m, p)
    pairs = sorted((target, source) for source, target in graph.edges())
    for i, j in pairs:
        yield i, j, extract_block(m, p, i, j)


# ========== Matrix Market ==========

_SUPPORTED_FIELDS = ("real", "integer")
_SUPPORTED_SYMMETRY = ("general", "symmetric")


def load_matrix_market(path: str | Path) -> BlockSparseMatrix:
    """Read a coordinate Matrix Market file.

    Symmetric files are mirrored on read; indices become 0-based.

    Args:
        path: File path

    Returns:
        Loaded matrix

    Raises:
        MatrixMarketError: Malformed header/entries or unsupported field
        OSError: File cannot be read
    """
    source = str(path)
    try:
        rows, cols, _, fmt, field, symmetry = scipy.io.mminfo(source)
    except (ValueError, IndexError, TypeError) as e:
        raise MatrixMarketError(f"{source}: malformed header: {e}") from e

    if fmt != "coordinate":
        raise MatrixMarketError(f"{source}: only coordinate format is supported, got {fmt}")
    if field not in _SUPPORTED_FIELDS:
        raise MatrixMarketError(f"{source}: unsupported field type {field!r}")
    if symmetry not in _SUPPORTED_SYMMETRY:
        raise MatrixMarketError(f"{source}: unsupported symmetry {symmetry!r}")
    if rows != cols:
        raise MatrixMarketError(f"{source}: matrix must be square, got {rows}x{cols}")

    try:
        raw = scipy.io.mmread(source)
    except (ValueError, IndexError, TypeError) as e:
        raise MatrixMarketError(f"{source}: malformed entries: {e}") from e

    coo = sp.coo_matrix(raw)
    logger.debug(f"Loaded {source}: n={rows}, stored entries={coo.nnz}, {symmetry}")
    try:
        return BlockSparseMatrix(int(rows), coo.row, coo.col, coo.data, Symmetry(symmetry))
    except ValueError as e:
        raise MatrixMarketError(f"{source}: {e}") from e


def save_matrix_market(m: BlockSparseMatrix, path: str | Path) -> None:
    """Write a matrix as coordinate Matrix Market (real field).

    The symmetric layout is used only when the hint says symmetric and the
    entries really are symmetric.
    """
    symmetry = "general"
    if m.symmetry is Symmetry.SYMMETRIC and m.is_symmetric():
        symmetry = "symmetric"
    with open(path, "wb") as fh:
        scipy.io.mmwrite(
            fh, m.csr.tocoo(), field="real", precision=17, symmetry=symmetry
        )
    logger.debug(f"Saved n={m.n}, nnz={m.nnz} to {path}")
