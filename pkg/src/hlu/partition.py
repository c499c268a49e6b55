"""
Nested partitionings by recursive graph bisection.

Each bisection grows half of the cluster breadth-first from a
pseudo-peripheral vertex and then runs one Fiduccia-Mattheyses pass over
positive-gain moves under a balance constraint.
"""

import heapq
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components, shortest_path

from .core import BISECTION_BALANCE
from .errors import ConfigError, DimensionError
from .matrix import AdjacencyGraph, BlockSparseMatrix, Partitioning

logger = logging.getLogger(__name__)

PARTITIONERS = ("bisection", "contiguous")


def choose_depth(n: int, target_leaf: int) -> int:
    """Tree depth giving leaf clusters of about ``target_leaf`` indices."""
    if n < 1 or target_leaf < 1:
        raise ConfigError(f"n and target_leaf must be positive, got {n}, {target_leaf}")
    return max(1, round(math.log2(n / target_leaf)))


# ========== Bisection ==========


def _pseudo_peripheral(adj: sp.csr_matrix, start: int) -> int:
    """Walk to a vertex of (locally) maximal eccentricity."""
    current, eccentricity = start, -1
    while True:
        dist = shortest_path(adj, unweighted=True, directed=False, indices=current)
        dist[~np.isfinite(dist)] = -1
        far = int(np.argmax(dist))
        if dist[far] <= eccentricity:
            return current
        eccentricity = int(dist[far])
        current = far


def _bfs_order(adj: sp.csr_matrix, root: int) -> np.ndarray:
    """Breadth-first order from root, continuing into other components."""
    k = adj.shape[0]
    seen = np.zeros(k, dtype=bool)
    pieces = []
    next_root = root
    while True:
        order = breadth_first_order(adj, next_root, directed=False, return_predecessors=False)
        pieces.append(order)
        seen[order] = True
        rest = np.flatnonzero(~seen)
        if rest.size == 0:
            return np.concatenate(pieces)
        next_root = int(rest[0])


def _refine(adj: sp.csr_matrix, in_left: np.ndarray, slack: int, min_part: int) -> int:
    """One FM pass of positive-gain moves. Returns the number of moves."""
    k = in_left.size
    degree = np.diff(adj.indptr)
    left_neighbors = np.asarray(adj @ in_left.astype(np.int64)).ravel()
    external = np.where(in_left, degree - left_neighbors, left_neighbors)
    gain = 2 * external - degree

    heap = [(-int(g), int(v)) for v, g in enumerate(gain) if g > 0]
    heapq.heapify(heap)
    locked = np.zeros(k, dtype=bool)
    n_left = int(in_left.sum())
    deferred: list[tuple[int, int]] = []
    moves = 0

    while heap:
        neg, v = heapq.heappop(heap)
        if locked[v] or -neg != gain[v] or gain[v] <= 0:
            continue
        after = n_left - 1 if in_left[v] else n_left + 1
        if abs(2 * after - k) > slack or min(after, k - after) < min_part:
            deferred.append((neg, v))
            continue

        in_left[v] = not in_left[v]
        n_left = after
        locked[v] = True
        moves += 1
        for u in adj.indices[adj.indptr[v] : adj.indptr[v + 1]]:
            if locked[u]:
                continue
            # v changed side: u's edge to v flips between internal and external
            gain[u] += 2 if in_left[u] != in_left[v] else -2
            if gain[u] > 0:
                heapq.heappush(heap, (-int(gain[u]), int(u)))
        for item in deferred:
            heapq.heappush(heap, item)
        deferred.clear()
    return moves


def bisect(
    g: AdjacencyGraph,
    *,
    seed: int = 0,
    min_part: int = 1,
    balance: float = BISECTION_BALANCE,
) -> tuple[np.ndarray, np.ndarray]:
    """Split the vertices of a graph into two balanced parts.

    Args:
        g: Graph restricted to the cluster (vertex k is the k-th smallest member)
        seed: Seed for the starting vertex
        min_part: Smallest admissible part size
        balance: Allowed size difference as a fraction of the vertex count

    Returns:
        (left, right) sorted local vertex indices; left holds vertex 0
    """
    k = g.n_vertices
    if k == 0:
        raise DimensionError("cannot bisect an empty cluster")
    if k == 1:
        return np.array([0]), np.array([], dtype=np.int64)

    adj = g.undirected()
    rng = np.random.default_rng(seed)
    root = _pseudo_peripheral(adj, int(rng.integers(k)))
    order = _bfs_order(adj, root)

    in_left = np.zeros(k, dtype=bool)
    in_left[order[: (k + 1) // 2]] = True
    slack = max(1, int(balance * k))
    _refine(adj, in_left, slack, max(1, min_part))

    left, right = np.flatnonzero(in_left), np.flatnonzero(~in_left)
    if not in_left[0]:
        left, right = right, left
    return left, right


def cut_size(g: AdjacencyGraph, left: np.ndarray) -> int:
    """Number of undirected edges crossing the split."""
    adj = g.undirected()
    side = np.zeros(g.n_vertices, dtype=bool)
    side[left] = True
    coo = adj.tocoo()
    return int(np.count_nonzero(side[coo.row] != side[coo.col]) // 2)


# ========== Nested partitioning ==========


@dataclass
class NestedPartitioning:
    """Partitionings ``P_0 .. P_l``; cluster j at level i has children 2j, 2j+1."""

    levels: list[Partitioning]
    requested_depth: int
    method: str = "bisection"
    seed: int = 0
    disconnected_leaves: list[int] = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def clamped(self) -> bool:
        return self.depth != self.requested_depth

    @property
    def leaves(self) -> Partitioning:
        return self.levels[-1]

    @property
    def n(self) -> int:
        return self.levels[0].n

    @staticmethod
    def parent_of(j: int) -> int:
        return j // 2

    @staticmethod
    def children_of(j: int) -> tuple[int, int]:
        return 2 * j, 2 * j + 1

    def is_nested(self) -> bool:
        """Every cluster is the disjoint union of its two children."""
        for i in range(self.depth):
            parent = self.levels[i].cluster_of
            child = self.levels[i + 1].cluster_of
            if not np.array_equal(child // 2, parent):
                return False
        return all(p.n_clusters == 2**i for i, p in enumerate(self.levels))

    def to_json(self) -> str:
        """Level-wise cluster assignments."""
        payload = {
            "n": self.n,
            "depth": self.depth,
            "requested_depth": self.requested_depth,
            "method": self.method,
            "seed": self.seed,
            "levels": [p.cluster_of.tolist() for p in self.levels],
        }
        return json.dumps(payload)


def _max_depth(n: int) -> int:
    return int(math.floor(math.log2(n)))


def _clamp_depth(n: int, depth: int) -> int:
    if n < 2:
        raise ConfigError(f"need at least 2 unknowns to build a tree, got {n}")
    if depth < 1:
        raise ConfigError(f"depth must be at least 1, got {depth}")
    limit = _max_depth(n)
    if depth > limit:
        logger.warning(f"Depth {depth} needs {2**depth} clusters but n={n}; clamping to {limit}")
        return limit
    return depth


def _disconnected_leaves(graph: AdjacencyGraph, leaves: Partitioning) -> list[int]:
    bad = []
    for c in range(leaves.n_clusters):
        members = leaves.members(c)
        if members.size < 2:
            continue
        count, _ = graph.restrict(members).connected_components()
        if count > 1:
            bad.append(c)
    return bad


def build_nested_partitioning(
    m: BlockSparseMatrix, depth: int, seed: int = 0
) -> NestedPartitioning:
    """Recursive bisection of the matrix graph down to ``2**depth`` clusters.

    Args:
        m: Matrix whose index graph is partitioned
        depth: Requested depth (clamped with a warning when ``2**depth > n``)
        seed: Seed for all bisections

    Returns:
        Nested partitioning
    """
    actual = _clamp_depth(m.n, depth)
    graph = AdjacencyGraph.of_matrix(m)
    rng = np.random.default_rng(seed)

    levels = [Partitioning(np.zeros(m.n, dtype=np.int64), 1)]
    for k in range(actual):
        labels = np.empty(m.n, dtype=np.int64)
        min_part = 2 ** (actual - k - 1)
        for j in range(2**k):
            members = levels[k].members(j)
            left, right = bisect(
                graph.restrict(members), seed=int(rng.integers(2**31)), min_part=min_part
            )
            labels[members[left]] = 2 * j
            labels[members[right]] = 2 * j + 1
        levels.append(Partitioning(labels, 2 ** (k + 1)))

    nested = NestedPartitioning(levels, depth, "bisection", seed)
    nested.disconnected_leaves = _disconnected_leaves(graph, nested.leaves)
    if nested.disconnected_leaves:
        logger.warning(
            f"{len(nested.disconnected_leaves)} of {nested.leaves.n_clusters} leaf clusters "
            f"induce disconnected subgraphs"
        )
    logger.debug(f"Bisection partitioning: n={m.n}, depth={actual}")
    return nested


def contiguous_partitioning(n: int, depth: int) -> NestedPartitioning:
    """Split index ranges in halves (left half takes the extra index)."""
    actual = _clamp_depth(n, depth)
    bounds = [(0, n)]
    levels = [Partitioning(np.zeros(n, dtype=np.int64), 1)]
    for k in range(actual):
        labels = np.empty(n, dtype=np.int64)
        split = []
        for j, (lo, hi) in enumerate(bounds):
            mid = lo + (hi - lo + 1) // 2
            labels[lo:mid] = 2 * j
            labels[mid:hi] = 2 * j + 1
            split += [(lo, mid), (mid, hi)]
        bounds = split
        levels.append(Partitioning(labels, 2 ** (k + 1)))
    return NestedPartitioning(levels, depth, "contiguous", 0)


def make_partitioning(
    m: BlockSparseMatrix, depth: int, seed: int = 0, method: str = "bisection"
) -> NestedPartitioning:
    """Dispatch on the partitioner name."""
    if method == "bisection":
        return build_nested_partitioning(m, depth, seed)
    if method == "contiguous":
        return contiguous_partitioning(m.n, depth)
    raise ConfigError(f"unknown partitioner {method!r}, expected one of {PARTITIONERS}")
