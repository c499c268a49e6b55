"""
The hierarchical tree (H-tree).

Red nodes hold the variables of a cluster (leaf reds the original unknowns,
non-leaf reds auxiliary ones), super nodes merge two red siblings and black
nodes carry the auxiliary equations introduced by compression. Interaction
edges follow the block convention ``Mat(u -> v) = A_{v,u}``: the block has
shape ``(size(v), size(u))`` and multiplies ``Var(u)`` inside the equation
of ``v``.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Iterator

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .errors import DimensionError
from .kernels import PivotLU
from .matrix import BlockSparseMatrix, build_adjacency, extract_block
from .partition import NestedPartitioning

logger = logging.getLogger(__name__)

# Reported by node_distance for clusters in different components
UNREACHABLE = 2**31 - 1


class NodeKind(str, Enum):
    RED = "red"
    BLACK = "black"
    SUPER = "super"


@dataclass(eq=False)
class HNode:
    """A node of the H-tree.

    ``outgoing[v]`` and ``v.incoming[self]`` are the same array object.
    """

    id: int
    kind: NodeKind
    level: int
    index: int
    size: int = 0
    children: tuple["HNode", ...] = ()
    parent: "HNode | None" = None
    merged_into: "HNode | None" = None
    elim_order: int | None = None
    pivot: PivotLU | None = None
    outgoing: dict["HNode", np.ndarray] = field(default_factory=dict, repr=False)
    incoming: dict["HNode", np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def name(self) -> str:
        if self.kind is NodeKind.RED:
            if self.level == 0:
                return "root"
            return f"r{self.index % 2}[{self.level},{self.index // 2 + 1}]"
        prefix = "s" if self.kind is NodeKind.SUPER else "b"
        return f"{prefix}[{self.level},{self.index + 1}]"

    @property
    def cluster(self) -> tuple[int, int]:
        """(level, index) of the cluster the node stands for."""
        if self.kind is NodeKind.RED:
            return self.level, self.index
        return self.level - 1, self.index

    @property
    def eliminated(self) -> bool:
        return self.elim_order is not None

    @property
    def active(self) -> bool:
        """Still part of the system being factored."""
        return self.elim_order is None and self.merged_into is None

    def neighbors(self) -> list["HNode"]:
        """Nodes joined to this one by an edge in either direction, by id."""
        seen = {**dict.fromkeys(self.outgoing), **dict.fromkeys(self.incoming)}
        seen.pop(self, None)
        return sorted(seen, key=lambda n: n.id)

    def __repr__(self) -> str:
        return f"HNode({self.name}, size={self.size})"


@dataclass(frozen=True)
class HEdge:
    source: HNode
    target: HNode
    block: np.ndarray


class HTree:
    """Nodes, interaction edges and the static cluster graphs of ``A``."""

    def __init__(self, matrix: BlockSparseMatrix, partitioning: NestedPartitioning) -> None:
        self.matrix = matrix
        self.partitioning = partitioning
        self.depth = partitioning.depth
        self.nodes: list[HNode] = []
        self.red: dict[tuple[int, int], HNode] = {}
        self.supers: dict[tuple[int, int], HNode] = {}
        self.blacks: dict[tuple[int, int], HNode] = {}
        self.on_edge_created: Callable[[HNode, HNode], None] | None = None
        self._order = 0
        self._cluster_graphs: dict[int, sp.csr_matrix] = {}
        self._distances: dict[tuple[int, int], np.ndarray] = {}

        for i in range(self.depth + 1):
            for c in range(2**i):
                self.red[i, c] = self._new_node(NodeKind.RED, i, c)
        for i in range(1, self.depth + 1):
            for j in range(2 ** (i - 1)):
                pair = (self.red[i, 2 * j], self.red[i, 2 * j + 1])
                parent = self.red[i - 1, j]
                self.supers[i, j] = self._new_node(NodeKind.SUPER, i, j, children=pair)
                self.blacks[i, j] = self._new_node(
                    NodeKind.BLACK, i, j, children=pair, parent=parent
                )
                for red in pair:
                    red.parent = parent

    def _new_node(self, kind: NodeKind, level: int, index: int, **kwargs: object) -> HNode:
        node = HNode(len(self.nodes), kind, level, index, **kwargs)  # type: ignore[arg-type]
        self.nodes.append(node)
        return node

    @property
    def root(self) -> HNode:
        return self.red[0, 0]

    def leaves(self) -> list[HNode]:
        return [self.red[self.depth, c] for c in range(2**self.depth)]

    def super_nodes(self, level: int) -> list[HNode]:
        return [self.supers[level, j] for j in range(2 ** (level - 1))]

    def black_nodes(self, level: int) -> list[HNode]:
        return [self.blacks[level, j] for j in range(2 ** (level - 1))]

    def parent_red(self, black: HNode) -> HNode:
        """``P(b)``: the red node a black node feeds."""
        assert black.parent is not None
        return black.parent

    def active_nodes(self) -> list[HNode]:
        return [n for n in self.nodes if n.active and n.size > 0]

    def assign_order(self, node: HNode) -> int:
        node.elim_order = self._order
        self._order += 1
        return node.elim_order

    # ========== Edges ==========

    def edge(self, source: HNode, target: HNode) -> np.ndarray | None:
        return source.outgoing.get(target)

    def set_edge(self, source: HNode, target: HNode, block: np.ndarray) -> None:
        if block.shape != (target.size, source.size):
            raise DimensionError(
                f"edge {source.name}->{target.name} expects {(target.size, source.size)}, "
                f"got {block.shape}"
            )
        created = target not in source.outgoing
        source.outgoing[target] = block
        target.incoming[source] = block
        if created and self.on_edge_created is not None:
            self.on_edge_created(source, target)

    def remove_edge(self, source: HNode, target: HNode) -> None:
        source.outgoing.pop(target, None)
        target.incoming.pop(source, None)

    def edges(self, active_only: bool = False) -> Iterator[HEdge]:
        for node in self.nodes:
            if active_only and not node.active:
                continue
            for target, block in node.outgoing.items():
                if active_only and not target.active:
                    continue
                yield HEdge(node, target, block)

    # ========== Distances on the original matrix graph ==========

    def cluster_graph(self, level: int) -> sp.csr_matrix:
        """Undirected adjacency of ``A`` under ``P_level``."""
        graph = self._cluster_graphs.get(level)
        if graph is None:
            graph = build_adjacency(self.matrix, self.partitioning.levels[level]).undirected()
            self._cluster_graphs[level] = graph
        return graph

    def _bfs(self, level: int, source: int) -> np.ndarray:
        key = (level, source)
        dist = self._distances.get(key)
        if dist is None:
            dist = shortest_path(
                self.cluster_graph(level), unweighted=True, directed=False, indices=source
            )
            self._distances[key] = dist
        return dist

    @staticmethod
    def _lift(u: HNode, v: HNode) -> tuple[int, int, int]:
        (lu, cu), (lv, cv) = u.cluster, v.cluster
        level = min(lu, lv)
        return level, cu >> (lu - level), cv >> (lv - level)

    def node_distance(self, u: HNode, v: HNode) -> int:
        """Shortest path between the clusters of two nodes.

        The deeper cluster is replaced by its ancestor at the shallower
        level, so ancestral clusters are at distance 0.
        """
        level, cu, cv = self._lift(u, v)
        if cu == cv:
            return 0
        graph = self.cluster_graph(level)
        if graph[cu, cv]:
            return 1
        d = self._bfs(level, cu)[cv]
        return int(d) if np.isfinite(d) else UNREACHABLE

    def is_well_separated(self, u: HNode, v: HNode, separation: int = 1) -> bool:
        if separation == 1:
            level, cu, cv = self._lift(u, v)
            return cu != cv and not self.cluster_graph(level)[cu, cv]
        return self.node_distance(u, v) > separation

    # ========== Dense views ==========

    def materialize(self, nodes: Iterable[HNode]) -> tuple[np.ndarray, dict[HNode, slice]]:
        """Dense matrix of the edges among ``nodes``, block rows by target.

        Returns:
            (dense matrix, slice of each node)
        """
        order = list(nodes)
        slices: dict[HNode, slice] = {}
        offset = 0
        for node in order:
            slices[node] = slice(offset, offset + node.size)
            offset += node.size
        dense = np.zeros((offset, offset))
        for source in order:
            for target, block in source.outgoing.items():
                if target in slices:
                    dense[slices[target], slices[source]] = block
        return dense, slices


def init_htree(m: BlockSparseMatrix, nested: NestedPartitioning) -> HTree:
    """Tree whose leaf red nodes and their edges represent ``A`` under ``P_l``."""
    if nested.n != m.n:
        raise DimensionError(f"partitioning covers {nested.n} indices, matrix has {m.n}")
    tree = HTree(m, nested)
    leaves = nested.leaves
    for c, size in enumerate(leaves.sizes()):
        tree.red[tree.depth, c].size = int(size)
    for source, target in sorted(build_adjacency(m, leaves).edges()):
        block = extract_block(m, leaves, target, source)
        tree.set_edge(tree.red[tree.depth, source], tree.red[tree.depth, target], block)
    logger.debug(f"Initialized H-tree: depth={tree.depth}, leaves={leaves.n_clusters}")
    return tree


def merge_red_nodes(tree: HTree, j: int, i: int) -> HNode:
    """Merge red siblings ``(i, 2j)`` and ``(i, 2j+1)`` into super node ``s(i, j)``.

    Every edge incident to either sibling, including edges kept from
    eliminated nodes, is re-expressed against the super node with missing
    quadrants zero-filled.
    """
    s = tree.supers[i, j]
    r0, r1 = s.children
    a, b = r0.size, r1.size
    s.size = a + b
    parts = {r0: slice(0, a), r1: slice(a, a + b)}

    self_block = np.zeros((s.size, s.size))
    out_blocks: dict[HNode, np.ndarray] = {}
    in_blocks: dict[HNode, np.ndarray] = {}
    for red, cols in parts.items():
        for target, block in red.outgoing.items():
            if target in parts:
                self_block[parts[target], cols] = block
                continue
            if target not in out_blocks:
                out_blocks[target] = np.zeros((target.size, s.size))
            out_blocks[target][:, cols] = block
        for source, block in red.incoming.items():
            if source in parts:
                continue
            if source not in in_blocks:
                in_blocks[source] = np.zeros((s.size, source.size))
            in_blocks[source][cols, :] = block

    for red in (r0, r1):
        for target in list(red.outgoing):
            tree.remove_edge(red, target)
        for source in list(red.incoming):
            tree.remove_edge(source, red)
        red.merged_into = s

    hook, tree.on_edge_created = tree.on_edge_created, None
    try:
        if s.size:
            tree.set_edge(s, s, self_block)
        for target, block in out_blocks.items():
            tree.set_edge(s, target, block)
        for source, block in in_blocks.items():
            tree.set_edge(source, s, block)
    finally:
        tree.on_edge_created = hook
    return s
