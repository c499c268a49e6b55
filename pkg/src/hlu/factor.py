"""
Hierarchical factorization: merge, compress and eliminate, level by level.

For every level from the leaves up, all red siblings are merged into super
nodes first; then each super node is compressed against its well-separated
partners, eliminated, and its black node eliminated.
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, Any, Iterator

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .core import DEFAULT_EPSILON, DEFAULT_SEPARATION, DEFAULT_TARGET_LEAF
from .errors import ConfigError, HluError, SingularPivotError
from .htree import HNode, HTree, init_htree, merge_red_nodes
from .kernels import (
    LowRankFactor,
    TruncationRule,
    gemm,
    low_rank_factor,
    lu_factor,
    lu_solve,
    make_rule,
)
from .matrix import BlockSparseMatrix
from .partition import PARTITIONERS, NestedPartitioning, choose_depth, make_partitioning
from .solve import solve

if TYPE_CHECKING:
    from .trace import TraceRecorder

logger = logging.getLogger(__name__)


@dataclass
class FactorConfig:
    """Factorization settings.

    ``depth`` wins over ``target_leaf`` when both are given.
    """

    epsilon: float = DEFAULT_EPSILON
    rule: str = "relsigma"
    depth: int | None = None
    target_leaf: int = DEFAULT_TARGET_LEAF
    seed: int = 0
    instrument: bool = False
    separation: int = DEFAULT_SEPARATION
    partitioner: str = "bisection"

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in (0, 1], got {self.epsilon}")
        if self.depth is not None and self.depth < 1:
            raise ConfigError(f"depth must be at least 1, got {self.depth}")
        if self.target_leaf < 1:
            raise ConfigError(f"target_leaf must be at least 1, got {self.target_leaf}")
        if self.separation < 1:
            raise ConfigError(f"separation must be at least 1, got {self.separation}")
        if self.partitioner not in PARTITIONERS:
            raise ConfigError(f"unknown partitioner {self.partitioner!r}")
        make_rule(self.rule, self.epsilon)

    def truncation_rule(self) -> TruncationRule:
        return make_rule(self.rule, self.epsilon)

    def resolve_depth(self, n: int) -> int:
        return self.depth if self.depth is not None else choose_depth(n, self.target_leaf)


@dataclass
class LevelStats:
    level: int
    n_super: int = 0
    max_super_size: int = 0
    avg_super_size: float = 0.0
    n_compressed: int = 0
    avg_rank: float = 0.0
    compression_ratio: float = 0.0
    kappa1: int = 0
    kappa2: int = 0
    aux_variables: int = 0


@dataclass
class FactorStats:
    n: int = 0
    depth: int = 0
    levels: list[LevelStats] = field(default_factory=list)
    time_svd: float = 0.0
    time_gemm: float = 0.0
    time_pivot: float = 0.0
    time_total: float = 0.0
    aux_variables: int = 0
    alpha_hat: float = 0.0
    edges_created: int = 0
    sparsity_violations: int = 0
    max_created_distance: int = 0
    dropped_energy: float = 0.0

    @property
    def avg_rank(self) -> float:
        ranked = [s for s in self.levels if s.n_compressed]
        if not ranked:
            return 0.0
        total = sum(s.avg_rank * s.n_compressed for s in ranked)
        return total / sum(s.n_compressed for s in ranked)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["avg_rank"] = self.avg_rank
        return data


@contextmanager
def _timed(stats: FactorStats, phase: str) -> Iterator[None]:
    start = time.perf_counter()
    try:
        yield
    finally:
        setattr(stats, phase, getattr(stats, phase) + time.perf_counter() - start)


def eliminate_node(tree: HTree, p: HNode, stats: FactorStats | None = None) -> None:
    """Eliminate a node and add its Schur complement into the remaining edges.

    For every active ``k -> p`` and ``p -> j`` pair the block
    ``-Mat(p->j) Mat(p->p)^-1 Mat(k->p)`` is added into ``k -> j``. The
    node keeps its edges and pivot LU for the solve phase.
    """
    stats = stats if stats is not None else FactorStats()
    tree.assign_order(p)
    if p.size == 0:
        return

    pivot_block = p.outgoing.get(p)
    if pivot_block is None:
        raise SingularPivotError(p.name, p.level, "no self edge")
    sources = sorted((k for k in p.incoming if k.active), key=lambda n: n.id)
    targets = sorted((j for j in p.outgoing if j.active), key=lambda n: n.id)

    with _timed(stats, "time_pivot"):
        p.pivot = lu_factor(pivot_block, p.name, p.level)
        reduced = {k: lu_solve(p.pivot, p.incoming[k]) for k in sources}
    with _timed(stats, "time_gemm"):
        for k in sources:
            for j in targets:
                block = tree.edge(k, j)
                if block is None:
                    block = np.zeros((j.size, k.size))
                    tree.set_edge(k, j, block)
                block[...] = gemm(-1.0, p.outgoing[j], reduced[k], 1.0, block)
    logger.debug(
        f"Eliminated {p.name} (size {p.size}): {len(sources)} in x {len(targets)} out"
    )


class _Compressor:
    """Compression state shared across a factorization (running Frobenius reference)."""

    def __init__(self, rule: TruncationRule, separation: int, stats: FactorStats) -> None:
        self.rule = rule
        self.separation = separation
        self.stats = stats
        self.reference_sq = 0.0

    def partners(self, tree: HTree, s: HNode) -> list[HNode]:
        return [
            v
            for v in s.neighbors()
            if v.active and v.size > 0 and tree.is_well_separated(s, v, self.separation)
        ]

    def __call__(self, tree: HTree, s: HNode) -> tuple[list[HNode], LowRankFactor | None]:
        partners = self.partners(tree, s)
        if not partners:
            return partners, None
        factor = compress_super_node(tree, s, partners, self.rule, self)
        return partners, factor


def compress_super_node(
    tree: HTree,
    s: HNode,
    partners: list[HNode],
    rule: TruncationRule,
    state: _Compressor | None = None,
) -> LowRankFactor:
    """Replace the edges between ``s`` and its partners by a low-rank chain.

    The stacked blocks ``[A_k; B_k] ~ [R_k; Q_k] V^T`` introduce the black
    node ``b`` and its red parent ``P(b)`` with ``size r``:
    ``P(b) -> p_k = R_k``, ``p_k -> P(b) = Q_k^T``, ``s -> b = V^T``,
    ``b -> s = V`` and ``b <-> P(b) = -I``.
    """
    if not partners:
        return LowRankFactor(0, [], [], np.zeros((s.size, 0)), 0.0, 0.0)
    b = tree.blacks[s.level, s.index]
    parent = tree.parent_red(b)
    if b.size or parent.size or b.outgoing or b.incoming or parent.outgoing or parent.incoming:
        raise HluError(f"{s.name} is already compressed")

    outgoing = [s.outgoing.get(p, np.zeros((p.size, s.size))) for p in partners]
    incoming = [s.incoming.get(p, np.zeros((s.size, p.size))) for p in partners]

    reference = None
    stats = state.stats if state is not None else FactorStats()
    if state is not None:
        state.reference_sq += sum(float(np.sum(a**2)) for a in (*outgoing, *incoming))
        reference = float(np.sqrt(state.reference_sq))
    with _timed(stats, "time_svd"):
        factor = low_rank_factor(outgoing, incoming, rule, reference)
    stats.dropped_energy = float(np.hypot(stats.dropped_energy, factor.dropped_energy))

    for p in partners:
        tree.remove_edge(s, p)
        tree.remove_edge(p, s)

    r = factor.rank
    logger.debug(
        f"Compressed {s.name} (size {s.size}) against {len(partners)} partners: rank {r}"
    )
    if r == 0:
        return factor

    b.size = parent.size = r
    for p, r_k, q_k in zip(partners, factor.left, factor.right):
        tree.set_edge(parent, p, r_k.copy())
        tree.set_edge(p, parent, np.ascontiguousarray(q_k.T))
    tree.set_edge(s, b, np.ascontiguousarray(factor.v.T))
    tree.set_edge(b, s, factor.v.copy())
    tree.set_edge(b, parent, -np.eye(r))
    tree.set_edge(parent, b, -np.eye(r))
    return factor


@dataclass
class HierarchicalFactorization:
    """Factored H-tree, reusable for any number of right-hand sides."""

    tree: HTree
    config: FactorConfig
    stats: FactorStats
    partitioning: NestedPartitioning

    @property
    def n(self) -> int:
        return self.tree.matrix.n

    @property
    def depth(self) -> int:
        return self.tree.depth

    def solve(self, b: np.ndarray) -> np.ndarray:
        return solve(self, b)

    def aspreconditioner(self) -> LinearOperator:
        """The approximate inverse as a scipy LinearOperator."""
        return LinearOperator((self.n, self.n), matvec=self.solve, dtype=np.float64)


def _neighbor_counts(graph: sp.csr_matrix) -> tuple[int, int]:
    """Max number of clusters at distance 1 and at distance 2."""
    if graph.shape[0] == 0 or graph.nnz == 0:
        return 0, 0
    one = (graph != 0).astype(np.int64).tocsr()
    reach = ((one @ one + one) > 0).astype(np.int64).tolil()
    reach.setdiag(0)
    two = reach.tocsr() - one
    two.eliminate_zeros()
    return int(np.diff(one.indptr).max()), int(np.diff(two.indptr).max())


def _level_stats(
    tree: HTree, level: int, sizes: list[int], ranks: list[int], partnered: list[int]
) -> LevelStats:
    stats = LevelStats(level=level, n_super=len(sizes))
    if sizes:
        stats.max_super_size = max(sizes)
        stats.avg_super_size = float(np.mean(sizes))
    if ranks:
        stats.n_compressed = len(ranks)
        stats.avg_rank = float(np.mean(ranks))
        mean_size = float(np.mean(partnered))
        if mean_size > 0:
            stats.compression_ratio = float(np.clip(stats.avg_rank / mean_size, 0.0, 1.0))
    stats.aux_variables = 2 * sum(ranks)
    stats.kappa1, stats.kappa2 = _neighbor_counts(tree.cluster_graph(level - 1))
    return stats


def _alpha_hat(levels: list[LevelStats], depth: int) -> float:
    by_level = {s.level: s.avg_super_size for s in levels}
    d_leaf = by_level.get(depth, 0.0)
    if d_leaf <= 0:
        return 0.0
    ratios = [
        (by_level[i] / d_leaf) ** (1.0 / (depth - i))
        for i in by_level
        if i < depth and by_level[i] > 0
    ]
    return float(max(ratios, default=0.0))


def factorize(
    m: BlockSparseMatrix, cfg: FactorConfig, recorder: "TraceRecorder | None" = None
) -> HierarchicalFactorization:
    """Factor a sparse matrix on its H-tree.

    Args:
        m: Square matrix
        cfg: Factorization settings
        recorder: Optional step recorder

    Returns:
        Factorization handle with statistics

    Raises:
        SingularPivotError: A pivot block is singular to working tolerance
    """
    start = time.perf_counter()
    nested = make_partitioning(m, cfg.resolve_depth(m.n), cfg.seed, cfg.partitioner)
    tree = init_htree(m, nested)
    stats = FactorStats(n=m.n, depth=tree.depth)
    compress = _Compressor(cfg.truncation_rule(), cfg.separation, stats)

    if cfg.instrument:

        def check_edge(source: HNode, target: HNode) -> None:
            stats.edges_created += 1
            d = tree.node_distance(source, target)
            stats.max_created_distance = max(stats.max_created_distance, d)
            if d > cfg.separation + 1:
                stats.sparsity_violations += 1
                logger.warning(f"Edge {source.name}->{target.name} spans distance {d}")

        tree.on_edge_created = check_edge

    for i in range(tree.depth, 0, -1):
        supers = [merge_red_nodes(tree, j, i) for j in range(2 ** (i - 1))]
        if recorder is not None:
            recorder.merge(tree, i)
        ranks: list[int] = []
        partnered: list[int] = []
        for s in supers:
            b = tree.blacks[s.level, s.index]
            partners, factor = compress(tree, s)
            if factor is not None:
                ranks.append(factor.rank)
                partnered.append(s.size)
                if recorder is not None:
                    recorder.compress(tree, s, partners)
            eliminate_node(tree, s, stats)
            if recorder is not None and s.size:
                recorder.eliminate(tree, s)
            eliminate_node(tree, b, stats)
            if recorder is not None and b.size:
                recorder.eliminate(tree, b)

        level = _level_stats(tree, i, [s.size for s in supers], ranks, partnered)
        stats.levels.append(level)
        stats.aux_variables += level.aux_variables
        logger.info(
            f"Level {i}: {level.n_super} supers, max size {level.max_super_size}, "
            f"{level.n_compressed} compressed, avg rank {level.avg_rank:.1f}"
        )

    eliminate_node(tree, tree.root, stats)
    tree.on_edge_created = None
    stats.alpha_hat = _alpha_hat(stats.levels, tree.depth)
    stats.time_total = time.perf_counter() - start
    if stats.sparsity_violations:
        logger.warning(f"{stats.sparsity_violations} created edges violate the distance bound")
    logger.info(
        f"Factorized n={m.n} depth={tree.depth} in {stats.time_total:.3f}s, "
        f"{stats.aux_variables} auxiliary variables"
    )
    return HierarchicalFactorization(tree, cfg, stats, nested)
