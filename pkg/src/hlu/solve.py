"""
Solve phase: forward traversal over the elimination order, backward
traversal in reverse, then the leaf variables are gathered into ``x``.

Variables and right-hand sides live in a :class:`SolveSession`, so one
factorization can serve concurrent solves.
"""

import logging
from typing import TYPE_CHECKING

import numpy as np
import numpy.typing as npt

from .errors import DimensionError
from .htree import HNode, NodeKind
from .kernels import lu_solve

if TYPE_CHECKING:
    from .factor import HierarchicalFactorization

logger = logging.getLogger(__name__)


class SolveSession:
    """Per-solve ``RHS`` and ``Var`` storage keyed by node."""

    def __init__(self, handle: "HierarchicalFactorization") -> None:
        self.handle = handle
        self.tree = handle.tree
        self.rhs: dict[HNode, np.ndarray] = {}
        self.var: dict[HNode, np.ndarray] = {}

    def set_rhs(self, b: npt.ArrayLike) -> None:
        """Leaf RHS from ``b``, auxiliary RHS zero, super RHS the concatenation
        of its two children.
        """
        vector = np.asarray(b, dtype=np.float64)
        if vector.shape != (self.handle.n,):
            raise DimensionError(f"rhs has shape {vector.shape}, expected ({self.handle.n},)")
        self.rhs.clear()
        self.var.clear()
        leaves = self.handle.partitioning.leaves
        for c, leaf in enumerate(self.tree.leaves()):
            self.rhs[leaf] = vector[leaves.members(c)].copy()
        for node in self.tree.nodes:
            if node.kind is not NodeKind.SUPER and node not in self.rhs:
                self.rhs[node] = np.zeros(node.size)
        for i in range(self.tree.depth, 0, -1):
            for s in self.tree.super_nodes(i):
                r0, r1 = s.children
                self.rhs[s] = np.concatenate([self.rhs[r0], self.rhs[r1]])

    def solve_l(self, p: HNode) -> None:
        """Forward step: push ``Mat(p->q) Mat(p->p)^-1 RHS(p)`` into later nodes."""
        if p.size == 0 or p.pivot is None:
            return
        order = p.elim_order
        assert order is not None
        f = lu_solve(p.pivot, self.rhs[p])
        for q, block in p.outgoing.items():
            if q.elim_order is not None and q.elim_order > order:
                self.rhs[q] -= block @ f

    def solve_u(self, p: HNode) -> None:
        """Backward step: ``Var(p)`` from its RHS and the later variables."""
        if p.size == 0 or p.pivot is None:
            self.var[p] = np.zeros(p.size)
            return
        order = p.elim_order
        assert order is not None
        acc = self.rhs[p].copy()
        for q, block in p.incoming.items():
            if q.elim_order is not None and q.elim_order > order:
                acc -= block @ self.var[q]
        self.var[p] = lu_solve(p.pivot, acc)

    def split_var(self, s: HNode) -> None:
        """Hand the super node's variables back to its two red children."""
        r0, r1 = s.children
        value = self.var[s]
        self.var[r0] = value[: r0.size]
        self.var[r1] = value[r0.size :]

    def gather_solution(self) -> np.ndarray:
        x = np.empty(self.handle.n)
        leaves = self.handle.partitioning.leaves
        for c, leaf in enumerate(self.tree.leaves()):
            x[leaves.members(c)] = self.var[leaf]
        return x

    def forward(self) -> None:
        tree = self.tree
        for i in range(tree.depth, 0, -1):
            for s, b in zip(tree.super_nodes(i), tree.black_nodes(i)):
                self.solve_l(s)
                self.solve_l(b)

    def backward(self) -> None:
        tree = self.tree
        self.var[tree.root] = np.zeros(0)
        for i in range(1, tree.depth + 1):
            pairs = list(zip(tree.super_nodes(i), tree.black_nodes(i)))
            for s, b in reversed(pairs):
                self.solve_u(b)
                self.solve_u(s)
                self.split_var(s)

    def run(self, b: npt.ArrayLike) -> np.ndarray:
        self.set_rhs(b)
        self.forward()
        self.backward()
        return self.gather_solution()


def solve(handle: "HierarchicalFactorization", b: npt.ArrayLike) -> np.ndarray:
    """Approximate ``A^-1 b`` with a factored H-tree.

    Args:
        handle: Factorization
        b: Right-hand side of length n

    Returns:
        Solution vector in original index order

    Raises:
        DimensionError: Wrong rhs length
    """
    return SolveSession(handle).run(b)
