"""
Dense linear algebra kernels.

Pivoted LU, inverse application, gemm and truncated SVD on the small dense
blocks carried by H-tree edges. LAPACK does the work through scipy.linalg.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence, TypeAlias

import numpy as np
import scipy.linalg

from .core import PIVOT_TOLERANCE, SVD_DRIVERS
from .errors import ConfigError, DimensionError, SingularPivotError, SvdConvergenceError
from .matrix import DenseBlock

logger = logging.getLogger(__name__)


# ========== LU ==========


@dataclass(frozen=True)
class PivotLU:
    """Pivoted LU factors of a square block (``P A = L U``)."""

    lu: np.ndarray
    piv: np.ndarray

    @property
    def size(self) -> int:
        return int(self.lu.shape[0])

    def factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Explicit (P, L, U) with ``A = P @ L @ U``."""
        n = self.size
        lower = np.tril(self.lu, k=-1) + np.eye(n)
        upper = np.triu(self.lu)
        perm = np.arange(n)
        for i, p in enumerate(self.piv):
            perm[i], perm[p] = perm[p], perm[i]
        # Row i of L U is row perm[i] of A
        p_matrix = np.zeros((n, n))
        p_matrix[perm, np.arange(n)] = 1.0
        return p_matrix, lower, upper


def lu_factor(block: DenseBlock, node: str = "?", level: int | None = None) -> PivotLU:
    """Factor a square pivot block with partial pivoting.

    Args:
        block: Square block
        node: Node name used in the error message
        level: Node level used in the error message

    Returns:
        Pivoted LU handle

    Raises:
        DimensionError: Block is not square
        SingularPivotError: Smallest pivot below tolerance
    """
    if block.ndim != 2 or block.shape[0] != block.shape[1]:
        raise DimensionError(f"pivot block must be square, got {block.shape}")
    n = block.shape[0]
    if n == 0:
        return PivotLU(np.zeros((0, 0)), np.zeros(0, dtype=np.int32))

    scale = float(np.max(np.abs(block)))
    if scale == 0.0:
        raise SingularPivotError(node, level, "zero block")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(block, check_finite=True)

    smallest = float(np.min(np.abs(np.diag(lu))))
    if not np.isfinite(smallest) or smallest < PIVOT_TOLERANCE * scale:
        raise SingularPivotError(
            node, level, f"|pivot| = {smallest:.3e} against max |a| = {scale:.3e}"
        )
    return PivotLU(lu, piv)


def lu_solve(handle: PivotLU, rhs: np.ndarray) -> np.ndarray:
    """Apply the inverse of a factored block to a vector or block."""
    if rhs.shape[0] != handle.size:
        raise DimensionError(f"rhs has {rhs.shape[0]} rows, pivot block is {handle.size}")
    if handle.size == 0:
        return np.zeros_like(rhs, dtype=np.float64)
    return scipy.linalg.lu_solve((handle.lu, handle.piv), rhs, check_finite=False)


def gemm(
    alpha: float, a: np.ndarray, b: np.ndarray, beta: float, c: np.ndarray
) -> np.ndarray:
    """Return ``alpha * a @ b + beta * c``.

    Raises:
        DimensionError: Operand shapes do not conform
    """
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    if c.shape != (a.shape[0], b.shape[1]):
        raise DimensionError(f"accumulator {c.shape} does not match {(a.shape[0], b.shape[1])}")
    product = a @ b
    if alpha != 1.0:
        product *= alpha
    if beta == 0.0:
        return product
    return product + beta * c


# ========== Truncated SVD ==========


@dataclass(frozen=True)
class RelativeSigma:
    """Keep singular values with ``s_k / s_0 >= epsilon``."""

    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in (0, 1], got {self.epsilon}")

    def rank(self, s: np.ndarray, reference_norm: float | None = None) -> int:
        if s.size == 0 or s[0] == 0.0:
            return 0
        return int(np.count_nonzero(s >= self.epsilon * s[0]))


@dataclass(frozen=True)
class FrobeniusGlobal:
    """Keep the first k singular values, with k the smallest count whose
    discarded tail, relative to a running Frobenius reference, is below epsilon.
    """

    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must be in (0, 1], got {self.epsilon}")

    def rank(self, s: np.ndarray, reference_norm: float | None = None) -> int:
        if s.size == 0 or s[0] == 0.0:
            return 0
        total = float(np.sqrt(np.sum(s**2)))
        reference = total if reference_norm is None else reference_norm
        if reference <= 0.0:
            return 0
        # tail[k] = ||s[k:]||
        tail = np.sqrt(np.cumsum((s**2)[::-1])[::-1])
        below = np.flatnonzero(tail / reference < self.epsilon)
        return int(below[0]) if below.size else int(s.size)


TruncationRule: TypeAlias = RelativeSigma | FrobeniusGlobal

RULES = {"relsigma": RelativeSigma, "frob": FrobeniusGlobal}


def make_rule(name: str, epsilon: float) -> TruncationRule:
    """Build a truncation rule from its CLI name."""
    try:
        return RULES[name](epsilon)
    except KeyError:
        raise ConfigError(f"unknown truncation rule {name!r}, expected one of {sorted(RULES)}")


@dataclass(frozen=True)
class TruncatedSVD:
    """``M ~ u @ diag(s) @ vt`` keeping ``rank`` terms."""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray
    rank: int
    dropped_energy: float
    singular_values: np.ndarray


def _svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    last: Exception | None = None
    for driver in SVD_DRIVERS:
        try:
            return scipy.linalg.svd(m, full_matrices=False, lapack_driver=driver)
        except np.linalg.LinAlgError as e:
            logger.debug(f"SVD driver {driver} failed on {m.shape} block: {e}")
            last = e
    raise SvdConvergenceError(f"SVD of {m.shape} block did not converge") from last


def truncated_svd(
    m: np.ndarray, rule: TruncationRule, reference_norm: float | None = None
) -> TruncatedSVD:
    """Truncated SVD under a truncation rule.

    Args:
        m: Finite dense matrix
        rule: Truncation rule
        reference_norm: Running Frobenius reference for FrobeniusGlobal

    Returns:
        Leading singular triplets and the Frobenius norm of what was dropped

    Raises:
        ValueError: Non-finite entries
        SvdConvergenceError: No LAPACK driver converged
    """
    if not np.all(np.isfinite(m)):
        raise ValueError("cannot compress a block with non-finite entries")
    rows, cols = m.shape
    if rows == 0 or cols == 0:
        empty = np.zeros(0)
        return TruncatedSVD(np.zeros((rows, 0)), empty, np.zeros((0, cols)), 0, 0.0, empty)

    u, s, vt = _svd(m)
    r = rule.rank(s, reference_norm)
    dropped = float(np.sqrt(np.sum(s[r:] ** 2)))
    return TruncatedSVD(u[:, :r], s[:r], vt[:r, :], r, dropped, s)


# ========== Low-rank factor of stacked interactions ==========


@dataclass
class LowRankFactor:
    """Truncated factorization ``[A_1..A_t; B_1..B_t] ~ [R_1..R_t; Q_1..Q_t] V^T``.

    ``A_k`` is the outgoing block of the compressed node towards partner k and
    ``B_k`` the transpose of the incoming block from partner k.
    """

    rank: int
    left: list[np.ndarray]
    right: list[np.ndarray]
    v: np.ndarray
    dropped_energy: float
    stacked_norm: float

    def reconstruction(self) -> np.ndarray:
        if not self.left:
            return np.zeros((0, self.v.shape[0]))
        return np.vstack([*self.left, *self.right]) @ self.v.T


def stack_interactions(
    outgoing: Sequence[np.ndarray], incoming: Sequence[np.ndarray]
) -> np.ndarray:
    """Stack ``A_k`` and ``B_k = incoming_k^T`` row-wise."""
    if len(outgoing) != len(incoming):
        raise DimensionError("outgoing and incoming partner lists differ in length")
    parts = [*outgoing, *(block.T for block in incoming)]
    if not parts:
        raise DimensionError("no interaction blocks to stack")
    widths = {p.shape[1] for p in parts}
    if len(widths) > 1:
        raise DimensionError(f"stacked blocks disagree on column count: {sorted(widths)}")
    return np.vstack(parts)


def low_rank_factor(
    outgoing: Sequence[np.ndarray],
    incoming: Sequence[np.ndarray],
    rule: TruncationRule,
    reference_norm: float | None = None,
) -> LowRankFactor:
    """Compress the interactions of one node with its partners.

    Args:
        outgoing: ``A_k`` blocks, shape (m_k, m)
        incoming: incoming blocks, shape (m, m_k)
        rule: Truncation rule
        reference_norm: Running Frobenius reference for FrobeniusGlobal

    Returns:
        Low-rank factor with per-partner R_k and Q_k slices
    """
    stacked = stack_interactions(outgoing, incoming)
    svd = truncated_svd(stacked, rule, reference_norm)
    left_full = svd.u * svd.s  # (sum m_k * 2, r)

    bounds = np.cumsum([0, *(a.shape[0] for a in outgoing), *(b.shape[1] for b in incoming)])
    pieces = [left_full[bounds[k] : bounds[k + 1]] for k in range(len(bounds) - 1)]
    t = len(outgoing)
    return LowRankFactor(
        rank=svd.rank,
        left=pieces[:t],
        right=pieces[t:],
        v=np.ascontiguousarray(svd.vt.T),
        dropped_energy=svd.dropped_energy,
        stacked_norm=float(np.linalg.norm(stacked)),
    )
