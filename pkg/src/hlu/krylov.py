"""
Left-preconditioned GMRES and the comparison preconditioners.

GMRES minimizes ``||M b - M A x||`` with modified Gram-Schmidt Arnoldi and
Givens rotations, so the preconditioned residual is known every iteration.
"""

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, TypeAlias

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, aslinearoperator, spilu

from .core import GMRES_MAX_ITERS, GMRES_TOLERANCE
from .errors import ConfigError, DimensionError, HluError
from .matrix import BlockSparseMatrix

logger = logging.getLogger(__name__)

Operator: TypeAlias = LinearOperator | sp.spmatrix | np.ndarray | Callable[[np.ndarray], np.ndarray]

PRECONDITIONERS = ("htree", "none", "diagonal", "ilu")


@dataclass
class GmresConfig:
    tol: float = GMRES_TOLERANCE
    max_iters: int = GMRES_MAX_ITERS
    restart: int | None = None

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be at least 1, got {self.max_iters}")
        if self.restart is not None and self.restart < 1:
            raise ConfigError(f"restart must be at least 1, got {self.restart}")


@dataclass
class GmresResult:
    x: np.ndarray
    history: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    breakdown: bool = False
    residual: float = 0.0
    elapsed: float = 0.0


def _as_operator(op: Operator, n: int) -> Callable[[np.ndarray], np.ndarray]:
    if callable(op) and not isinstance(op, (LinearOperator, np.ndarray)) and not sp.issparse(op):
        return op
    linear = aslinearoperator(op)
    if linear.shape != (n, n):
        raise DimensionError(f"operator has shape {linear.shape}, expected {(n, n)}")
    return linear.matvec


def _givens(a: float, b: float) -> tuple[float, float]:
    if b == 0.0:
        return 1.0, 0.0
    r = float(np.hypot(a, b))
    return a / r, b / r


def gmres_solve(
    apply_a: Operator,
    precond: Operator,
    b: npt.ArrayLike,
    cfg: GmresConfig | None = None,
    x0: npt.ArrayLike | None = None,
) -> GmresResult:
    """Solve ``M A x = M b`` with GMRES.

    Args:
        apply_a: System operator
        precond: Left preconditioner ``M``
        b: Right-hand side
        cfg: Tolerance, iteration cap and optional restart length
        x0: Starting guess (zero when None)

    Returns:
        Final iterate with the preconditioned residual history. Hitting the
        iteration cap or a breakdown is flagged on the result, not raised.
    """
    cfg = cfg or GmresConfig()
    rhs = np.asarray(b, dtype=np.float64)
    n = rhs.size
    a_op, m_op = _as_operator(apply_a, n), _as_operator(precond, n)
    start = time.perf_counter()

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    reference = float(np.linalg.norm(m_op(rhs)))
    if reference == 0.0:
        return GmresResult(np.zeros(n), [0.0], 0, True, False, 0.0, time.perf_counter() - start)

    r = m_op(rhs - a_op(x))
    beta = float(np.linalg.norm(r))
    result = GmresResult(x, [beta / reference])
    if beta / reference <= cfg.tol:
        result.converged = True

    while not result.converged and not result.breakdown and result.iterations < cfg.max_iters:
        m = min(cfg.restart or cfg.max_iters, cfg.max_iters - result.iterations)
        basis = np.zeros((m + 1, n))
        hess = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        basis[0] = r / beta
        g[0] = beta
        k = 0
        for j in range(m):
            w = m_op(a_op(basis[j]))
            scale = float(np.linalg.norm(w))
            for i in range(j + 1):
                hess[i, j] = w @ basis[i]
                w -= hess[i, j] * basis[i]
            h_next = float(np.linalg.norm(w))
            for i in range(j):
                hi, hi1 = hess[i, j], hess[i + 1, j]
                hess[i, j] = cs[i] * hi + sn[i] * hi1
                hess[i + 1, j] = -sn[i] * hi + cs[i] * hi1
            cs[j], sn[j] = _givens(hess[j, j], h_next)
            hess[j, j] = cs[j] * hess[j, j] + sn[j] * h_next
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            k = j + 1
            result.iterations += 1
            if h_next <= np.finfo(float).eps * scale:
                result.breakdown = True
                break
            relative = abs(g[j + 1]) / reference
            result.history.append(relative)
            if relative <= cfg.tol:
                result.converged = True
                break
            basis[j + 1] = w / h_next

        tri = np.triu(hess[:k, :k])
        if result.breakdown:
            # the last diagonal entry may be zero
            y = scipy.linalg.lstsq(tri, g[:k])[0]
        else:
            y = scipy.linalg.solve_triangular(tri, g[:k]) if k else np.zeros(0)
        x = x + basis[:k].T @ y
        r = m_op(rhs - a_op(x))
        beta = float(np.linalg.norm(r))
        if result.breakdown:
            result.history.append(beta / reference)
        if beta / reference <= cfg.tol:
            result.converged = True
        if beta == 0.0:
            break

    result.x = x
    result.residual = beta / reference
    result.elapsed = time.perf_counter() - start
    if result.converged:
        result.breakdown = False
        logger.info(f"GMRES converged in {result.iterations} iterations ({result.residual:.2e})")
    elif result.breakdown:
        logger.warning(f"GMRES breakdown after {result.iterations} iterations ({result.residual:.2e})")
    else:
        logger.warning(f"GMRES did not converge in {result.iterations} iterations ({result.residual:.2e})")
    return result


@dataclass(frozen=True)
class Metrics:
    """Relative error and residual; ``*_absolute`` marks a zero denominator."""

    error: float | None
    residual: float
    error_absolute: bool = False
    residual_absolute: bool = False


def metrics(
    x_approx: npt.ArrayLike,
    x_true: npt.ArrayLike | None,
    a: BlockSparseMatrix,
    b: npt.ArrayLike,
) -> Metrics:
    """``||x - x~|| / ||x||`` and ``||A x~ - b|| / ||b||``."""
    approx = np.asarray(x_approx, dtype=np.float64)
    rhs = np.asarray(b, dtype=np.float64)
    if approx.shape != rhs.shape:
        raise DimensionError(f"solution {approx.shape} and rhs {rhs.shape} differ")
    res_num = float(np.linalg.norm(a.matvec(approx) - rhs))
    res_den = float(np.linalg.norm(rhs))
    residual = res_num / res_den if res_den > 0 else res_num

    error, error_absolute = None, False
    if x_true is not None:
        exact = np.asarray(x_true, dtype=np.float64)
        err_num = float(np.linalg.norm(exact - approx))
        err_den = float(np.linalg.norm(exact))
        error_absolute = err_den == 0
        error = err_num if error_absolute else err_num / err_den
    return Metrics(error, residual, error_absolute, res_den == 0)


def history_csv(history: list[float]) -> str:
    """Iteration history as CSV ``iteration,preconditioned_residual``."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["iteration", "preconditioned_residual"])
    for i, value in enumerate(history):
        writer.writerow([i, repr(value)])
    return buffer.getvalue()


# ========== Comparison preconditioners ==========


def identity_preconditioner(n: int) -> LinearOperator:
    return LinearOperator((n, n), matvec=lambda v: np.array(v, dtype=np.float64), dtype=np.float64)


def jacobi_preconditioner(a: BlockSparseMatrix) -> LinearOperator:
    diag = a.csr.diagonal()
    if np.any(diag == 0):
        raise HluError("diagonal preconditioner needs a zero-free diagonal")
    inverse = 1.0 / diag
    return LinearOperator((a.n, a.n), matvec=lambda v: inverse * np.ravel(v), dtype=np.float64)


def ilu_preconditioner(
    a: BlockSparseMatrix, fill_factor: float = 10.0, drop_tol: float = GMRES_TOLERANCE
) -> LinearOperator:
    """Incomplete LU from SuperLU."""
    try:
        ilu = spilu(a.csr.tocsc(), drop_tol=drop_tol, fill_factor=fill_factor)
    except RuntimeError as e:
        raise HluError(f"incomplete LU failed: {e}") from e
    return LinearOperator((a.n, a.n), matvec=ilu.solve, dtype=np.float64)
