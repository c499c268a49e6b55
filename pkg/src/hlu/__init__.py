"""
hlu - Hierarchical LU factorization of sparse matrices

Approximate LU factorization that compresses well-separated fill-in with
truncated low-rank factors, usable as a direct solver or as a GMRES
preconditioner.
"""

from .core import __description__, __version__
from .factor import FactorConfig, HierarchicalFactorization, factorize
from .krylov import GmresConfig, gmres_solve, metrics
from .matrix import BlockSparseMatrix, load_matrix_market, save_matrix_market
from .solve import solve

__all__ = [
    "BlockSparseMatrix",
    "FactorConfig",
    "GmresConfig",
    "HierarchicalFactorization",
    "__description__",
    "__version__",
    "factorize",
    "gmres_solve",
    "load_matrix_market",
    "metrics",
    "save_matrix_market",
    "solve",
]
