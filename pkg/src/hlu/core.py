"""
Core constants and environment settings for the hierarchical solver.
"""

import logging
import os

logger = logging.getLogger(__name__)

# Low-rank truncation (relative singular value cutoff)
DEFAULT_EPSILON = 1e-4
DEFAULT_TARGET_LEAF = 64
DEFAULT_SEPARATION = 1

# Pivot blocks whose smallest |u_ii| falls below this fraction of max |a_ij|
# are treated as singular.
PIVOT_TOLERANCE = 1e-13

# LAPACK drivers tried in order before an SVD is declared non-convergent
SVD_DRIVERS = ("gesdd", "gesvd")

# Recursive bisection
BISECTION_BALANCE = 0.10

# GMRES
GMRES_TOLERANCE = 1e-14
GMRES_MAX_ITERS = 500

# Largest matrix accepted by the step tracer
TRACE_MAX_N = 64

# Application metadata
__version__ = "0.1.0"
__description__ = (
    "Hierarchical LU factorization of sparse matrices with low-rank fill-in compression"
)


def _read_threads() -> int | None:
    """Parse HLU_THREADS.

    The value is reserved for a parallel backend; the sequential solver only
    reports it.

    Returns:
        Thread count or None when unset or malformed
    """
    raw = os.environ.get("HLU_THREADS")
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Ignoring malformed HLU_THREADS={raw!r}")
        return None
    return value if value > 0 else None


HLU_THREADS = _read_threads()
HLU_LOG_LEVEL = os.environ.get("HLU_LOG_LEVEL", "WARNING").upper()
