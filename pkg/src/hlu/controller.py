"""
Solver session shared by the one-shot commands and the interactive shell.

Holds the current matrix and factorization and turns each benchmark action
into a machine-readable report.
"""

import csv
import io
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .core import HLU_THREADS, TRACE_MAX_N
from .errors import ConfigError, HluError, TraceRefusedError
from .factor import FactorConfig, HierarchicalFactorization, factorize
from .krylov import (
    PRECONDITIONERS,
    GmresConfig,
    GmresResult,
    gmres_solve,
    identity_preconditioner,
    ilu_preconditioner,
    jacobi_preconditioner,
    metrics,
)
from .matrix import BlockSparseMatrix, load_matrix_market, save_matrix_market
from .problems import generate, manufactured_rhs
from .trace import TraceRecorder

logger = logging.getLogger(__name__)


@dataclass
class SolveReport:
    source: str
    n: int
    config: dict[str, Any]
    factor_time: float
    solve_time: float
    relative_error: float | None
    relative_residual: float
    aux_variables: int
    stats: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class PrecondReport:
    source: str
    n: int
    preconditioner: str
    config: dict[str, Any]
    gmres: dict[str, Any]
    factor_time: float
    gmres_time: float
    total_time: float
    iterations: int
    converged: bool
    breakdown: bool
    preconditioned_residual: float
    relative_error: float | None
    relative_residual: float
    history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


class SolverController:
    """Current matrix, factorization and configuration."""

    def __init__(self, config: FactorConfig | None = None) -> None:
        self.config = config or FactorConfig()
        self.gmres = GmresConfig()
        self.matrix: BlockSparseMatrix | None = None
        self.source: str = ""
        self.factorization: HierarchicalFactorization | None = None
        if HLU_THREADS is not None:
            logger.info(f"HLU_THREADS={HLU_THREADS} is reserved; running single-threaded")

    # ========== Matrices ==========

    def load(self, gen: str | None = None, mtx: str | Path | None = None) -> BlockSparseMatrix:
        """Load a matrix from a generator spec or a Matrix Market file."""
        if (gen is None) == (mtx is None):
            raise ConfigError("give exactly one of a generator spec or a Matrix Market path")
        if gen is not None:
            self.matrix, self.source = generate(gen), gen
        else:
            self.matrix, self.source = load_matrix_market(mtx), str(mtx)  # type: ignore[arg-type]
        self.factorization = None
        logger.info(f"Loaded {self.source}: n={self.matrix.n}, nnz={self.matrix.nnz}")
        return self.matrix

    def save(self, path: str | Path) -> None:
        save_matrix_market(self.require_matrix(), path)

    def require_matrix(self) -> BlockSparseMatrix:
        if self.matrix is None:
            raise HluError("no matrix loaded; use 'gen' or 'load' first")
        return self.matrix

    def rhs(
        self, kind: str = "manufactured", seed: int = 0
    ) -> tuple[np.ndarray, np.ndarray | None]:
        """Right-hand side and the exact solution when known.

        Args:
            kind: ``manufactured`` (b = A x*), ``ones``, ``random`` or a path to
                a whitespace-separated vector file
            seed: Seed for random vectors
        """
        m = self.require_matrix()
        if kind == "manufactured":
            return manufactured_rhs(m, seed)
        if kind == "ones":
            return np.ones(m.n), None
        if kind == "random":
            return np.random.default_rng(seed).standard_normal(m.n), None
        try:
            b = np.loadtxt(kind, dtype=np.float64, ndmin=1)
        except ValueError as e:
            raise ConfigError(f"rhs file {kind} is not a list of numbers: {e}") from e
        if not np.all(np.isfinite(b)):
            raise ConfigError(f"rhs file {kind} has non-finite values")
        if b.shape != (m.n,):
            raise ConfigError(f"rhs file {kind} has {b.size} values, matrix has n={m.n}")
        return b, None

    # ========== Factor and solve ==========

    def factor(self, recorder: TraceRecorder | None = None) -> HierarchicalFactorization:
        self.factorization = factorize(self.require_matrix(), self.config, recorder)
        return self.factorization

    def solve(self, rhs: str = "manufactured") -> SolveReport:
        m = self.require_matrix()
        handle = self.factorization or self.factor()
        b, x_star = self.rhs(rhs, self.config.seed)

        start = time.perf_counter()
        x = handle.solve(b)
        solve_time = time.perf_counter() - start

        result = metrics(x, x_star, m, b)
        return SolveReport(
            source=self.source,
            n=m.n,
            config=asdict(self.config),
            factor_time=handle.stats.time_total,
            solve_time=solve_time,
            relative_error=result.error,
            relative_residual=result.residual,
            aux_variables=handle.stats.aux_variables,
            stats=handle.stats.to_dict(),
        )

    def precond(
        self,
        kind: str = "htree",
        rhs: str = "manufactured",
        ilu_fill: float = 10.0,
        ilu_drop: float | None = None,
    ) -> PrecondReport:
        """Preconditioned GMRES with the chosen preconditioner."""
        if kind not in PRECONDITIONERS:
            raise ConfigError(f"unknown preconditioner {kind!r}, expected one of {PRECONDITIONERS}")
        m = self.require_matrix()
        b, x_star = self.rhs(rhs, self.config.seed)

        start = time.perf_counter()
        if kind == "htree":
            operator = (self.factorization or self.factor()).aspreconditioner()
        elif kind == "diagonal":
            operator = jacobi_preconditioner(m)
        elif kind == "ilu":
            drop = ilu_drop if ilu_drop is not None else self.gmres.tol
            operator = ilu_preconditioner(m, ilu_fill, drop)
        else:
            operator = identity_preconditioner(m.n)
        factor_time = (
            self.factorization.stats.time_total
            if kind == "htree" and self.factorization is not None
            else time.perf_counter() - start
        )

        result: GmresResult = gmres_solve(m.csr, operator, b, self.gmres)
        true = metrics(result.x, x_star, m, b)
        return PrecondReport(
            source=self.source,
            n=m.n,
            preconditioner=kind,
            config=asdict(self.config),
            gmres=asdict(self.gmres),
            factor_time=factor_time,
            gmres_time=result.elapsed,
            total_time=factor_time + result.elapsed,
            iterations=result.iterations,
            converged=result.converged,
            breakdown=result.breakdown,
            preconditioned_residual=result.residual,
            relative_error=true.error,
            relative_residual=true.residual,
            history=result.history,
        )

    # ========== Sweeps ==========

    def scaling(self, family: str, sizes: list[int]) -> list[dict[str, Any]]:
        """One stand-alone solve per size; depth follows log2 n at fixed target leaf."""
        rows = []
        self.config = replace(self.config, depth=None)
        for size in sizes:
            spec = f"{family}:{size}"
            self.load(gen=spec)
            report = self.solve()
            rows.append(
                {
                    "source": spec,
                    "n": report.n,
                    "depth": report.stats["depth"],
                    "factor_time": report.factor_time,
                    "solve_time": report.solve_time,
                    "relative_residual": report.relative_residual,
                }
            )
        return rows

    def sweep(self, epsilons: list[float], precond_mode: bool = False) -> list[dict[str, Any]]:
        """One row per epsilon on the current matrix."""
        self.require_matrix()
        base = self.config
        rows = []
        try:
            for eps in epsilons:
                self.config = replace(base, epsilon=eps)
                self.factorization = None
                row: dict[str, Any] = {"epsilon": eps}
                if precond_mode:
                    p = self.precond("htree")
                    row.update(
                        factor_time=p.factor_time,
                        solve_time=p.gmres_time,
                        relative_error=p.relative_error,
                        relative_residual=p.relative_residual,
                        iterations=p.iterations,
                        converged=p.converged,
                    )
                else:
                    s = self.solve()
                    row.update(
                        factor_time=s.factor_time,
                        solve_time=s.solve_time,
                        relative_error=s.relative_error,
                        relative_residual=s.relative_residual,
                    )
                stats = self.factorization.stats if self.factorization else None
                row["aux_variables"] = stats.aux_variables if stats else 0
                row["avg_rank"] = stats.avg_rank if stats else 0.0
                rows.append(row)
        finally:
            self.config = base
        return rows

    def trace(self) -> TraceRecorder:
        m = self.require_matrix()
        if m.n > TRACE_MAX_N:
            raise TraceRefusedError(f"tracing is limited to n <= {TRACE_MAX_N}, got n={m.n}")
        recorder = TraceRecorder(m.n)
        self.factor(recorder)
        return recorder

    def export_partition(self, path: str | Path) -> None:
        handle = self.factorization or self.factor()
        Path(path).write_text(handle.partitioning.to_json())


# ========== Report serialization ==========


def _clean(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    return value


def to_json(payload: Any) -> str:
    return json.dumps(payload, indent=2, default=_clean)


def rows_to_csv(rows: list[dict[str, Any]]) -> str:
    """Flat rows as CSV; nested values are JSON-encoded."""
    if not rows:
        return ""
    buffer = io.StringIO()
    fields = list(dict.fromkeys(key for row in rows for key in row))
    writer = csv.DictWriter(buffer, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(
            {k: json.dumps(v) if isinstance(v, (dict, list)) else _clean(v) for k, v in row.items()}
        )
    return buffer.getvalue()
