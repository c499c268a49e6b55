"""
Display manager for Rich-based console output.

Human-readable tables go to a stderr console so stdout stays free for JSON
and CSV reports.
"""

import logging
from typing import Any, Optional

from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from .core import __version__

logger = logging.getLogger(__name__)


class DisplayManager:
    """Manages console output with Rich library."""

    def __init__(self, console: Optional[Console] = None):
        """Initialize display manager.

        Args:
            console: Rich Console instance (creates a stderr one if None)
        """
        self.console = console or Console(stderr=True)

    def print_banner(self) -> None:
        """Print shell banner."""
        panel = Panel(
            f"[bold cyan]hlu {__version__} - hierarchical LU solver shell[/bold cyan]\n"
            "[dim]Type 'help' for commands, 'quit' to exit[/dim]",
            expand=False,
        )
        self.console.print(panel)

    def print_error(self, message: str) -> None:
        self.console.print(f"[red]Error:[/red] {message}", highlight=False)

    def print_info(self, message: str) -> None:
        self.console.print(f"[cyan]Info:[/cyan] {message}", highlight=False)

    def print_warning(self, message: str) -> None:
        self.console.print(f"[yellow]Warning:[/yellow] {message}", highlight=False)

    def print_help(self, commands: list) -> None:  # type: ignore[type-arg]
        """Display command reference.

        Args:
            commands: List of Command objects
        """
        table = Table(title="Available Commands", show_header=True)
        table.add_column("Command", style="cyan")
        table.add_column("Aliases", style="magenta")
        table.add_column("Description", style="white")
        table.add_column("Usage", style="yellow")

        for cmd in commands:
            aliases = ", ".join(cmd.aliases) if cmd.aliases else "-"
            table.add_row(cmd.name, aliases, cmd.description, cmd.usage)

        self.console.print(table)
        self.console.print("[dim]Ctrl+C cancels the line, Ctrl+D exits[/dim]")

    def print_mapping(self, title: str, data: dict[str, Any]) -> None:
        """Two-column key/value table."""
        table = Table(title=title, show_header=True, header_style="bold cyan")
        table.add_column("Setting", style="cyan")
        table.add_column("Value", style="yellow")
        for key, value in data.items():
            table.add_row(key, self.format_value(value))
        self.console.print(table)

    def print_factor_summary(self, stats: dict[str, Any]) -> None:
        """Timings and totals of a factorization."""
        summary = {
            "n": stats["n"],
            "depth": stats["depth"],
            "total time": self.format_seconds(stats["time_total"]),
            "svd time": self.format_seconds(stats["time_svd"]),
            "gemm time": self.format_seconds(stats["time_gemm"]),
            "pivot time": self.format_seconds(stats["time_pivot"]),
            "auxiliary variables": stats["aux_variables"],
            "average rank": stats["avg_rank"],
            "alpha estimate": stats["alpha_hat"],
        }
        if stats.get("edges_created"):
            summary["edges created"] = stats["edges_created"]
            summary["max edge distance"] = stats["max_created_distance"]
            summary["distance violations"] = stats["sparsity_violations"]
        self.print_mapping("Factorization", summary)
        self.print_levels(stats["levels"])

    def print_levels(self, levels: list[dict[str, Any]]) -> None:
        table = Table(title="Levels", show_header=True, header_style="bold cyan")
        for column in ("level", "supers", "max size", "avg size", "compressed", "avg rank",
                       "ratio", "k1", "k2"):
            table.add_column(column, justify="right")
        for s in levels:
            table.add_row(
                str(s["level"]),
                str(s["n_super"]),
                str(s["max_super_size"]),
                f"{s['avg_super_size']:.1f}",
                str(s["n_compressed"]),
                f"{s['avg_rank']:.1f}",
                f"{s['compression_ratio']:.2f}",
                str(s["kappa1"]),
                str(s["kappa2"]),
            )
        self.console.print(table)

    def print_solve(self, report: dict[str, Any]) -> None:
        self.print_factor_summary(report["stats"])
        self.print_mapping(
            "Solve",
            {
                "source": report["source"],
                "solve time": self.format_seconds(report["solve_time"]),
                "relative error": report["relative_error"],
                "relative residual": report["relative_residual"],
            },
        )

    def print_precond(self, report: dict[str, Any]) -> None:
        """One row shaped like a preconditioner comparison table."""
        table = Table(title=f"GMRES ({report['preconditioner']})", header_style="bold cyan")
        for column in ("fact. time", "GMRES time", "tot. time", "# iters", "rel. error",
                       "prec. residual", "true residual"):
            table.add_column(column, justify="right")
        iters = str(report["iterations"])
        if not report["converged"]:
            iters = f"[red]{iters}*[/red]"
        table.add_row(
            self.format_seconds(report["factor_time"]),
            self.format_seconds(report["gmres_time"]),
            self.format_seconds(report["total_time"]),
            iters,
            self.format_value(report["relative_error"]),
            self.format_value(report["preconditioned_residual"]),
            self.format_value(report["relative_residual"]),
        )
        self.console.print(table)

    def print_rows(self, title: str, rows: list[dict[str, Any]]) -> None:
        if not rows:
            return
        table = Table(title=title, show_header=True, header_style="bold cyan")
        for column in rows[0]:
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(*(self.format_value(v) for v in row.values()))
        self.console.print(table)

    @staticmethod
    def format_seconds(seconds: float) -> str:
        """Seconds with ms resolution below one second."""
        if seconds < 1.0:
            return f"{seconds * 1000:.1f} ms"
        return f"{seconds:.2f} s"

    @staticmethod
    def format_value(value: Any) -> str:
        if value is None:
            return "-"
        if isinstance(value, float):
            if value and (abs(value) < 1e-2 or abs(value) >= 1e4):
                return f"{value:.3e}"
            return f"{value:.4g}"
        return str(value)
