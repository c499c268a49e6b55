"""
Command-line harness and interactive shell.

One-shot subcommands (solve, precond, scaling, trace, sweep) print rich
tables to stderr and a JSON or CSV report to stdout or ``--report``. Without
a subcommand an interactive shell starts.
"""

import argparse
import logging
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional

from prompt_toolkit import PromptSession
from prompt_toolkit.formatted_text import FormattedText
from prompt_toolkit.history import InMemoryHistory
from rich.logging import RichHandler

from .commands import COMMANDS, CommandCompleter, get_command
from .controller import SolverController, rows_to_csv, to_json
from .core import (
    DEFAULT_EPSILON,
    DEFAULT_SEPARATION,
    DEFAULT_TARGET_LEAF,
    GMRES_MAX_ITERS,
    GMRES_TOLERANCE,
    HLU_LOG_LEVEL,
    __version__,
)
from .display import DisplayManager
from .errors import ConfigError, ExitCode, HluError
from .factor import FactorConfig
from .kernels import RULES
from .krylov import PRECONDITIONERS, GmresConfig, history_csv
from .partition import PARTITIONERS

logger = logging.getLogger(__name__)


def configure_logging(display: DisplayManager, verbose: bool = False) -> None:
    """Route library logging through a RichHandler on the display console."""
    level = logging.DEBUG if verbose else getattr(logging, HLU_LOG_LEVEL, logging.WARNING)
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=display.console, show_path=False)],
        force=True,
    )


def _optional_int(text: str) -> int | None:
    return None if text.lower() in ("none", "") else int(text)


def _bool(text: str) -> bool:
    return text.lower() in ("1", "true", "yes", "on")


_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "epsilon": float,
    "rule": str,
    "depth": _optional_int,
    "target_leaf": int,
    "seed": int,
    "instrument": _bool,
    "separation": int,
    "partitioner": str,
    "tol": float,
    "max_iters": int,
    "restart": _optional_int,
}


class HluREPL:
    """Interactive shell over a SolverController."""

    def __init__(
        self,
        controller: Optional[SolverController] = None,
        display: Optional[DisplayManager] = None,
    ) -> None:
        self.controller = controller or SolverController()
        self.display = display or DisplayManager()
        self.running = False

    def run(self) -> None:
        """Run the main REPL loop."""
        session: PromptSession = PromptSession(
            completer=CommandCompleter(),
            history=InMemoryHistory(),
            enable_history_search=True,
        )
        self.running = True
        self.display.print_banner()
        while self.running:
            try:
                text = session.prompt(self._get_prompt())
            except KeyboardInterrupt:
                continue
            except EOFError:
                self.cmd_quit([])
                break
            if text.strip():
                self.handle_input(text.strip())

    def _get_prompt(self) -> FormattedText:
        if self.controller.matrix is None:
            return FormattedText([("class:prompt", "[no matrix] > ")])
        marker = "*" if self.controller.factorization is not None else ""
        label = f"{self.controller.source} n={self.controller.matrix.n}{marker}"
        return FormattedText([("class:prompt", f"[{label}] > ")])

    def handle_input(self, text: str) -> None:
        """Parse and dispatch one command line."""
        parts = text.split()
        if not parts:
            return
        cmd = get_command(parts[0].lower())
        if cmd is None:
            self.display.print_error(
                f"Unknown command: {parts[0]}. Type 'help' for available commands."
            )
            return
        handler = getattr(self, cmd.handler)
        try:
            handler(parts[1:])
        except (HluError, OSError) as e:
            self.display.print_error(str(e))
        except Exception as e:
            self.display.print_error(f"Command failed: {e}")
            logger.exception("Command exception")

    # ========== Command Handlers ==========

    def cmd_gen(self, args: list[str]) -> None:
        if not args:
            self.display.print_error("Usage: gen <name:params>")
            return
        m = self.controller.load(gen=args[0])
        self.display.print_info(f"Generated {args[0]}: n={m.n}, nnz={m.nnz}")

    def cmd_load(self, args: list[str]) -> None:
        if not args:
            self.display.print_error("Usage: load <path.mtx>")
            return
        m = self.controller.load(mtx=args[0])
        self.display.print_info(f"Loaded {args[0]}: n={m.n}, nnz={m.nnz}")

    def cmd_save(self, args: list[str]) -> None:
        if not args:
            self.display.print_error("Usage: save <path.mtx>")
            return
        self.controller.save(args[0])
        self.display.print_info(f"Saved to {args[0]}")

    def cmd_factor(self, args: list[str]) -> None:
        handle = self.controller.factor()
        self.display.print_factor_summary(handle.stats.to_dict())

    def cmd_solve(self, args: list[str]) -> None:
        report = self.controller.solve(args[0] if args else "manufactured")
        self.display.print_solve(report.to_dict())

    def cmd_precond(self, args: list[str]) -> None:
        report = self.controller.precond(args[0] if args else "htree")
        self.display.print_precond(report.to_dict())

    def cmd_stats(self, args: list[str]) -> None:
        if self.controller.factorization is None:
            self.display.print_error("Nothing factorized yet. Use 'factor' first.")
            return
        self.display.print_factor_summary(self.controller.factorization.stats.to_dict())

    def cmd_trace(self, args: list[str]) -> None:
        recorder = self.controller.trace()
        if args and args[0] == "dot":
            self.display.console.print(recorder.to_dot(), highlight=False)
            return
        for step in recorder.summary():
            partners = f" -> {', '.join(step['partners'])}" if step["partners"] else ""
            node = step["node"] or f"level {step['level']}"
            self.display.console.print(f"  {step['action']:<9} {node}{partners}", highlight=False)

    def cmd_config(self, args: list[str]) -> None:
        if not args:
            settings = asdict(self.controller.config)
            settings.update({f"gmres.{k}": v for k, v in asdict(self.controller.gmres).items()})
            self.display.print_mapping("Configuration", settings)
            return
        if len(args) != 2:
            self.display.print_error("Usage: config <key> <value>")
            return
        key, value = args
        target = self.controller.gmres if key.startswith("gmres.") else self.controller.config
        name = key.removeprefix("gmres.")
        if name not in {f.name for f in fields(target)}:
            raise ConfigError(f"unknown setting {key!r}")
        try:
            converted = _CONVERTERS[name](value)
        except ValueError:
            raise ConfigError(f"bad value {value!r} for {key}")
        updated = replace(target, **{name: converted})
        if isinstance(updated, GmresConfig):
            self.controller.gmres = updated
        else:
            self.controller.config = updated
            self.controller.factorization = None
        self.display.print_info(f"{key} = {converted}")

    def cmd_help(self, args: list[str]) -> None:
        self.display.print_help(COMMANDS)

    def cmd_quit(self, args: list[str]) -> None:
        self.display.console.print("[cyan]Goodbye![/cyan]")
        self.running = False


# ========== One-shot commands ==========


def _emit(args: argparse.Namespace, payload: Any, rows: list[dict[str, Any]] | None = None) -> None:
    """Write the report as JSON, or as CSV when rows are given and requested."""
    if args.out == "csv":
        text = rows_to_csv(rows if rows is not None else [payload])
    else:
        text = to_json(payload)
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _controller(args: argparse.Namespace) -> SolverController:
    config = FactorConfig(
        epsilon=args.eps,
        rule=args.rule,
        depth=args.depth,
        target_leaf=args.target_leaf,
        seed=args.seed,
        instrument=args.instrument,
        separation=args.separation,
        partitioner=args.partitioner,
    )
    controller = SolverController(config)
    if hasattr(args, "tol"):
        controller.gmres = GmresConfig(args.tol, args.max_iters, args.restart)
    if getattr(args, "gen", None) or getattr(args, "mtx", None):
        controller.load(gen=args.gen, mtx=args.mtx)
    return controller


def _factor_extras(args: argparse.Namespace, controller: SolverController) -> None:
    if getattr(args, "trace", None):
        Path(args.trace).write_text(controller.trace().to_json())
    if getattr(args, "export_partition", None):
        controller.export_partition(args.export_partition)


def cmd_solve(args: argparse.Namespace, display: DisplayManager) -> ExitCode:
    """Stand-alone solve of one matrix."""
    controller = _controller(args)
    _factor_extras(args, controller)
    report = controller.solve(args.rhs).to_dict()
    display.print_solve(report)
    _emit(args, report)
    return ExitCode.SUCCESS


def cmd_precond(args: argparse.Namespace, display: DisplayManager) -> ExitCode:
    """GMRES with a chosen left preconditioner."""
    controller = _controller(args)
    if args.precond == "htree":
        _factor_extras(args, controller)
    report = controller.precond(args.precond, args.rhs, args.ilu_fill, args.ilu_drop)
    data = report.to_dict()
    display.print_precond(data)
    if args.history:
        Path(args.history).write_text(history_csv(report.history))
    _emit(args, data)
    if not report.converged:
        display.print_warning(
            f"GMRES stopped after {report.iterations} iterations without converging"
        )
        return ExitCode.NOT_CONVERGED
    return ExitCode.SUCCESS


def cmd_scaling(args: argparse.Namespace, display: DisplayManager) -> ExitCode:
    """Stand-alone solves over a size ladder of one generator family."""
    controller = _controller(args)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    rows = controller.scaling(args.family, sizes)
    display.print_rows("Scaling", rows)
    config = asdict(controller.config)
    args.out = args.out or "csv"
    _emit(args, {"config": config, "rows": rows}, [{**config, **row} for row in rows])
    return ExitCode.SUCCESS


def cmd_sweep(args: argparse.Namespace, display: DisplayManager) -> ExitCode:
    """One solve per epsilon on the same matrix."""
    controller = _controller(args)
    epsilons = [float(e) for e in args.eps_list.split(",") if e]
    rows = controller.sweep(epsilons, args.precond_mode)
    display.print_rows("Epsilon sweep", rows)
    config = asdict(controller.config)
    _emit(args, {"config": config, "gmres": asdict(controller.gmres), "rows": rows},
          [{**config, **row} for row in rows])
    return ExitCode.SUCCESS


def cmd_trace(args: argparse.Namespace, display: DisplayManager) -> ExitCode:
    """Step-by-step factorization dump of a tiny instance."""
    controller = _controller(args)
    recorder = controller.trace()
    if args.format == "dot":
        text = recorder.to_dot()
    else:
        text = recorder.to_json(snapshots=not args.summary)
    if args.report:
        Path(args.report).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    display.print_info(f"Recorded {len(recorder.steps)} steps")
    return ExitCode.SUCCESS


def _add_common(parser: argparse.ArgumentParser, source: bool = True) -> None:
    if source:
        group = parser.add_mutually_exclusive_group(required=True)
        group.add_argument("--gen", help="generator spec, e.g. poisson2d:64 or vcp:16,case=1")
        group.add_argument("--mtx", help="Matrix Market file")
    parser.add_argument("--eps", type=float, default=DEFAULT_EPSILON, help="low-rank precision")
    parser.add_argument("--rule", choices=sorted(RULES), default="relsigma")
    parser.add_argument("--depth", type=int, default=None, help="tree depth (overrides --target-leaf)")
    parser.add_argument("--target-leaf", type=int, default=DEFAULT_TARGET_LEAF)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--partitioner", choices=PARTITIONERS, default="bisection")
    parser.add_argument("--separation", type=int, default=DEFAULT_SEPARATION)
    parser.add_argument("--instrument", action="store_true", help="check distances of created edges")
    parser.add_argument("--out", choices=("json", "csv"), default=None)
    parser.add_argument("--report", help="write the report here instead of stdout")


def _add_gmres(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=float, default=GMRES_TOLERANCE)
    parser.add_argument("--max-iters", type=int, default=GMRES_MAX_ITERS)
    parser.add_argument("--restart", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hlu",
        description="Hierarchical LU factorization of sparse matrices",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  hlu                                              # Start interactive shell
  hlu solve --gen poisson2d:128 --eps 1e-4         # Stand-alone solve
  hlu precond --gen vcp:16,case=1 --eps 1e-1       # Preconditioned GMRES
  hlu scaling --family poisson2d --sizes 64,128,256
  hlu trace --gen ring:16 --partitioner contiguous --depth 3 --summary
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command")

    solve = sub.add_parser("solve", help="stand-alone direct solve")
    _add_common(solve)
    solve.add_argument("--rhs", default="manufactured", help="manufactured, ones, random or a file")
    solve.add_argument("--trace", help="also write the step trace (n <= 64) here")
    solve.add_argument("--export-partition", help="write the nested partitioning as JSON")
    solve.set_defaults(func=cmd_solve)

    precond = sub.add_parser("precond", help="preconditioned GMRES")
    _add_common(precond)
    _add_gmres(precond)
    precond.add_argument("--precond", choices=PRECONDITIONERS, default="htree")
    precond.add_argument("--ilu-fill", type=float, default=10.0)
    precond.add_argument("--ilu-drop", type=float, default=None)
    precond.add_argument("--rhs", default="manufactured")
    precond.add_argument("--history", help="write the residual history CSV here")
    precond.add_argument("--trace", help="also write the step trace (n <= 64) here")
    precond.add_argument("--export-partition", help="write the nested partitioning as JSON")
    precond.set_defaults(func=cmd_precond)

    scaling = sub.add_parser("scaling", help="timings over a size ladder")
    _add_common(scaling, source=False)
    scaling.add_argument("--family", default="poisson2d", help="generator name")
    scaling.add_argument("--sizes", required=True, help="comma-separated grid sizes")
    scaling.set_defaults(func=cmd_scaling)

    sweep = sub.add_parser("sweep", help="accuracy over a list of epsilons")
    _add_common(sweep)
    _add_gmres(sweep)
    sweep.add_argument("--eps-list", default="1e-2,1e-4,1e-6,1e-8")
    sweep.add_argument("--precond-mode", action="store_true", help="use the factorization in GMRES")
    sweep.set_defaults(func=cmd_sweep)

    trace = sub.add_parser("trace", help="step trace of a tiny factorization")
    _add_common(trace)
    trace.add_argument("--format", choices=("json", "dot"), default="json")
    trace.add_argument("--summary", action="store_true", help="omit graph snapshots")
    trace.set_defaults(func=cmd_trace)

    sub.add_parser("shell", help="interactive shell (default)")
    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse arguments and run one command; returns the exit code."""
    args = build_parser().parse_args(argv)
    display = DisplayManager()
    configure_logging(display, args.verbose)

    if args.command in (None, "shell"):
        try:
            HluREPL(display=display).run()
        except KeyboardInterrupt:
            display.console.print("\nInterrupted")
        return ExitCode.SUCCESS

    try:
        return int(args.func(args, display))
    except (HluError, OSError) as e:
        display.print_error(str(e))
        logger.debug("Command failed", exc_info=True)
        return ExitCode.FAILURE


def main() -> None:
    """Entry point for the hlu command."""
    sys.exit(run())


if __name__ == "__main__":
    main()
