"""
Command definitions and auto-completion for the interactive shell.

Defines the shell commands with metadata and a prompt_toolkit completer for
command names, generator names, preconditioners and config keys.
"""

from dataclasses import dataclass, fields
from typing import Any, Iterable, List

from prompt_toolkit.completion import Completer, Completion
from prompt_toolkit.document import Document

from .factor import FactorConfig
from .krylov import PRECONDITIONERS, GmresConfig
from .problems import GENERATORS


@dataclass
class Command:
    """Command definition with metadata."""

    name: str
    aliases: List[str]
    description: str
    usage: str
    handler: str


COMMANDS = [
    Command("gen", ["g"], "Generate a benchmark matrix", "gen <name:params>", "cmd_gen"),
    Command("load", ["l"], "Load a Matrix Market file", "load <path.mtx>", "cmd_load"),
    Command("save", [], "Save the current matrix as Matrix Market", "save <path.mtx>", "cmd_save"),
    Command("factor", ["f"], "Factorize the current matrix", "factor", "cmd_factor"),
    Command(
        "solve", ["s"], "Stand-alone solve", "solve [manufactured|ones|random|<file>]", "cmd_solve"
    ),
    Command(
        "precond",
        ["p"],
        "Preconditioned GMRES",
        f"precond [{'|'.join(PRECONDITIONERS)}]",
        "cmd_precond",
    ),
    Command("stats", ["st"], "Show factorization statistics", "stats", "cmd_stats"),
    Command("trace", ["t"], "Step trace of a small factorization", "trace [json|dot]", "cmd_trace"),
    Command("config", ["c"], "Show or set a setting", "config [key value]", "cmd_config"),
    Command("help", ["h", "?"], "Show all available commands", "help", "cmd_help"),
    Command("quit", ["q", "exit"], "Exit the shell", "quit", "cmd_quit"),
]

CONFIG_KEYS = [f.name for f in fields(FactorConfig)] + [
    f"gmres.{f.name}" for f in fields(GmresConfig)
]


def get_command(name: str) -> Command | None:
    """Get command by name or alias.

    Args:
        name: Command name or alias

    Returns:
        Command object if found, None otherwise
    """
    for cmd in COMMANDS:
        if cmd.name == name or name in cmd.aliases:
            return cmd
    return None


def _argument_choices(command: str) -> Iterable[str]:
    cmd = get_command(command)
    if cmd is None:
        return []
    if cmd.name == "gen":
        return [f"{name}:" for name in sorted(GENERATORS)]
    if cmd.name == "precond":
        return PRECONDITIONERS
    if cmd.name == "solve":
        return ["manufactured", "ones", "random"]
    if cmd.name == "trace":
        return ["json", "dot"]
    if cmd.name == "config":
        return CONFIG_KEYS
    return []


class CommandCompleter(Completer):
    """Auto-completion for commands and their first argument."""

    def __init__(self) -> None:
        self._names = {cmd.name for cmd in COMMANDS}
        for cmd in COMMANDS:
            self._names.update(cmd.aliases)

    def get_completions(self, document: Document, complete_event) -> Any:  # type: ignore[no-untyped-def]
        """Yield completions for the text before the cursor."""
        text = document.text_before_cursor.lstrip()
        if not text:
            return
        parts = text.split()
        if text.endswith(" "):
            parts.append("")

        if len(parts) == 1:
            partial = parts[0].lower()
            for name in sorted(self._names):
                if name.startswith(partial):
                    yield Completion(name[len(partial) :], start_position=0, display=name)
        elif len(parts) == 2:
            partial = parts[1]
            for choice in _argument_choices(parts[0].lower()):
                if choice.startswith(partial):
                    yield Completion(choice[len(partial) :], start_position=0, display=choice)
