"""
Step recorder for small factorizations.

Records one step per merge (per level), compression and elimination with a
snapshot of the active graph, and renders them as JSON or Graphviz DOT.
"""

import json
from dataclasses import asdict, dataclass, field
from typing import Any

from .core import TRACE_MAX_N
from .errors import TraceRefusedError
from .htree import HNode, HTree


@dataclass
class TraceStep:
    index: int
    action: str
    level: int
    node: str | None = None
    partners: list[str] = field(default_factory=list)
    nodes: list[dict[str, Any]] = field(default_factory=list)
    edges: list[list[str]] = field(default_factory=list)

    def summary(self) -> dict[str, Any]:
        """The step without its graph snapshot."""
        return {
            "action": self.action,
            "level": self.level,
            "node": self.node,
            "partners": self.partners,
        }


class TraceRecorder:
    """Collects factorization steps of one run."""

    def __init__(self, n: int, max_n: int = TRACE_MAX_N) -> None:
        if n > max_n:
            raise TraceRefusedError(f"tracing is limited to n <= {max_n}, got n={n}")
        self.steps: list[TraceStep] = []

    def _record(
        self, tree: HTree, action: str, level: int, node: HNode | None = None,
        partners: list[HNode] | None = None,
    ) -> None:
        active = tree.active_nodes()
        names = {n: n.name for n in active}
        edges = sorted(
            [names[e.source], names[e.target]]
            for e in tree.edges(active_only=True)
            if e.source in names and e.target in names and e.source is not e.target
        )
        self.steps.append(
            TraceStep(
                index=len(self.steps),
                action=action,
                level=level,
                node=node.name if node is not None else None,
                partners=[p.name for p in partners or []],
                nodes=[{"name": n.name, "kind": n.kind.value, "size": n.size} for n in active],
                edges=edges,
            )
        )

    def merge(self, tree: HTree, level: int) -> None:
        self._record(tree, "merge", level)

    def compress(self, tree: HTree, node: HNode, partners: list[HNode]) -> None:
        self._record(tree, "compress", node.level, node, partners)

    def eliminate(self, tree: HTree, node: HNode) -> None:
        self._record(tree, "eliminate", node.level, node)

    def summary(self) -> list[dict[str, Any]]:
        return [step.summary() for step in self.steps]

    def to_json(self, snapshots: bool = True) -> str:
        if snapshots:
            return json.dumps([asdict(step) for step in self.steps], indent=2)
        return json.dumps(self.summary(), indent=2)

    def to_dot(self) -> str:
        """One digraph per step."""
        graphs = []
        for step in self.steps:
            label = f"{step.index}: {step.action} {step.node or ''}".strip()
            lines = [f'digraph step{step.index} {{', f'  label="{label}";']
            for node in step.nodes:
                shape = {"red": "circle", "black": "box", "super": "doublecircle"}[node["kind"]]
                lines.append(f'  "{node["name"]}" [shape={shape}, xlabel="{node["size"]}"];')
            for source, target in step.edges:
                lines.append(f'  "{source}" -> "{target}";')
            lines.append("}")
            graphs.append("\n".join(lines))
        return "\n\n".join(graphs)
