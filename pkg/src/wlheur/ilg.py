"""Instance learning graphs: objects and the atoms of ``s | G`` as coloured nodes.

Object nodes get the colour ``("ob",)``. An atom node ``P(o1..ok)`` gets
``(status, P)`` with status ``ag`` (in s and G), ``ap`` (in s only) or ``ug``
(in G only), and one edge to each argument labelled by its 0-based position.
A repeated argument yields parallel edges with distinct labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

from .errors import ForeignAtomError
from .pddl import LiftedTask, atom_str

OBJECT = ("ob",)
ACHIEVED = "ap"
UNACHIEVED_GOAL = "ug"
ACHIEVED_GOAL = "ag"


@dataclass(frozen=True)
class ColouredGraph:
    """Undirected multigraph with initial node colours and integer edge labels."""

    colours: tuple[Hashable, ...]
    edges: tuple[tuple[int, int, int], ...]  # (u, v, label)
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        n = len(self.colours)
        for u, v, _ in self.edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) references a missing node")

    @property
    def n_nodes(self) -> int:
        return len(self.colours)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per node, the list of ``(neighbour, label)`` over incident edges."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.colours]
        for u, v, lab in self.edges:
            adj[u].append((v, lab))
            adj[v].append((u, lab))
        return adj

    def permuted(self, perm: Sequence[int]) -> "ColouredGraph":
        """Relabel node ``i`` as ``perm[i]``."""
        colours = [None] * len(perm)
        for i, p in enumerate(perm):
            colours[p] = self.colours[i]
        edges = tuple((perm[u], perm[v], lab) for u, v, lab in self.edges)
        return ColouredGraph(tuple(colours), edges)


def build_state_ilg(task: LiftedTask, state: frozenset) -> ColouredGraph:
    """ILG of ``state`` paired with the task's goal."""
    preds = task.predicates
    index = {o: i for i, o in enumerate(task.objects)}
    for atom in state:
        p = preds.get(atom[0])
        if p is None or p.arity != len(atom) - 1 or any(a not in index for a in atom[1:]):
            raise ForeignAtomError(f"atom {atom_str(atom)} is not over the task's predicates and objects")

    colours: list = [OBJECT] * len(task.objects)
    names = list(task.objects)
    edges = []
    goal = task.goal
    for atom in sorted(state | goal):
        node = len(colours)
        if atom in state:
            status = ACHIEVED_GOAL if atom in goal else ACHIEVED
        else:
            status = UNACHIEVED_GOAL
        colours.append((status, atom[0]))
        names.append(atom_str(atom))
        for pos, obj in enumerate(atom[1:]):
            edges.append((node, index[obj], pos))
    return ColouredGraph(tuple(colours), tuple(edges), tuple(names))


def build_ilg(task: LiftedTask) -> ColouredGraph:
    return build_state_ilg(task, task.init)


def colour_text(colour) -> str:
    if isinstance(colour, tuple):
        return ":".join(str(c) for c in colour)
    return str(colour)


def dump_graph(graph: ColouredGraph) -> str:
    """``id colour`` node lines followed by ``u v label`` edge lines."""
    lines = [f"{i} {colour_text(c)}" for i, c in enumerate(graph.colours)]
    lines += [f"{u} {v} {lab}" for u, v, lab in graph.edges]
    return "\n".join(lines) + "\n"
