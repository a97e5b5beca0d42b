"""Edge-labelled Weisfeiler-Leman colour refinement and histogram features.

A node's refined colour is the table id of ``(previous colour, sorted
multiset of (neighbour colour, edge label))``. The :class:`ColourTable` is the
injective hash: it hands out dense ids in first-appearance order while open
and returns :data:`ABSENT` for unknown definitions once frozen. ABSENT is
sticky for the node and never counted.
"""

from __future__ import annotations

import hashlib
import json
from typing import Hashable, Iterable, Sequence

import networkx as nx
import numpy as np

from .errors import InputError
from .ilg import ColouredGraph, colour_text

ABSENT = -1
TABLE_FORMAT = "wlheur-colour-table"
TABLE_VERSION = 1

_INIT = "i"
_REFINED = "r"


def _freeze(obj):
    if isinstance(obj, list):
        return tuple(_freeze(x) for x in obj)
    return obj


class ColourTable:
    """Bijection between compact colour ids and colour definitions."""

    def __init__(self, kind: str = "wl"):
        self.kind = kind
        self.frozen = False
        self._ids: dict[tuple, int] = {}
        self._defs: list[tuple] = []

    def __len__(self) -> int:
        return len(self._defs)

    def __eq__(self, other) -> bool:
        return (isinstance(other, ColourTable) and self.kind == other.kind
                and self._defs == other._defs)

    def lookup(self, key: tuple) -> int:
        cid = self._ids.get(key)
        if cid is not None:
            return cid
        if self.frozen:
            return ABSENT
        cid = len(self._defs)
        self._ids[key] = cid
        self._defs.append(key)
        return cid

    def initial(self, colour: Hashable) -> int:
        return self.lookup((_INIT, colour))

    def refined(self, prior: int, multiset: tuple) -> int:
        return self.lookup((_REFINED, prior, multiset))

    def freeze(self) -> "ColourTable":
        self.frozen = True
        return self

    def definition(self, cid: int) -> tuple:
        """``("i", colour)`` or ``("r", prior_id, multiset)``."""
        return self._defs[cid]

    def find(self, key: tuple) -> int:
        return self._ids.get(key, ABSENT)

    def describe(self, cid: int) -> str:
        d = self._defs[cid]
        if d[0] == _INIT:
            return colour_text(d[1])
        inner = ", ".join(f"(c{x[0]},{x[1]})" if isinstance(x, tuple) else f"c{x}" for x in d[2])
        return f"(c{d[1]}, {{{{{inner}}}}})"

    # serialization

    def to_dict(self) -> dict:
        defs = []
        for d in self._defs:
            if d[0] == _INIT:
                defs.append({"init": d[1]})
            else:
                defs.append({"prior": d[1], "multiset": d[2]})
        return {"format": TABLE_FORMAT, "version": TABLE_VERSION, "kind": self.kind, "definitions": defs}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ColourTable":
        if data.get("format") != TABLE_FORMAT:
            raise InputError("not a colour table")
        if data.get("version") != TABLE_VERSION:
            raise InputError(f"unsupported colour table version {data.get('version')}")
        table = cls(data["kind"])
        for d in data["definitions"]:
            if "init" in d:
                table.lookup((_INIT, _freeze(d["init"])))
            else:
                table.lookup((_REFINED, int(d["prior"]), _freeze(d["multiset"])))
        return table.freeze()

    @classmethod
    def from_json(cls, text: str) -> "ColourTable":
        return cls.from_dict(json.loads(text))

    def checksum(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def wl_refine(graph: ColouredGraph, iterations: int, table: ColourTable) -> list[list[int]]:
    """Colour ids of every node for iterations ``0..iterations``."""
    if iterations < 0:
        raise InputError("iterations must be >= 0")
    adj = graph.adjacency()
    cur = [table.initial(c) for c in graph.colours]
    rows = [cur]
    for _ in range(iterations):
        nxt = []
        for v, nbrs in enumerate(adj):
            prior = cur[v]
            if prior == ABSENT:
                nxt.append(ABSENT)
                continue
            ms = tuple(sorted([(cur[u], lab) for u, lab in nbrs]))
            nxt.append(table.refined(prior, ms))
        cur = nxt
        rows.append(cur)
    return rows


def histogram(rows: Iterable[Sequence[int]], size: int) -> np.ndarray:
    ids = [c for row in rows for c in row if c != ABSENT]
    return np.bincount(np.asarray(ids, dtype=np.int64), minlength=size)[:size].astype(np.int64)


def collect_colours(graphs: Iterable[ColouredGraph], iterations: int) -> ColourTable:
    """Colour table of everything seen on ``graphs`` over iterations ``0..L``, frozen."""
    table = ColourTable("wl")
    for g in graphs:
        wl_refine(g, iterations, table)
    return table.freeze()


def featurize(graph: ColouredGraph, table: ColourTable, iterations: int) -> np.ndarray:
    """Counts of each known colour; unseen colours are dropped."""
    if not table.frozen:
        raise InputError("featurize needs a frozen colour table")
    return histogram(wl_refine(graph, iterations, table), len(table))


def colour_multiset(rows: Sequence[Sequence[int]]) -> dict[int, int]:
    out: dict[int, int] = {}
    for row in rows:
        for c in row:
            out[c] = out.get(c, 0) + 1
    return out


def colour_dag(table: ColourTable) -> nx.DiGraph:
    """Derivation graph: an edge ``k -> k'`` when ``k`` appears in the definition of ``k'``."""
    dag = nx.DiGraph()
    for cid in range(len(table)):
        d = table.definition(cid)
        dag.add_node(cid, label=f"c{cid}", definition=table.describe(cid),
                     initial=d[0] == _INIT)
        if d[0] == _REFINED:
            dag.add_edge(d[1], cid)
            for x in d[2]:
                dag.add_edge(x[0] if isinstance(x, tuple) else x, cid)
    return dag


def write_dag(dag: nx.DiGraph, path) -> None:
    nx.write_graphml(dag, path)
