"""2-LWL: colour refinement over unordered pairs of distinct nodes.

The initial colour of ``{u, v}`` is the sorted pair of endpoint colours
together with the sorted labels of edges joining them (empty when
non-adjacent). Each round hashes a pair's colour with the multiset of colours
of the pairs obtained by replacing one endpoint by a third node ``w``:
``{w, v}`` and ``{u, w}``. Both replacements go into one unordered multiset.
The ``local`` variant only takes ``w`` adjacent to the replaced endpoint;
``global`` takes every ``w``.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .errors import InputError, ResourceLimitError
from .ilg import ColouredGraph
from .wl import ABSENT, ColourTable, histogram

LOCAL = "local"
GLOBAL = "global"
VARIANTS = (LOCAL, GLOBAL)

BYTES_PER_PAIR = 1024  # dict entry + key tuple + colour lists, measured loosely on CPython
BYTES_PER_NEIGHBOUR = 8
DEFAULT_MEM_CAP = 8 * 10**9


def estimate_bytes(graph: ColouredGraph, variant: str = LOCAL) -> int:
    n = graph.n_nodes
    n_pairs = n * (n - 1) // 2
    if variant == GLOBAL:
        neighbours = n_pairs * 2 * max(n - 2, 0)
    else:
        degree = [0] * n
        for u, v, _ in graph.edges:
            degree[u] += 1
            degree[v] += 1
        neighbours = (n - 1) * sum(degree)
    return n_pairs * BYTES_PER_PAIR + neighbours * BYTES_PER_NEIGHBOUR


def _pairs_and_neighbours(graph: ColouredGraph, variant: str):
    n = graph.n_nodes
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    index = {p: i for i, p in enumerate(pairs)}

    def pid(a, b):
        return index[(a, b) if a < b else (b, a)]

    if variant == GLOBAL:
        cand = [[w for w in range(n)] for _ in range(n)]
    else:
        cand = [sorted({w for w, _ in nbrs}) for nbrs in graph.adjacency()]
    neighbours = []
    for u, v in pairs:
        ids = [pid(w, v) for w in cand[u] if w != u and w != v]
        ids += [pid(u, w) for w in cand[v] if w != u and w != v]
        neighbours.append(ids)
    return pairs, neighbours


def lwl2_refine(graph: ColouredGraph, iterations: int, table: ColourTable,
                variant: str = LOCAL, mem_cap: int = DEFAULT_MEM_CAP):
    """Return ``(pairs, rows)``; ``rows[j][i]`` is the colour of ``pairs[i]`` at round j."""
    if variant not in VARIANTS:
        raise InputError(f"unknown 2-LWL variant {variant!r}")
    if iterations < 0:
        raise InputError("iterations must be >= 0")
    need = estimate_bytes(graph, variant)
    if need > mem_cap:
        raise ResourceLimitError(
            f"2-LWL on {graph.n_nodes} nodes needs about {need} bytes, cap is {mem_cap}")

    pairs, neighbours = _pairs_and_neighbours(graph, variant)
    joining: dict[tuple[int, int], list[int]] = {}
    for u, v, lab in graph.edges:
        joining.setdefault((min(u, v), max(u, v)), []).append(lab)
    colours = graph.colours
    cur = []
    for u, v in pairs:
        ends = tuple(sorted((colours[u], colours[v]), key=repr))
        labels = tuple(sorted(joining.get((u, v), ())))
        cur.append(table.initial((ends, labels)))
    rows = [cur]
    for _ in range(iterations):
        nxt = []
        for i, nb in enumerate(neighbours):
            prior = cur[i]
            if prior == ABSENT:
                nxt.append(ABSENT)
                continue
            nxt.append(table.refined(prior, tuple(sorted([cur[j] for j in nb]))))
        cur = nxt
        rows.append(cur)
    return pairs, rows


def table_kind(variant: str) -> str:
    return f"2lwl-{variant}"


def collect_colours_2lwl(graphs: Iterable[ColouredGraph], iterations: int,
                         variant: str = LOCAL, mem_cap: int = DEFAULT_MEM_CAP) -> ColourTable:
    table = ColourTable(table_kind(variant))
    for g in graphs:
        lwl2_refine(g, iterations, table, variant, mem_cap)
    return table.freeze()


def featurize_2lwl(graph: ColouredGraph, table: ColourTable, iterations: int,
                   variant: str = LOCAL, mem_cap: int = DEFAULT_MEM_CAP) -> np.ndarray:
    if not table.frozen:
        raise InputError("featurize needs a frozen colour table")
    _, rows = lwl2_refine(graph, iterations, table, variant, mem_cap)
    return histogram(rows, len(table))
