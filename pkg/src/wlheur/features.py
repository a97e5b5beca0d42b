"""Feature pipeline settings shared by training, bundles and the learned heuristic."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import InputError
from .ilg import ColouredGraph
from .lwl import DEFAULT_MEM_CAP, LOCAL, VARIANTS, collect_colours_2lwl, featurize_2lwl
from .wl import ColourTable, collect_colours, featurize

DEFAULT_ITERATIONS = 4


@dataclass(frozen=True)
class FeatureConfig:
    iterations: int = DEFAULT_ITERATIONS
    algorithm: str = "wl"  # "wl" or "2lwl"
    variant: str = LOCAL  # 2-LWL neighbourhood, ignored for "wl"
    mem_cap: int = DEFAULT_MEM_CAP

    def __post_init__(self):
        if self.iterations < 0:
            raise InputError("iterations must be >= 0")
        if self.algorithm not in ("wl", "2lwl"):
            raise InputError(f"unknown feature algorithm {self.algorithm!r}")
        if self.variant not in VARIANTS:
            raise InputError(f"unknown 2-LWL variant {self.variant!r}")

    def collect(self, graphs: Sequence[ColouredGraph]) -> ColourTable:
        if self.algorithm == "wl":
            return collect_colours(graphs, self.iterations)
        return collect_colours_2lwl(graphs, self.iterations, self.variant, self.mem_cap)

    def featurize(self, graph: ColouredGraph, table: ColourTable) -> np.ndarray:
        if self.algorithm == "wl":
            return featurize(graph, table, self.iterations)
        return featurize_2lwl(graph, table, self.iterations, self.variant, self.mem_cap)

    def featurize_many(self, graphs: Sequence[ColouredGraph], table: ColourTable) -> np.ndarray:
        if not graphs:
            return np.zeros((0, len(table)), dtype=np.int64)
        return np.vstack([self.featurize(g, table) for g in graphs])

    def to_dict(self) -> dict:
        return asdict(self)
