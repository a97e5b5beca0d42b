"""Desk-scale blocksworld learning experiment: oracle labels, GPR, GBFS vs blind."""

from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import blocksworld
from .features import FeatureConfig
from .ilg import build_state_ilg
from .models import Bundle, Hyperparameters, fit
from .pddl import ground_actions, parse_domain, parse_problem
from .plans import build_dataset, optimal_plan, validate_plan
from .search import SearchLimits, gbfs, h_blind, learned_heuristic


@dataclass(frozen=True)
class ExperimentConfig:
    train_blocks: tuple[int, ...] = (3, 4, 5, 6)
    train_per_size: int = 6
    test_blocks: tuple[int, ...] = (7,)
    test_per_size: int = 10
    kind: str = "gpr"
    iterations: int = 4
    time_limit: float = 60.0
    seed: int = 0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    n_train_tasks: int
    dataset_size: int
    n_colours: int
    train_mse: float
    train_seconds: float
    runs: dict = field(default_factory=dict)  # heuristic -> list of per-task records
    total_seconds: float = 0.0

    def coverage(self, heuristic: str) -> int:
        return sum(r["solved"] for r in self.runs[heuristic])

    def common_median_expansions(self, a: str, b: str) -> tuple[float, float]:
        both = [(x["expansions"], y["expansions"]) for x, y in zip(self.runs[a], self.runs[b])
                if x["solved"] and y["solved"]]
        if not both:
            return float("nan"), float("nan")
        return statistics.median(p for p, _ in both), statistics.median(q for _, q in both)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["coverage"] = {h: self.coverage(h) for h in self.runs}
        return out


def _problems(sizes, per_size, seed, tag):
    for n in sizes:
        for k in range(per_size):
            yield f"{tag}-{n}-{k}", blocksworld.generate_problem(n, seed * 7919 + n * 101 + k, f"{tag}-{n}-{k}")


def run_desk_experiment(cfg: ExperimentConfig = ExperimentConfig()) -> ExperimentResult:
    start = time.perf_counter()
    domain = parse_domain(blocksworld.DOMAIN)
    train_tasks = [parse_problem(text, domain) for _, text in
                   _problems(cfg.train_blocks, cfg.train_per_size, cfg.seed, "train")]
    pairs = []
    for task in train_tasks:
        plan = optimal_plan(task)
        if plan is not None:
            pairs.append((task, plan))
    dataset = build_dataset(pairs)

    t0 = time.perf_counter()
    features = FeatureConfig(iterations=cfg.iterations,
                             algorithm="2lwl" if cfg.kind == "2lwl-svr" else "wl")
    graphs = [build_state_ilg(ls.task, ls.state) for ls in dataset.states]
    table = features.collect(graphs)
    X = features.featurize_many(graphs, table).astype(np.float64)
    y = np.asarray(dataset.labels)
    hp = Hyperparameters(seed=cfg.seed)
    model = fit(cfg.kind, X, y, hp)
    train_seconds = time.perf_counter() - t0
    mse = float(np.mean((model.predict(X) - y) ** 2))
    bundle = Bundle(cfg.kind, model, table, features, hp)

    result = ExperimentResult(cfg, len(pairs), len(dataset), len(table), mse, train_seconds,
                              runs={"blind": [], "learned": []})
    limits = SearchLimits(time_limit=cfg.time_limit)
    for name, text in _problems(cfg.test_blocks, cfg.test_per_size, cfg.seed + 1, "test"):
        task = parse_problem(text, domain)
        actions = ground_actions(task)
        for h_name, h in (("blind", h_blind(task)), ("learned", learned_heuristic(bundle, task))):
            res = gbfs(task, h, limits, actions)
            rec = {"task": name, "status": res.status, "solved": res.solved,
                   "expansions": res.stats["expansions"]}
            if res.solved:
                rec["cost"] = validate_plan(task, res.plan)
            result.runs[h_name].append(rec)
    result.total_seconds = time.perf_counter() - start
    return result
