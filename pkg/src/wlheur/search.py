"""Greedy best-first search and the heuristics it is run with."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ForeignAtomError
from .ilg import build_state_ilg
from .models import Bundle, GPModel
from .pddl import GroundAction, LiftedTask, SuccessorGenerator, ground_actions

log = logging.getLogger(__name__)

INFINITY = math.inf

SOLVED = "SOLVED"
EXHAUSTED = "EXHAUSTED"
TIMEOUT = "TIMEOUT"
RESOURCE_LIMIT = "RESOURCE_LIMIT"

DEFAULT_TIME_LIMIT = 1800.0
BYTES_PER_NODE = 1000
DEFAULT_NODE_CAP = 8 * 10**9 // BYTES_PER_NODE

Heuristic = Callable[[frozenset], float]


@dataclass(frozen=True)
class SearchLimits:
    time_limit: float = DEFAULT_TIME_LIMIT
    max_nodes: int = DEFAULT_NODE_CAP  # stored states
    max_expansions: int | None = None


@dataclass
class SearchResult:
    status: str
    plan: list[GroundAction] | None
    stats: dict = field(default_factory=dict)

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    @property
    def cost(self) -> float:
        return float(sum(a.cost for a in self.plan)) if self.plan is not None else INFINITY


def gbfs(task: LiftedTask, heuristic: Heuristic, limits: SearchLimits = SearchLimits(),
         actions: Sequence[GroundAction] | None = None) -> SearchResult:
    """Eager greedy best-first search ordered by h alone.

    Ties go to the earlier-inserted state; a state is evaluated once and
    never re-opened; states with infinite h are never queued; the goal test
    happens when a state is popped.
    """
    start = time.perf_counter()
    if actions is None:
        actions = ground_actions(task)
    succ = SuccessorGenerator(actions)
    goal = task.goal
    stats = {"expansions": 0, "evaluations": 0, "generated": 0, "peak_open": 0,
             "closed": 0, "dead_ends": 0}
    parent: dict[frozenset, tuple[frozenset, GroundAction] | None] = {}
    open_list: list = []
    counter = 0

    def finish(status, plan=None):
        stats["wall_time"] = time.perf_counter() - start
        stats["stored"] = len(parent)
        return SearchResult(status, plan, stats)

    s0 = task.init
    h0 = heuristic(s0)
    stats["evaluations"] += 1
    stats["initial_h"] = h0
    std = getattr(heuristic, "last_std", None)
    if std is not None:
        stats["initial_std"] = std
    parent[s0] = None
    if h0 != INFINITY:
        heapq.heappush(open_list, (h0, counter, s0))
        counter += 1
    else:
        stats["dead_ends"] += 1
    closed: set = set()

    while open_list:
        if time.perf_counter() - start >= limits.time_limit:
            return finish(TIMEOUT)
        stats["peak_open"] = max(stats["peak_open"], len(open_list))
        _, _, s = heapq.heappop(open_list)
        if goal <= s:
            plan = []
            while parent[s] is not None:
                prev, a = parent[s]
                plan.append(a)
                s = prev
            return finish(SOLVED, plan[::-1])
        closed.add(s)
        stats["closed"] = len(closed)
        if limits.max_expansions is not None and stats["expansions"] >= limits.max_expansions:
            return finish(RESOURCE_LIMIT)
        stats["expansions"] += 1
        for a, t in succ.successors(s):
            stats["generated"] += 1
            if t in parent:
                continue
            if len(parent) >= limits.max_nodes:
                return finish(RESOURCE_LIMIT)
            parent[t] = (s, a)
            h = heuristic(t)
            stats["evaluations"] += 1
            if h == INFINITY:
                stats["dead_ends"] += 1
                continue
            heapq.heappush(open_list, (h, counter, t))
            counter += 1
    if time.perf_counter() - start >= limits.time_limit:
        return finish(TIMEOUT)
    return finish(EXHAUSTED)


# ---------------------------------------------------------------------------
# baseline heuristics


def h_blind(task: LiftedTask) -> Heuristic:
    return lambda state: 0.0


def h_goal_count(task: LiftedTask) -> Heuristic:
    goal = task.goal
    return lambda state: float(len(goal - state))


class DeleteRelaxation:
    """h_add and h_FF over the delete-free relaxation of the ground task.

    The additive fixpoint is computed by a Dijkstra-style sweep over atoms.
    FF backchains from the goals through best supporters: for each atom the
    achiever with the smallest additive cost, ties to the lowest action index.
    """

    def __init__(self, task: LiftedTask, mode: str = "ff",
                 actions: Sequence[GroundAction] | None = None):
        if mode not in ("add", "ff"):
            raise ValueError(f"mode must be 'add' or 'ff', got {mode!r}")
        self.mode = mode
        self.goal = tuple(sorted(task.goal))
        self.actions = list(ground_actions(task) if actions is None else actions)
        self.pre = [tuple(a.pre) for a in self.actions]
        self.cost = [a.cost for a in self.actions]
        self.consumers: dict = {}
        self.achievers: dict = {}
        for i, a in enumerate(self.actions):
            for p in a.pre:
                self.consumers.setdefault(p, []).append(i)
            for q in a.add:
                self.achievers.setdefault(q, []).append(i)
        self.adds = [tuple(sorted(a.add)) for a in self.actions]

    def atom_costs(self, state: frozenset) -> tuple[dict, list]:
        """Additive cost of every relaxed-reachable atom and of every action."""
        dist = {p: 0.0 for p in state}
        heap = [(0.0, p) for p in sorted(state)]
        heapq.heapify(heap)
        missing = [len(p) for p in self.pre]
        acc = [0.0] * len(self.actions)
        act_cost = [INFINITY] * len(self.actions)
        done = set()

        def fire(i):
            c = acc[i] + self.cost[i]
            act_cost[i] = c
            for q in self.adds[i]:
                if c < dist.get(q, INFINITY):
                    dist[q] = c
                    heapq.heappush(heap, (c, q))

        for i, m in enumerate(missing):
            if m == 0:
                fire(i)
        while heap:
            d, p = heapq.heappop(heap)
            if p in done or d > dist[p]:
                continue
            done.add(p)
            for i in self.consumers.get(p, ()):
                acc[i] += d
                missing[i] -= 1
                if missing[i] == 0:
                    fire(i)
        return dist, act_cost

    def __call__(self, state: frozenset) -> float:
        dist, act_cost = self.atom_costs(state)
        if any(g not in dist for g in self.goal):
            return INFINITY
        if self.mode == "add":
            return float(sum(dist[g] for g in self.goal))
        relaxed_plan: set[int] = set()
        stack = [g for g in self.goal if g not in state]
        seen = set(stack)
        while stack:
            p = stack.pop()
            best = min((i for i in self.achievers.get(p, ()) if act_cost[i] < INFINITY),
                       key=lambda i: (act_cost[i], i))
            if best in relaxed_plan:
                continue
            relaxed_plan.add(best)
            for q in self.pre[best]:
                if q not in state and q not in seen:
                    seen.add(q)
                    stack.append(q)
        return float(sum(self.cost[i] for i in relaxed_plan))


def h_delete_relaxation(task: LiftedTask, mode: str = "ff",
                        actions: Sequence[GroundAction] | None = None) -> Heuristic:
    return DeleteRelaxation(task, mode, actions)


# ---------------------------------------------------------------------------
# learned heuristic


class LearnedHeuristic:
    """State -> ILG -> colour counts -> regressor estimate, clamped at 0.

    For GP bundles the mean is the estimate and the standard deviation of the
    last evaluation is kept in ``last_std``.
    """

    def __init__(self, bundle: Bundle, task: LiftedTask):
        self.bundle = bundle
        self.task = task
        self.is_gp = isinstance(bundle.model, GPModel)
        self.last_std: float | None = None
        self.unseen_warnings = 0

    def raw(self, state: frozenset) -> float:
        x = self.bundle.featurize(build_state_ilg(self.task, state))
        if self.is_gp:
            mean, std = self.bundle.model.predict(x, return_std=True)
            self.last_std = float(std[0])
            return float(mean[0])
        return float(self.bundle.model.predict(x)[0])

    def __call__(self, state: frozenset) -> float:
        try:
            value = self.raw(state)
        except ForeignAtomError as exc:
            log.warning("treating state as a dead end: %s", exc)
            return INFINITY
        if not np.isfinite(value):
            return INFINITY
        return max(0.0, value)


def learned_heuristic(bundle: Bundle, task: LiftedTask) -> LearnedHeuristic:
    return LearnedHeuristic(bundle, task)


BASELINES = {
    "blind": h_blind,
    "goal-count": h_goal_count,
    "add": lambda task, actions=None: h_delete_relaxation(task, "add", actions),
    "ff": lambda task, actions=None: h_delete_relaxation(task, "ff", actions),
}


def make_heuristic(name: str, task: LiftedTask, actions=None, bundle: Bundle | None = None) -> Heuristic:
    if bundle is not None:
        return learned_heuristic(bundle, task)
    if name in ("add", "ff"):
        return BASELINES[name](task, actions)
    if name in BASELINES:
        return BASELINES[name](task)
    raise ValueError(f"unknown heuristic {name!r}; choose from {', '.join(BASELINES)} or a model bundle")
