"""Plans as training data: parsing, validation, cost-to-go traces and an exact oracle."""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass
from heapq import heappop, heappush
from typing import Iterable, Sequence

from .errors import InputError, InvalidPlanError, ResourceLimitError, UnknownActionError
from .pddl import (
    GroundAction,
    LiftedTask,
    SuccessorGenerator,
    atom_str,
    ground_action,
    ground_actions,
)

UNSOLVABLE = math.inf
DEFAULT_MAX_EXPANSIONS = 10**6
DEFAULT_TIME_LIMIT = 1800.0


@dataclass(frozen=True)
class LabelledState:
    task: LiftedTask
    state: frozenset
    cost_to_go: float


@dataclass
class Dataset:
    states: list[LabelledState]
    task_index: list[int]  # index of each state's source task in ``tasks``
    tasks: list[LiftedTask]

    def __len__(self) -> int:
        return len(self.states)

    @property
    def labels(self) -> list[float]:
        return [s.cost_to_go for s in self.states]


def parse_plan(text: str, task: LiftedTask) -> list[GroundAction]:
    """Read one ``(name o1 ... ok)`` per line; ``;`` starts a comment."""
    schemas = {a.name: a for a in task.domain.actions}
    plan = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue
        if not (line.startswith("(") and line.endswith(")")):
            raise UnknownActionError(f"expected '(name args...)', got {line!r}", lineno)
        parts = line[1:-1].lower().split()
        if not parts:
            raise UnknownActionError("empty action", lineno)
        name, args = parts[0], tuple(parts[1:])
        schema = schemas.get(name)
        if schema is None:
            raise UnknownActionError(f"unknown action schema {name!r}", lineno)
        if len(args) != len(schema.parameters):
            raise UnknownActionError(f"{name} takes {len(schema.parameters)} arguments, got {len(args)}", lineno)
        for arg, (_, typ) in zip(args, schema.parameters):
            if arg not in task.object_set:
                raise UnknownActionError(f"unknown object {arg!r} in {line}", lineno)
            if typ not in task.domain.ancestors(task.type_of[arg]):
                raise UnknownActionError(f"object {arg!r} is not of type {typ}", lineno)
        plan.append(ground_action(task, schema, args))
    return plan


def format_plan(plan: Iterable[GroundAction]) -> str:
    plan = list(plan)
    body = "".join(f"{a}\n" for a in plan)
    return body + f"; cost = {sum(a.cost for a in plan):g}\n"


def validate_plan(task: LiftedTask, plan: Sequence[GroundAction]) -> float:
    """Replay ``plan`` from the initial state and return its total cost."""
    state = task.init
    for i, a in enumerate(plan):
        if not a.pre <= state:
            missing = ", ".join(atom_str(x) for x in sorted(a.pre - state))
            raise InvalidPlanError(f"step {i}: {a} not applicable (missing {missing})", step=i)
        state = (state - a.delete) | a.add
    if not task.goal <= state:
        missing = ", ".join(atom_str(x) for x in sorted(task.goal - state))
        raise InvalidPlanError(f"plan ends without reaching the goal (missing {missing})")
    return float(sum(a.cost for a in plan))


def trace_states(task: LiftedTask, plan: Sequence[GroundAction]) -> list[LabelledState]:
    """States visited by ``plan`` (goal state included) labelled with remaining cost."""
    validate_plan(task, plan)
    states = [task.init]
    for a in plan:
        states.append((states[-1] - a.delete) | a.add)
    remaining = [0.0] * (len(plan) + 1)
    for i in range(len(plan) - 1, -1, -1):
        remaining[i] = remaining[i + 1] + plan[i].cost
    return [LabelledState(task, s, r) for s, r in zip(states, remaining)]


def optimal_plan(task: LiftedTask, max_expansions: int = DEFAULT_MAX_EXPANSIONS,
                 time_limit: float = DEFAULT_TIME_LIMIT,
                 actions: Sequence[GroundAction] | None = None) -> list[GroundAction] | None:
    """Exact cheapest plan by breadth-first (unit cost) or uniform-cost search.

    Returns None if the reachable state space holds no goal state.
    """
    if actions is None:
        actions = ground_actions(task)
    succ = SuccessorGenerator(actions)
    start = time.perf_counter()
    goal = task.goal
    s0 = task.init
    parent: dict[frozenset, tuple[frozenset, GroundAction] | None] = {s0: None}

    def extract(s):
        plan = []
        while parent[s] is not None:
            prev, a = parent[s]
            plan.append(a)
            s = prev
        return plan[::-1]

    def check_limits(expanded):
        if expanded > max_expansions:
            raise ResourceLimitError(f"oracle exceeded {max_expansions} expansions")
        if time.perf_counter() - start > time_limit:
            raise ResourceLimitError(f"oracle exceeded {time_limit} s")

    if all(a.cost == 1 for a in actions):
        if goal <= s0:
            return []
        queue = deque([s0])
        expanded = 0
        while queue:
            s = queue.popleft()
            expanded += 1
            check_limits(expanded)
            for a, t in succ.successors(s):
                if t in parent:
                    continue
                parent[t] = (s, a)
                if goal <= t:
                    return extract(t)
                queue.append(t)
        return None

    dist = {s0: 0.0}
    heap = [(0.0, 0, s0)]
    counter = 1
    closed = set()
    expanded = 0
    while heap:
        g, _, s = heappop(heap)
        if s in closed:
            continue
        if goal <= s:
            return extract(s)
        closed.add(s)
        expanded += 1
        check_limits(expanded)
        for a, t in succ.successors(s):
            ng = g + a.cost
            if ng < dist.get(t, math.inf):
                dist[t] = ng
                parent[t] = (s, a)
                heappush(heap, (ng, counter, t))
                counter += 1
    return None


def optimal_cost(task: LiftedTask, max_expansions: int = DEFAULT_MAX_EXPANSIONS,
                 time_limit: float = DEFAULT_TIME_LIMIT) -> float:
    """h*(s0), or ``UNSOLVABLE`` (infinity) when no plan exists."""
    plan = optimal_plan(task, max_expansions, time_limit)
    if plan is None:
        return UNSOLVABLE
    return float(sum(a.cost for a in plan))


def build_dataset(pairs: Sequence[tuple[LiftedTask, Sequence[GroundAction]]]) -> Dataset:
    """Concatenate plan traces; identical (task, state, label) triples are kept once."""
    tasks: list[LiftedTask] = []
    task_ids: dict[LiftedTask, int] = {}
    seen: set = set()
    states: list[LabelledState] = []
    index: list[int] = []
    for task, plan in pairs:
        tid = task_ids.get(task)
        if tid is None:
            tid = task_ids[task] = len(tasks)
            tasks.append(task)
        for ls in trace_states(task, plan):
            key = (tid, ls.state, ls.cost_to_go)
            if key in seen:
                continue
            seen.add(key)
            states.append(ls)
            index.append(tid)
    return Dataset(states, index, tasks)


def format_dataset(dataset: Dataset) -> str:
    """One ``task_id <TAB> atoms <TAB> label`` record per state; atoms sorted."""
    lines = []
    for ls, tid in zip(dataset.states, dataset.task_index):
        atoms = " ".join(atom_str(a) for a in sorted(ls.state))
        lines.append(f"{tid}\t{atoms}\t{ls.cost_to_go:g}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_dataset_records(text: str) -> list[tuple[int, frozenset, float]]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            tid, atoms, label = line.split("\t")
            parsed = frozenset(tuple(tok.split()) for tok in atoms.replace(")", "").split("(") if tok.strip())
            out.append((int(tid), parsed, float(label)))
        except ValueError as exc:
            raise InputError(f"line {lineno}: malformed dataset record") from exc
    return out
