"""Counterexample task pairs and small graphs with known WL behaviour.

``check_fixtures`` runs every documented distinguish/confuse outcome and the
oracle costs, returning one :class:`FixtureCheck` per assertion.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .ilg import ColouredGraph, build_ilg
from .pddl import LiftedTask, parse_domain, parse_problem
from .plans import optimal_cost
from .wl import ColourTable, wl_refine

QW_DOMAIN = """
(define (domain qw)
  (:requirements :strips)
  (:predicates (q ?x ?y) (w ?x ?y))
  (:action o
    :parameters (?x ?y)
    :precondition (q ?x ?y)
    :effect (w ?x ?y)))
"""

Q_DOMAIN = """
(define (domain q-only)
  (:requirements :strips)
  (:predicates (q ?x ?y)))
"""

P3_DOMAIN = """
(define (domain ternary)
  (:requirements :strips)
  (:predicates (p ?x ?y ?z)))
"""


def _problem(name: str, domain: str, objects: str, init: str, goal: str) -> str:
    return (f"(define (problem {name}) (:domain {domain}) (:objects {objects})"
            f" (:init {init}) (:goal (and {goal})))")


def role_value_pair() -> tuple[LiftedTask, LiftedTask]:
    """Q/W pair with one action: WL-equivalent ILGs, h* = inf vs 2."""
    dom = parse_domain(QW_DOMAIN)
    goal = "(w a b) (w b a)"
    p1 = parse_problem(_problem("qw-1", "qw", "a b", "(q a a) (q b b)", goal), dom)
    p2 = parse_problem(_problem("qw-2", "qw", "a b", "(q a b) (q b a)", goal), dom)
    return p1, p2


def ternary_pair() -> tuple[LiftedTask, LiftedTask]:
    """Ternary pair identical after binary compilation: h* = inf vs 0."""
    dom = parse_domain(P3_DOMAIN)
    goal = "(p a b c)"
    p1 = parse_problem(_problem("p3-1", "ternary", "a b c d",
                                "(p a b a) (p c b c) (p a d c) (p c d a)", goal), dom)
    p2 = parse_problem(_problem("p3-2", "ternary", "a b c d",
                                "(p a b c) (p c b a) (p a d a) (p c d c)", goal), dom)
    return p1, p2


def achieved_goal_pair() -> tuple[LiftedTask, LiftedTask]:
    """Q-only pair where only the ILG marks achieved goals: h* = inf vs 0."""
    dom = parse_domain(Q_DOMAIN)
    goal = "(q a b) (q b a)"
    p1 = parse_problem(_problem("q-1", "q-only", "a b", "(q a a) (q b b)", goal), dom)
    p2 = parse_problem(_problem("q-2", "q-only", "a b", "(q a b) (q b a)", goal), dom)
    return p1, p2


def cycle_graph(n: int, colour=0, label: int = 0) -> ColouredGraph:
    return ColouredGraph((colour,) * n, tuple((i, (i + 1) % n, label) for i in range(n)))


def disjoint_union(*graphs: ColouredGraph) -> ColouredGraph:
    colours, edges, offset = [], [], 0
    for g in graphs:
        colours.extend(g.colours)
        edges.extend((u + offset, v + offset, lab) for u, v, lab in g.edges)
        offset += g.n_nodes
    return ColouredGraph(tuple(colours), tuple(edges))


def hexagon_vs_triangles() -> tuple[ColouredGraph, ColouredGraph]:
    """A 6-cycle and two disjoint 3-cycles, all nodes and edges alike."""
    return cycle_graph(6), disjoint_union(cycle_graph(3), cycle_graph(3))


def wl_multisets(g1: ColouredGraph, g2: ColouredGraph, iterations: int) -> tuple[Counter, Counter]:
    """Colour multisets of both graphs under one shared, growing table."""
    table = ColourTable()
    r1 = wl_refine(g1, iterations, table)
    r2 = wl_refine(g2, iterations, table)
    return (Counter(c for row in r1 for c in row), Counter(c for row in r2 for c in row))


def wl_equal(g1: ColouredGraph, g2: ColouredGraph, iterations: int) -> bool:
    m1, m2 = wl_multisets(g1, g2, iterations)
    return m1 == m2


def wl_iteration0_differs(t1: LiftedTask, t2: LiftedTask) -> bool:
    return not wl_equal(build_ilg(t1), build_ilg(t2), 0)


@dataclass
class FixtureCheck:
    name: str
    passed: bool
    detail: str


def check_fixtures(max_iterations: int = 8) -> list[FixtureCheck]:
    checks: list[FixtureCheck] = []

    def add(name, ok, detail):
        checks.append(FixtureCheck(name, bool(ok), detail))

    g1, g2 = hexagon_vs_triangles()
    same = [L for L in range(1, max_iterations + 1) if wl_equal(g1, g2, L)]
    add("hexagon-vs-triangles: WL multisets equal for L=1..%d" % max_iterations,
        len(same) == max_iterations, f"equal at L={same}")

    pairs = [
        ("role-value pair", role_value_pair(), "equal", (math.inf, 2.0)),
        ("ternary pair", ternary_pair(), "differ0", (math.inf, 0.0)),
        ("achieved-goal pair", achieved_goal_pair(), "differ0", (math.inf, 0.0)),
    ]
    for name, (t1, t2), expect, costs in pairs:
        if expect == "equal":
            eq = [L for L in range(max_iterations + 1) if wl_equal(build_ilg(t1), build_ilg(t2), L)]
            add(f"{name}: ILG WL features equal for L=0..{max_iterations}",
                len(eq) == max_iterations + 1, f"equal at L={eq}")
        else:
            add(f"{name}: ILG colour histograms differ at iteration 0",
                wl_iteration0_differs(t1, t2), "iteration-0 multisets compared")
        got = (optimal_cost(t1), optimal_cost(t2))
        add(f"{name}: oracle h* = {costs[0]:g} vs {costs[1]:g}", got == costs, f"got {got[0]:g} vs {got[1]:g}")
    return checks
