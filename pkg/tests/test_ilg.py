from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wlheur import blocksworld
from wlheur.errors import ForeignAtomError
from wlheur.fixtures import achieved_goal_pair, role_value_pair
from wlheur.ilg import (ACHIEVED, ACHIEVED_GOAL, OBJECT, UNACHIEVED_GOAL, ColouredGraph, build_ilg,
                        build_state_ilg, dump_graph)
from wlheur.pddl import apply, parse_domain, parse_problem
from wlheur.plans import optimal_plan, parse_plan

BW = parse_domain(blocksworld.DOMAIN)
C_ON_A = """(define (problem c-on-a) (:domain blocksworld) (:objects a b c - block)
  (:init (on a b) (on b c) (on-table c) (clear a) (arm-empty)) (:goal (and (on c a))))"""


def node(graph, name):
    return graph.names.index(name)


def test_c_on_a_graph():
    g = build_ilg(parse_problem(C_ON_A, BW))
    for o in "abc":
        assert g.colours[node(g, o)] == OBJECT
    assert g.colours[node(g, "(on a b)")] == (ACHIEVED, "on")
    assert g.colours[node(g, "(on b c)")] == (ACHIEVED, "on")
    assert g.colours[node(g, "(on c a)")] == (UNACHIEVED_GOAL, "on")
    on_nodes = {node(g, f"(on {x})") for x in ("a b", "b c", "c a")}
    sub = [(u, v, lab) for u, v, lab in g.edges if u in on_nodes]
    assert len(sub) == 6
    assert (node(g, "(on c a)"), node(g, "c"), 0) in sub
    assert (node(g, "(on c a)"), node(g, "a"), 1) in sub


def test_achieved_goals_coloured_ag():
    g = build_ilg(achieved_goal_pair()[1])
    atoms = [c for c in g.colours if c != OBJECT]
    assert atoms == [(ACHIEVED_GOAL, "q")] * 2


def test_empty_task_empty_graph():
    dom = parse_domain("(define (domain e) (:predicates (p)))")
    task = parse_problem("(define (problem e) (:domain e) (:init) (:goal (and)))", dom)
    g = build_ilg(task)
    assert g.n_nodes == 0 and g.edges == ()


def test_repeated_argument_parallel_edges():
    t1 = achieved_goal_pair()[0]
    g = build_ilg(t1)
    qaa = node(g, "(q a a)")
    assert g.colours[qaa] == (ACHIEVED, "q")
    assert sorted((v, lab) for u, v, lab in g.edges if u == qaa) == [(node(g, "a"), 0), (node(g, "a"), 1)]
    assert Counter(g.colours)[(UNACHIEVED_GOAL, "q")] == 2


def test_state_ilg_equals_task_ilg():
    task = parse_problem(C_ON_A, BW)
    assert build_state_ilg(task, task.init) == build_ilg(task)


def test_goal_state_all_ag():
    p2 = role_value_pair()[1]
    s = p2.init
    for a in parse_plan("(o a b)\n(o b a)", p2):
        s = apply(s, a)
    g = build_state_ilg(p2, s)
    goal_nodes = [g.colours[node(g, f"(w {x})")] for x in ("a b", "b a")]
    assert goal_nodes == [(ACHIEVED_GOAL, "w")] * 2


def test_foreign_atoms_rejected():
    task = parse_problem(C_ON_A, BW)
    with pytest.raises(ForeignAtomError):
        build_state_ilg(task, frozenset({("on", "a", "z")}))
    with pytest.raises(ForeignAtomError):
        build_state_ilg(task, frozenset({("fly", "a")}))


def test_graph_validation():
    with pytest.raises(ValueError):
        ColouredGraph((0,), ((0, 0, 0),))
    with pytest.raises(ValueError):
        ColouredGraph((0,), ((0, 1, 0),))


def test_dump_format():
    text = dump_graph(build_ilg(achieved_goal_pair()[1]))
    lines = text.splitlines()
    assert lines[0] == "0 ob"
    assert "2 ag:q" in lines
    assert all(len(line.split()) in (2, 3) for line in lines)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10**6), st.integers(0, 30))
def test_size_and_colour_count_invariants(n, seed, steps):
    task = parse_problem(blocksworld.generate_problem(n, seed), BW)
    plan = optimal_plan(task) or []
    s = task.init
    for a in plan[: steps % (len(plan) + 1)]:
        s = apply(s, a)
    g = build_state_ilg(task, s)
    assert g.n_nodes == len(task.objects) + len(s | task.goal)
    arity_sum = sum(len(p) - 1 for p in s | task.goal)
    assert len(g.edges) == arity_sum
    counts = Counter(c[0] for c in g.colours)
    assert counts[ACHIEVED_GOAL] + counts[UNACHIEVED_GOAL] == len(task.goal)
    assert counts[ACHIEVED_GOAL] + counts[ACHIEVED] == len(s)
    for u, v, lab in g.edges:
        assert g.colours[u] != OBJECT and g.colours[v] == OBJECT
        assert 0 <= lab < 2
