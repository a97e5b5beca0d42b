"""Lifted STRIPS tasks: PDDL parsing, printing, grounding and successor semantics.

Only the ``:strips`` + ``:typing`` fragment is accepted: positive
preconditions, conjunctive goals, add/delete effects, unit action costs.
All names are lower-cased on input.

Atoms are plain tuples ``(predicate, arg1, ..., argk)``; states are
frozensets of ground atoms.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

from .errors import (
    ArityError,
    InapplicableActionError,
    PDDLSyntaxError,
    ResourceLimitError,
    UndeclaredError,
    UnsupportedFeatureError,
)

Atom = tuple  # (predicate, *arguments)
State = frozenset

ROOT_TYPE = "object"
SUPPORTED_REQUIREMENTS = frozenset({":strips", ":typing"})
DEFAULT_GROUND_CAP = 10**7

_UNSUPPORTED_FORMULAS = {
    "not": "negative preconditions",
    "or": "disjunctive formulas",
    "imply": "implications",
    "forall": "universal quantification",
    "exists": "existential quantification",
    "when": "conditional effects",
    "=": "equality",
    "increase": "action-cost fluents",
    "decrease": "numeric fluents",
    "assign": "numeric fluents",
}


def atom_str(atom: Atom) -> str:
    return "(" + " ".join(atom) + ")"


# ---------------------------------------------------------------------------
# s-expressions


class Sym(str):
    """A symbol token remembering where it came from."""

    line: int
    col: int

    def __new__(cls, text: str, line: int, col: int) -> "Sym":
        obj = super().__new__(cls, text)
        obj.line = line
        obj.col = col
        return obj


class SList(list):
    line: int = 0
    col: int = 0


_TOKEN_RE = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")


def parse_sexpr(text: str, filename: str | None = None) -> SList:
    """Parse exactly one s-expression; symbols are lower-cased."""
    stack: list[SList] = []
    result: SList | None = None
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rfind("\n") + 1
            continue
        if result is not None:
            raise PDDLSyntaxError("unexpected text after closing parenthesis", line, col, filename)
        if tok == "(":
            lst = SList()
            lst.line, lst.col = line, col
            stack.append(lst)
        elif tok == ")":
            if not stack:
                raise PDDLSyntaxError("unbalanced ')'", line, col, filename)
            done = stack.pop()
            if stack:
                stack[-1].append(done)
            else:
                result = done
        else:
            if not stack:
                raise PDDLSyntaxError(f"unexpected symbol {tok!r} outside any list", line, col, filename)
            stack[-1].append(Sym(tok.lower(), line, col))
    if stack:
        raise PDDLSyntaxError("unbalanced '(' (missing ')')", stack[-1].line, stack[-1].col, filename)
    if result is None:
        raise PDDLSyntaxError("empty input", 1, 1, filename)
    return result


def _pos(node) -> tuple[int | None, int | None]:
    return getattr(node, "line", None), getattr(node, "col", None)


# ---------------------------------------------------------------------------
# data model


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    parameter_types: tuple[str, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.parameter_types)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    parameters: tuple[tuple[str, str], ...]  # (variable, type)
    pre: tuple[Atom, ...]
    add: tuple[Atom, ...]
    delete: tuple[Atom, ...]
    cost: float = 1.0

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.parameters)


@dataclass(frozen=True)
class Domain:
    name: str
    requirements: tuple[str, ...]
    types: tuple[tuple[str, str], ...]  # (type, parent)
    constants: tuple[tuple[str, str], ...]  # (object, type)
    predicates: tuple[PredicateSchema, ...]
    actions: tuple[ActionSchema, ...]

    @cached_property
    def predicate_map(self) -> dict[str, PredicateSchema]:
        return {p.name: p for p in self.predicates}

    @cached_property
    def type_parent(self) -> dict[str, str]:
        return dict(self.types)

    def ancestors(self, type_name: str) -> tuple[str, ...]:
        """``type_name`` and all its supertypes, nearest first."""
        out = [type_name]
        parent = self.type_parent
        while out[-1] in parent and parent[out[-1]] not in out:
            out.append(parent[out[-1]])
        if ROOT_TYPE not in out:
            out.append(ROOT_TYPE)
        return tuple(out)

    def has_type(self, type_name: str) -> bool:
        return type_name == ROOT_TYPE or type_name in self.type_parent


@dataclass(frozen=True)
class LiftedTask:
    """A lifted planning task: domain, typed objects, initial state and goal."""

    name: str
    domain: Domain
    objects: tuple[str, ...]
    object_types: tuple[str, ...]
    init: frozenset
    goal: frozenset

    @cached_property
    def predicates(self) -> dict[str, PredicateSchema]:
        return self.domain.predicate_map

    @cached_property
    def object_set(self) -> frozenset:
        return frozenset(self.objects)

    @cached_property
    def type_of(self) -> dict[str, str]:
        return dict(zip(self.objects, self.object_types))

    def objects_of_type(self, type_name: str) -> list[str]:
        return [o for o, t in zip(self.objects, self.object_types)
                if type_name in self.domain.ancestors(t)]

    def with_init(self, state: Iterable[Atom]) -> "LiftedTask":
        return LiftedTask(self.name, self.domain, self.objects, self.object_types,
                          frozenset(state), self.goal)


@dataclass(frozen=True)
class GroundAction:
    schema: ActionSchema = field(repr=False, compare=False)
    name: str
    binding: tuple[str, ...]
    pre: frozenset
    add: frozenset
    delete: frozenset
    cost: float = 1.0

    def __str__(self) -> str:
        return "(" + " ".join((self.name,) + self.binding) + ")"


# ---------------------------------------------------------------------------
# parsing helpers


def _expect_list(node, what: str, filename) -> SList:
    if not isinstance(node, list):
        raise PDDLSyntaxError(f"expected a list for {what}, got {node!r}", *_pos(node), filename)
    return node


def _expect_sym(node, what: str, filename) -> Sym:
    if isinstance(node, list):
        raise PDDLSyntaxError(f"expected a symbol for {what}", *_pos(node), filename)
    return node


def _typed_list(items: Sequence, filename, what: str) -> list[tuple[str, str]]:
    """``a b - t c`` -> [(a, t), (b, t), (c, object)]."""
    out: list[tuple[str, str]] = []
    pending: list[Sym] = []
    i = 0
    while i < len(items):
        tok = _expect_sym(items[i], what, filename)
        if tok == "-":
            if i + 1 >= len(items):
                raise PDDLSyntaxError(f"missing type after '-' in {what}", tok.line, tok.col, filename)
            typ = items[i + 1]
            if isinstance(typ, list):
                head = typ[0] if typ else None
                if head == "either":
                    raise UnsupportedFeatureError("'either' types are not supported", *_pos(typ), filename)
                raise PDDLSyntaxError(f"bad type in {what}", *_pos(typ), filename)
            if not pending:
                raise PDDLSyntaxError(f"type {typ!s} given to no names in {what}", tok.line, tok.col, filename)
            out.extend((p, str(typ)) for p in pending)
            pending = []
            i += 2
        else:
            pending.append(tok)
            i += 1
    out.extend((p, ROOT_TYPE) for p in pending)
    return [(str(a), b) for a, b in out]


def _conjunction(node, filename, what: str, allow_negation: bool) -> list[tuple[bool, SList]]:
    """Flatten ``(and ...)`` into ``[(positive, atom_node), ...]``."""
    node = _expect_list(node, what, filename)
    if not node:
        return []
    head = node[0]
    if isinstance(head, list):
        raise PDDLSyntaxError(f"malformed {what}", *_pos(node), filename)
    if head == "and":
        out = []
        for sub in node[1:]:
            out.extend(_conjunction(sub, filename, what, allow_negation))
        return out
    if head == "not" and allow_negation:
        if len(node) != 2 or not isinstance(node[1], list):
            raise PDDLSyntaxError("malformed (not ...)", *_pos(node), filename)
        inner = node[1]
        if inner and inner[0] in _UNSUPPORTED_FORMULAS or inner and inner[0] == "and":
            raise UnsupportedFeatureError(f"unsupported construct inside (not ...) in {what}",
                                          *_pos(inner), filename)
        return [(False, inner)]
    if head in _UNSUPPORTED_FORMULAS:
        raise UnsupportedFeatureError(
            f"{_UNSUPPORTED_FORMULAS[head]} ('{head}') in {what} are not supported",
            head.line, head.col, filename)
    return [(True, node)]


def _atom(node: SList, predicates: dict[str, PredicateSchema], filename,
          check_arg=None) -> Atom:
    name = _expect_sym(node[0], "predicate name", filename)
    if name not in predicates:
        raise UndeclaredError(f"undeclared predicate {name!s}", name.line, name.col, filename)
    args = [_expect_sym(a, "argument", filename) for a in node[1:]]
    if len(args) != predicates[name].arity:
        raise ArityError(
            f"predicate {name!s} expects {predicates[name].arity} arguments, got {len(args)}",
            name.line, name.col, filename)
    if check_arg is not None:
        for a in args:
            check_arg(a)
    return (str(name),) + tuple(str(a) for a in args)


def _sections(root: SList, kind: str, filename) -> tuple[str, list[SList]]:
    if len(root) < 2 or root[0] != "define":
        raise PDDLSyntaxError("expected (define ...)", *_pos(root), filename)
    header = _expect_list(root[1], f"{kind} header", filename)
    if len(header) != 2 or header[0] != kind:
        raise PDDLSyntaxError(f"expected ({kind} <name>)", *_pos(header), filename)
    sections = [_expect_list(s, "section", filename) for s in root[2:]]
    for s in sections:
        if not s or isinstance(s[0], list) or not s[0].startswith(":"):
            raise PDDLSyntaxError("expected a ':section'", *_pos(s), filename)
    return str(header[1]), sections


# ---------------------------------------------------------------------------
# domain


def parse_domain(text: str, filename: str | None = None) -> Domain:
    """Parse PDDL domain source into a :class:`Domain`."""
    name, sections = _sections(parse_sexpr(text, filename), "domain", filename)
    requirements: list[str] = [":strips"]
    types: list[tuple[str, str]] = []
    constants: list[tuple[str, str]] = []
    predicates: dict[str, PredicateSchema] = {}
    raw_actions: list[SList] = []

    for sec in sections:
        key = sec[0]
        if key == ":requirements":
            requirements = []
            for r in sec[1:]:
                r = _expect_sym(r, "requirement", filename)
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeatureError(
                        f"unsupported requirement {r!s} (only :strips and :typing)",
                        r.line, r.col, filename)
                requirements.append(str(r))
        elif key == ":types":
            types.extend(_typed_list(sec[1:], filename, ":types"))
        elif key == ":constants":
            constants.extend(_typed_list(sec[1:], filename, ":constants"))
        elif key == ":predicates":
            for p in sec[1:]:
                p = _expect_list(p, "predicate declaration", filename)
                if not p:
                    raise PDDLSyntaxError("empty predicate declaration", *_pos(p), filename)
                pname = _expect_sym(p[0], "predicate name", filename)
                if pname in predicates:
                    raise PDDLSyntaxError(f"duplicate predicate {pname!s}", pname.line, pname.col, filename)
                params = _typed_list(p[1:], filename, f"predicate {pname}")
                predicates[str(pname)] = PredicateSchema(str(pname), tuple(t for _, t in params))
        elif key == ":action":
            raw_actions.append(sec)
        else:
            raise UnsupportedFeatureError(f"unsupported domain section {key!s}", key.line, key.col, filename)

    parent = dict(types)
    declared = set(parent) | {ROOT_TYPE}
    for t, par in types:
        if par not in declared:
            raise UndeclaredError(f"undeclared parent type {par}", None, None, filename)
    for pred in predicates.values():
        for t in pred.parameter_types:
            if t not in declared:
                raise UndeclaredError(f"undeclared type {t} in predicate {pred.name}", None, None, filename)
    for c, t in constants:
        if t not in declared:
            raise UndeclaredError(f"undeclared type {t} of constant {c}", None, None, filename)

    constant_names = {c for c, _ in constants}
    actions = []
    seen_actions = set()
    for sec in raw_actions:
        act = _parse_action(sec, predicates, declared, constant_names, filename)
        if act.name in seen_actions:
            raise PDDLSyntaxError(f"duplicate action {act.name}", *_pos(sec), filename)
        seen_actions.add(act.name)
        actions.append(act)

    return Domain(name, tuple(dict.fromkeys(requirements)), tuple(types), tuple(constants),
                  tuple(predicates.values()), tuple(actions))


def _parse_action(sec: SList, predicates, declared_types, constants, filename) -> ActionSchema:
    if len(sec) < 2:
        raise PDDLSyntaxError("action without a name", *_pos(sec), filename)
    name = str(_expect_sym(sec[1], "action name", filename))
    fields: dict[str, object] = {}
    i = 2
    while i < len(sec):
        key = _expect_sym(sec[i], "action field", filename)
        if key not in (":parameters", ":precondition", ":effect"):
            raise UnsupportedFeatureError(f"unsupported action field {key!s}", key.line, key.col, filename)
        if i + 1 >= len(sec):
            raise PDDLSyntaxError(f"missing value for {key!s}", key.line, key.col, filename)
        fields[str(key)] = sec[i + 1]
        i += 2

    params = _typed_list(_expect_list(fields.get(":parameters", SList()), ":parameters", filename),
                         filename, f"parameters of {name}")
    for v, t in params:
        if not v.startswith("?"):
            raise PDDLSyntaxError(f"parameter {v} of {name} must start with '?'", *_pos(sec), filename)
        if t not in declared_types:
            raise UndeclaredError(f"undeclared type {t} in action {name}", *_pos(sec), filename)
    variables = {v for v, _ in params}

    def check(arg: Sym) -> None:
        if arg.startswith("?"):
            if arg not in variables:
                raise UndeclaredError(f"undeclared variable {arg!s} in action {name}", arg.line, arg.col, filename)
        elif arg not in constants:
            raise UndeclaredError(f"undeclared constant {arg!s} in action {name}", arg.line, arg.col, filename)

    pre: list[Atom] = []
    if ":precondition" in fields:
        for positive, node in _conjunction(fields[":precondition"], filename,
                                           f"precondition of {name}", allow_negation=False):
            pre.append(_atom(node, predicates, filename, check))
    add: list[Atom] = []
    delete: list[Atom] = []
    if ":effect" in fields:
        for positive, node in _conjunction(fields[":effect"], filename,
                                           f"effect of {name}", allow_negation=True):
            (add if positive else delete).append(_atom(node, predicates, filename, check))
    return ActionSchema(name, tuple(params), tuple(dict.fromkeys(pre)),
                        tuple(dict.fromkeys(add)), tuple(dict.fromkeys(delete)))


# ---------------------------------------------------------------------------
# problem


def parse_problem(text: str, domain: Domain, filename: str | None = None) -> LiftedTask:
    """Parse PDDL problem source against an already parsed domain."""
    name, sections = _sections(parse_sexpr(text, filename), "problem", filename)
    objects: dict[str, str] = dict(domain.constants)
    init: list[Atom] = []
    goal: list[Atom] = []
    init_nodes: list[SList] = []
    goal_node = None

    for sec in sections:
        key = sec[0]
        if key == ":domain":
            if len(sec) != 2:
                raise PDDLSyntaxError("malformed (:domain ...)", *_pos(sec), filename)
            if str(sec[1]) != domain.name:
                raise UndeclaredError(f"problem refers to domain {sec[1]!s}, parsed domain is {domain.name}",
                                      *_pos(sec[1]), filename)
        elif key == ":requirements":
            for r in sec[1:]:
                if r not in SUPPORTED_REQUIREMENTS:
                    raise UnsupportedFeatureError(f"unsupported requirement {r!s}", *_pos(r), filename)
        elif key == ":objects":
            for o, t in _typed_list(sec[1:], filename, ":objects"):
                if not domain.has_type(t):
                    raise UndeclaredError(f"undeclared type {t} of object {o}", *_pos(sec), filename)
                objects[o] = t
        elif key == ":init":
            init_nodes = list(sec[1:])
        elif key == ":goal":
            if len(sec) != 2:
                raise PDDLSyntaxError("(:goal ...) takes exactly one formula", *_pos(sec), filename)
            goal_node = sec[1]
        else:
            raise UnsupportedFeatureError(f"unsupported problem section {key!s}", key.line, key.col, filename)

    def check(arg: Sym) -> None:
        if arg not in objects:
            raise UndeclaredError(f"undeclared object {arg!s}", arg.line, arg.col, filename)

    preds = domain.predicate_map
    for node in init_nodes:
        node = _expect_list(node, "initial atom", filename)
        if node and node[0] in _UNSUPPORTED_FORMULAS:
            raise UnsupportedFeatureError(f"'{node[0]}' in :init is not supported", *_pos(node), filename)
        init.append(_atom(node, preds, filename, check))
    if goal_node is not None:
        for _, node in _conjunction(goal_node, filename, "goal", allow_negation=False):
            goal.append(_atom(node, preds, filename, check))

    names = tuple(objects)
    return LiftedTask(name, domain, names, tuple(objects[o] for o in names),
                      frozenset(init), frozenset(goal))


def load_domain(path) -> Domain:
    with open(path) as fh:
        return parse_domain(fh.read(), str(path))


def load_problem(path, domain: Domain) -> LiftedTask:
    with open(path) as fh:
        return parse_problem(fh.read(), domain, str(path))


# ---------------------------------------------------------------------------
# printing


def _typed(pairs: Iterable[tuple[str, str]]) -> str:
    return " ".join(f"{a} - {t}" for a, t in pairs)


def _conj(atoms: Iterable[Atom], negate: bool = False) -> str:
    parts = [f"(not {atom_str(a)})" if negate else atom_str(a) for a in atoms]
    return "(and " + " ".join(parts) + ")"


def format_domain(domain: Domain) -> str:
    lines = [f"(define (domain {domain.name})",
             f"  (:requirements {' '.join(domain.requirements)})"]
    if domain.types:
        lines.append(f"  (:types {_typed(domain.types)})")
    if domain.constants:
        lines.append(f"  (:constants {_typed(domain.constants)})")
    preds = " ".join(
        "(" + " ".join([p.name] + [f"?x{i} - {t}" for i, t in enumerate(p.parameter_types)]) + ")"
        for p in domain.predicates)
    lines.append(f"  (:predicates {preds})")
    for a in domain.actions:
        effect = " ".join([atom_str(x) for x in a.add] + [f"(not {atom_str(x)})" for x in a.delete])
        lines.append(f"  (:action {a.name}")
        lines.append(f"    :parameters ({_typed(a.parameters)})")
        lines.append(f"    :precondition {_conj(a.pre)}")
        lines.append(f"    :effect (and {effect}))")
    lines.append(")")
    return "\n".join(lines) + "\n"


def format_problem(task: LiftedTask) -> str:
    consts = set(dict(task.domain.constants))
    objs = [(o, t) for o, t in zip(task.objects, task.object_types) if o not in consts]
    return "\n".join([
        f"(define (problem {task.name})",
        f"  (:domain {task.domain.name})",
        f"  (:objects {_typed(objs)})",
        "  (:init " + " ".join(atom_str(a) for a in sorted(task.init)) + ")",
        "  (:goal " + _conj(sorted(task.goal)) + ")",
        ")",
    ]) + "\n"


# ---------------------------------------------------------------------------
# grounding and semantics


def _substitute(atoms: Iterable[Atom], sub: dict[str, str]) -> frozenset:
    return frozenset((a[0],) + tuple(sub.get(x, x) for x in a[1:]) for a in atoms)


def ground_action(task: LiftedTask, schema: ActionSchema, binding: Sequence[str]) -> GroundAction:
    binding = tuple(binding)
    sub = dict(zip(schema.variables, binding))
    return GroundAction(schema, schema.name, binding, _substitute(schema.pre, sub),
                        _substitute(schema.add, sub), _substitute(schema.delete, sub), schema.cost)


def ground_actions(task: LiftedTask, cap: int = DEFAULT_GROUND_CAP) -> list[GroundAction]:
    """Every type-respecting binding of every schema.

    Order: schema declaration order, then bindings in lexicographic order of
    object names.
    """
    out: list[GroundAction] = []
    for schema in task.domain.actions:
        domains = [sorted(task.objects_of_type(t)) for _, t in schema.parameters]
        count = 1
        for d in domains:
            count *= len(d)
        if len(out) + count > cap:
            raise ResourceLimitError(
                f"grounding would exceed {cap} actions (schema {schema.name} alone has {count})")
        for binding in itertools.product(*domains):
            out.append(ground_action(task, schema, binding))
    return out


def applicable(state: frozenset, action: GroundAction) -> bool:
    return action.pre <= state


def apply(state: frozenset, action: GroundAction) -> frozenset:
    """Successor ``(s - del) | add``; raises if the action is not applicable."""
    if not action.pre <= state:
        missing = ", ".join(atom_str(a) for a in sorted(action.pre - state))
        raise InapplicableActionError(f"{action} is not applicable: missing {missing}")
    return (state - action.delete) | action.add


def is_goal(state: frozenset, task: LiftedTask) -> bool:
    return task.goal <= state


class SuccessorGenerator:
    """Applicable-action lookup over a fixed list of ground actions.

    Each action is filed under one of its precondition atoms so that only
    actions keyed by atoms of the current state are tested.
    """

    def __init__(self, actions: Sequence[GroundAction]):
        self.actions = list(actions)
        self._always: list[int] = []
        self._by_atom: dict[Atom, list[int]] = {}
        for i, a in enumerate(self.actions):
            if a.pre:
                self._by_atom.setdefault(min(a.pre), []).append(i)
            else:
                self._always.append(i)

    def applicable(self, state: frozenset) -> list[GroundAction]:
        idx = list(self._always)
        by_atom = self._by_atom
        for atom in state:
            hits = by_atom.get(atom)
            if hits:
                idx.extend(hits)
        idx.sort()
        acts = self.actions
        return [acts[i] for i in idx if acts[i].pre <= state]

    def successors(self, state: frozenset) -> Iterator[tuple[GroundAction, frozenset]]:
        for a in self.applicable(state):
            yield a, (state - a.delete) | a.add
