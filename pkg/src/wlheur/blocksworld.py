"""The 4-operator Blocksworld domain and a random instance generator."""

from __future__ import annotations

import random

DOMAIN = """\
(define (domain blocksworld)
  (:requirements :strips :typing)
  (:types block)
  (:predicates (on ?x - block ?y - block)
               (on-table ?x - block)
               (clear ?x - block)
               (arm-empty)
               (holding ?x - block))
  (:action pick-up
    :parameters (?x - block)
    :precondition (and (clear ?x) (on-table ?x) (arm-empty))
    :effect (and (holding ?x) (not (clear ?x)) (not (on-table ?x)) (not (arm-empty))))
  (:action put-down
    :parameters (?x - block)
    :precondition (holding ?x)
    :effect (and (clear ?x) (on-table ?x) (arm-empty) (not (holding ?x))))
  (:action stack
    :parameters (?x - block ?y - block)
    :precondition (and (holding ?x) (clear ?y))
    :effect (and (on ?x ?y) (clear ?x) (arm-empty) (not (holding ?x)) (not (clear ?y))))
  (:action unstack
    :parameters (?x - block ?y - block)
    :precondition (and (on ?x ?y) (clear ?x) (arm-empty))
    :effect (and (holding ?x) (clear ?y) (not (on ?x ?y)) (not (clear ?x)) (not (arm-empty)))))
"""


def random_towers(blocks: list[str], rng: random.Random) -> list[list[str]]:
    """Random stacking: each block goes on the table or on top of an existing tower."""
    order = blocks[:]
    rng.shuffle(order)
    towers: list[list[str]] = []
    for b in order:
        k = rng.randrange(len(towers) + 1)
        if k == len(towers):
            towers.append([b])
        else:
            towers[k].append(b)
    return towers


def tower_atoms(towers: list[list[str]], full_state: bool) -> list[str]:
    atoms = []
    for t in towers:
        atoms.append(f"(on-table {t[0]})")
        for below, above in zip(t, t[1:]):
            atoms.append(f"(on {above} {below})")
        if full_state:
            atoms.append(f"(clear {t[-1]})")
    if full_state:
        atoms.append("(arm-empty)")
    return atoms


def generate_problem(n_blocks: int, seed: int, name: str | None = None) -> str:
    """PDDL text for a random instance; the goal fixes every on/on-table relation."""
    rng = random.Random(seed)
    blocks = [f"b{i}" for i in range(1, n_blocks + 1)]
    init = random_towers(blocks, rng)
    goal = random_towers(blocks, rng)
    name = name or f"bw-{n_blocks}-{seed}"
    return "\n".join([
        f"(define (problem {name})",
        "  (:domain blocksworld)",
        f"  (:objects {' '.join(blocks)} - block)",
        f"  (:init {' '.join(tower_atoms(init, True))})",
        f"  (:goal (and {' '.join(tower_atoms(goal, False))}))",
        ")",
    ]) + "\n"
