"""Gripper: a two-handed robot carries balls between rooms."""

from __future__ import annotations

import itertools
import random
from typing import Sequence

from ..strips import GroundAction, bfs
from .base import QueryCase, StripsDomain, render_query

GRIPPERS = ("left", "right")


def gripper_actions(rooms: Sequence[str], balls: Sequence[str], grippers: Sequence[str] = GRIPPERS) -> list[GroundAction]:
    out = []
    for a, b in itertools.permutations(rooms, 2):
        out.append(
            GroundAction("move", (a, b), frozenset({("at_robby", a)}), frozenset({("at_robby", b)}), frozenset({("at_robby", a)}))
        )
    for ball, room, g in itertools.product(balls, rooms, grippers):
        out.append(
            GroundAction(
                "pick",
                (ball, room, g),
                frozenset({("at", ball, room), ("at_robby", room), ("free", g)}),
                frozenset({("carry", ball, g)}),
                frozenset({("at", ball, room), ("free", g)}),
            )
        )
        out.append(
            GroundAction(
                "drop",
                (ball, room, g),
                frozenset({("carry", ball, g), ("at_robby", room)}),
                frozenset({("at", ball, room), ("free", g)}),
                frozenset({("carry", ball, g)}),
            )
        )
    return out


class Gripper(StripsDomain):
    id = "gripper"
    upstream_query_count = 25

    def ground_actions(self, case: QueryCase) -> list[GroundAction]:
        objs = self.objects(case)
        return gripper_actions(objs["Room"], objs["Ball"], objs["Gripper"])


def gripper_case(cid: str, rooms, balls, robby: str, placement: dict, goal_placement: dict) -> QueryCase:
    objects = {"Room": list(rooms), "Ball": list(balls), "Gripper": list(GRIPPERS)}
    init = [("at_robby", robby), *(("free", g) for g in GRIPPERS), *(("at", b, r) for b, r in placement.items())]
    goal = [("at", b, r) for b, r in goal_placement.items()]
    init = sorted((list(a) for a in init), key=repr)
    goal = sorted((list(a) for a in goal), key=repr)
    text = render_query(objects, map(tuple, init), map(tuple, goal))
    return QueryCase(cid, text, f"{len(balls)}_balls", {"objects": objects, "init": init, "goal": goal})


def generate_cases(seed: int = 11, count: int = 12) -> list[QueryCase]:
    rooms = ("rooma", "roomb")
    cases = []
    rng = random.Random(seed)
    seen = set()
    sizes = itertools.cycle([1, 2, 3, 4, 2, 3])
    while len(cases) < count:
        n = next(sizes)
        balls = [f"ball{i}" for i in range(1, n + 1)]
        placement = {b: rng.choice(rooms) for b in balls}
        goal = {b: rng.choice(rooms) for b in balls if rng.random() < 0.8} or {balls[0]: rooms[1]}
        robby = rng.choice(rooms)
        key = (n, tuple(sorted(placement.items())), tuple(sorted(goal.items())), robby)
        if key in seen or all(placement[b] == r for b, r in goal.items()):
            continue
        seen.add(key)
        case = gripper_case(f"gr-{len(cases):03d}", rooms, balls, robby, placement, goal)
        dom = Gripper.__new__(Gripper)
        if bfs(dom.init(case), dom.goal(case), gripper_actions(rooms, balls)) is None:
            continue
        cases.append(case)
    return cases
