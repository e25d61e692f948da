"""Blocksworld and its renamed twin, Mystery Blocksworld."""

from __future__ import annotations

import itertools
import random
from typing import Iterable, Mapping, Sequence

from ..strips import GroundAction, bfs
from .base import IncompleteMap, QueryCase, StripsDomain, render_query

PREDICATES = ("on", "ontable", "clear", "holding", "handempty")
ACTIONS = ("pickup", "putdown", "stack", "unstack")

MYSTERY_NAMES = {
    "pickup": "attack",
    "putdown": "succumb",
    "stack": "overcome",
    "unstack": "feast",
    "on": "craves",
    "ontable": "planet",
    "clear": "province",
    "holding": "pain",
    "handempty": "harmony",
}


def blocksworld_actions(blocks: Sequence[str]) -> list[GroundAction]:
    out = []
    for x in blocks:
        out.append(
            GroundAction(
                "pickup",
                (x,),
                frozenset({("clear", x), ("ontable", x), ("handempty",)}),
                frozenset({("holding", x)}),
                frozenset({("clear", x), ("ontable", x), ("handempty",)}),
            )
        )
        out.append(
            GroundAction(
                "putdown",
                (x,),
                frozenset({("holding", x)}),
                frozenset({("clear", x), ("ontable", x), ("handempty",)}),
                frozenset({("holding", x)}),
            )
        )
    for x, y in itertools.permutations(blocks, 2):
        out.append(
            GroundAction(
                "stack",
                (x, y),
                frozenset({("holding", x), ("clear", y)}),
                frozenset({("on", x, y), ("clear", x), ("handempty",)}),
                frozenset({("holding", x), ("clear", y)}),
            )
        )
        out.append(
            GroundAction(
                "unstack",
                (x, y),
                frozenset({("on", x, y), ("clear", x), ("handempty",)}),
                frozenset({("holding", x), ("clear", y)}),
                frozenset({("on", x, y), ("clear", x), ("handempty",)}),
            )
        )
    return out


def towers_state(towers: Iterable[Sequence[str]]) -> frozenset:
    """State for stacks listed bottom to top, with the hand empty."""
    atoms = {("handempty",)}
    for tower in towers:
        if not tower:
            continue
        atoms.add(("ontable", tower[0]))
        for below, above in zip(tower, tower[1:]):
            atoms.add(("on", above, below))
        atoms.add(("clear", tower[-1]))
    return frozenset(atoms)


def random_towers(blocks: Sequence[str], rng: random.Random) -> list[list[str]]:
    order = list(blocks)
    rng.shuffle(order)
    towers: list[list[str]] = []
    for b in order:
        if towers and rng.random() < 0.6:
            rng.choice(towers).append(b)
        else:
            towers.append([b])
    return towers


def rename_atom(atom: tuple, names: Mapping[str, str]) -> tuple:
    return (names.get(atom[0], atom[0]), *atom[1:])


def rename_action(ga: GroundAction, names: Mapping[str, str]) -> GroundAction:
    return GroundAction(
        names.get(ga.name, ga.name),
        ga.args,
        frozenset(rename_atom(a, names) for a in ga.pre),
        frozenset(rename_atom(a, names) for a in ga.add),
        frozenset(rename_atom(a, names) for a in ga.delete),
    )


def check_name_map(name_map: Mapping[str, str], vocabulary: Iterable[str] = PREDICATES + ACTIONS) -> None:
    missing = [n for n in vocabulary if n not in name_map]
    if missing:
        raise IncompleteMap(f"name map lacks {', '.join(missing)}")
    images = list(name_map.values())
    if len(set(images)) != len(images):
        raise IncompleteMap("name map is not injective")
    clash = set(images) & (set(vocabulary) - set(name_map))
    if clash:
        raise IncompleteMap(f"name map images collide with original names: {sorted(clash)}")


class Blocksworld(StripsDomain):
    id = "blocksworld"
    upstream_query_count = 602

    def ground_actions(self, case: QueryCase) -> list[GroundAction]:
        acts = blocksworld_actions(self.objects(case)["Block"])
        if self.name_map:
            acts = [rename_action(a, self.name_map) for a in acts]
        return acts


class MysteryBlocksworld(Blocksworld):
    id = "mystery_blocksworld"
    name_map = MYSTERY_NAMES


def _map_case(case: QueryCase, names: Mapping[str, str], new_id: str) -> QueryCase:
    delta = dict(case.delta)
    delta["init"] = sorted((list(rename_atom(tuple(a), names)) for a in case.delta["init"]), key=repr)
    delta["goal"] = sorted((list(rename_atom(tuple(a), names)) for a in case.delta["goal"]), key=repr)
    text = render_query(delta["objects"], map(tuple, delta["init"]), map(tuple, delta["goal"]))
    return QueryCase(new_id, text, case.query_type, delta, case.oracle_answer, case.note)


def obfuscate(case: QueryCase, name_map: Mapping[str, str] = MYSTERY_NAMES) -> QueryCase:
    """Mystery image of a Blocksworld case under a bijective renaming."""
    check_name_map(name_map)
    return _map_case(case, name_map, case.id.replace("bw-", "mbw-", 1))


def deobfuscate(case: QueryCase, name_map: Mapping[str, str] = MYSTERY_NAMES) -> QueryCase:
    check_name_map(name_map)
    inverse = {v: k for k, v in name_map.items()}
    return _map_case(case, inverse, case.id.replace("mbw-", "bw-", 1))


def blocksworld_case(cid: str, blocks: Sequence[str], init: Iterable[tuple], goal: Iterable[tuple], query_type: str) -> QueryCase:
    objects = {"Block": list(blocks)}
    init = sorted((list(a) for a in init), key=repr)
    goal = sorted((list(a) for a in goal), key=repr)
    text = render_query(objects, map(tuple, init), map(tuple, goal))
    return QueryCase(cid, text, query_type, {"objects": objects, "init": init, "goal": goal})


def generate_cases(seed: int = 7, count: int = 24, max_len: int = 8) -> list[QueryCase]:
    """Desk-scale instances: fixed anchors plus random ones with short optimal plans."""
    cases = [
        blocksworld_case("bw-000", "ab", towers_state([["a"], ["b"]]), [("on", "a", "b")], "two_blocks"),
        blocksworld_case("bw-001", "abc", towers_state([["a", "b"], ["c"]]), [("on", "b", "a")], "identity"),
    ]
    rng = random.Random(seed)
    names = "abcde"
    seen = set()
    while len(cases) < count:
        n = rng.randint(3, 5)
        blocks = names[:n]
        init = towers_state(random_towers(blocks, rng))
        target = towers_state(random_towers(blocks, rng))
        goal = frozenset(a for a in target if a[0] == "on") or frozenset(a for a in target if a[0] == "ontable")
        key = (init, goal)
        if key in seen or goal <= init:
            continue
        plan = bfs(init, goal, blocksworld_actions(blocks))
        if plan is None or len(plan) > max_len:
            continue
        seen.add(key)
        cases.append(blocksworld_case(f"bw-{len(cases):03d}", blocks, init, goal, f"{n}_blocks"))
    return cases
