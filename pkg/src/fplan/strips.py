"""Ground STRIPS states, actions, forward simulation and breadth-first search."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

Atom = tuple  # ("on", "a", "b")

DEFAULT_BFS_CAP = 10**6


class PreconditionViolated(Exception):
    def __init__(self, action: "GroundAction", atom: Atom):
        super().__init__(f"{action.label}: precondition {atom_text(atom)} does not hold")
        self.action = action
        self.atom = atom


class InstanceTooLarge(Exception):
    pass


def atom_text(atom: Atom) -> str:
    return f"{atom[0]}({', '.join(str(a) for a in atom[1:])})"


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: tuple
    pre: frozenset
    add: frozenset
    delete: frozenset

    @property
    def label(self) -> str:
        return " ".join([self.name, *(str(a) for a in self.args)])

    def applicable(self, state: frozenset) -> bool:
        return self.pre <= state

    def apply(self, state: frozenset) -> frozenset:
        # add wins when an atom is both added and deleted
        return (state - self.delete) | self.add


def simulate(state: Iterable[Atom], action: GroundAction) -> frozenset:
    """Successor of ``state`` under ``action``; raises on an unmet precondition."""
    state = frozenset(state)
    for atom in sorted(action.pre, key=repr):
        if atom not in state:
            raise PreconditionViolated(action, atom)
    return action.apply(state)


def replay(state: Iterable[Atom], plan: Sequence[GroundAction]) -> list[frozenset]:
    """States visited by ``plan``, starting with ``state`` itself."""
    trace = [frozenset(state)]
    for action in plan:
        trace.append(simulate(trace[-1], action))
    return trace


def goal_reached(state: frozenset, goal: Iterable[Atom]) -> bool:
    return frozenset(goal) <= state


def bfs(
    init: Iterable[Atom],
    goal: Iterable[Atom],
    actions: Sequence[GroundAction],
    cap: int = DEFAULT_BFS_CAP,
) -> list[GroundAction] | None:
    """A shortest plan from ``init`` to a state containing ``goal``.

    Returns None when the goal is unreachable.  Raises InstanceTooLarge once
    more than ``cap`` states have been expanded.
    """
    start = frozenset(init)
    goal = frozenset(goal)
    if goal <= start:
        return []
    parent: dict[frozenset, tuple[frozenset, GroundAction] | None] = {start: None}
    queue = deque([start])
    expanded = 0
    while queue:
        state = queue.popleft()
        expanded += 1
        if expanded > cap:
            raise InstanceTooLarge(f"breadth-first search expanded more than {cap} states")
        for action in actions:
            if not action.pre <= state:
                continue
            nxt = action.apply(state)
            if nxt in parent:
                continue
            parent[nxt] = (state, action)
            if goal <= nxt:
                plan = []
                cur = nxt
                while parent[cur] is not None:
                    prev, act = parent[cur]
                    plan.append(act)
                    cur = prev
                return plan[::-1]
            queue.append(nxt)
    return None
