"""Task allocation: assign tasks to robots to minimize the makespan."""

from __future__ import annotations

import itertools
from typing import Any, Mapping

from .base import INFEASIBLE, InstanceTooLarge, QueryCase, SingleStepDomain

MAX_ASSIGNMENTS = 3**12


class TaskAllocation(SingleStepDomain):
    id = "task_allocation"
    upstream_query_count = 50
    var_index = {"assign": ("Robot", "Task")}
    bool_vars = frozenset({"assign"})

    def compute_oracle(self, case: QueryCase) -> Any:
        """Enumerate every robot choice per task."""
        t = self.tables(case)
        robots, tasks, dur = t["Robot"], t["Task"], t["duration"]
        if len(robots) ** len(tasks) > MAX_ASSIGNMENTS:
            raise InstanceTooLarge("too many task assignments to enumerate")
        pins = self.pinned(case, "assign")
        choices = []
        for task in tasks:
            forced = [r for r in robots if pins.get((r, task)) is True]
            options = forced or [r for r in robots if pins.get((r, task), True)]
            choices.append(options)
        best = None
        for combo in itertools.product(*choices):
            load = dict.fromkeys(robots, 0)
            for r, task in zip(combo, tasks):
                load[r] += dur[r][task]
            span = max(load.values(), default=0)
            if best is None or span < best:
                best = span
        return INFEASIBLE if best is None else best

    def evaluate(self, case: QueryCase, plan: Mapping[str, Any]) -> tuple[list[str], Any]:
        t = self.tables(case)
        pairs = [tuple(p) for p in plan["assignments"]]
        bad = []
        for r, task in pairs:
            if r not in t["Robot"] or task not in t["Task"]:
                raise ValueError(f"unknown assignment {(r, task)!r}")
        for task in t["Task"]:
            n = sum(1 for _, t2 in pairs if t2 == task)
            if n != 1:
                bad.append(f"task {task} assigned {n} times")
        for key, v in self.pinned(case, "assign").items():
            if (key in pairs) != v:
                bad.append(f"query restriction on {key}")
        load = dict.fromkeys(t["Robot"], 0)
        for r, task in pairs:
            load[r] += t["duration"][r][task]
        return bad, max(load.values(), default=0)


_QUERIES = [
    ("How should the tasks be split among the robots to finish as early as possible?", "baseline", []),
    ("What if robot3 broke down and could take no tasks?", "robot-availability",
     [{"op": "forbid", "var": "assign", "key": ["robot3", "*"]}]),
    ("What if task4 had to be done by robot1?", "assignment", [{"op": "fix", "var": "assign", "key": ["robot1", "task4"], "value": True}]),
    ("What if robot2 took 8 time units for task2?", "duration",
     [{"op": "set", "table": "duration", "key": ["robot2", "task2"], "value": 8}]),
    ("What if robot1 became twice as slow on every task?", "duration",
     [{"op": "scale", "table": "duration", "key": ["robot1", "*"], "factor": "2", "round": "ceil"}]),
    ("What if task6 were cancelled?", "task-set",
     [{"op": "set", "table": "Task", "value": ["task1", "task2", "task3", "task4", "task5"]}]),
    ("What if a seventh task were added that takes each robot 4 time units?", "task-set",
     [{"op": "set", "table": "Task", "value": ["task1", "task2", "task3", "task4", "task5", "task6", "task7"]},
      {"op": "set", "table": "duration", "key": ["*", "task7"], "value": 4}]),
    ("What if robot2 could not do task4 or task2?", "assignment",
     [{"op": "forbid", "var": "assign", "key": ["robot2", "task4"]}, {"op": "forbid", "var": "assign", "key": ["robot2", "task2"]}]),
    ("What if every task took each robot 1 unit longer?", "duration",
     [{"op": "add", "table": "duration", "key": ["*", "*"], "value": 1}]),
    ("What if only robot1 were available?", "robot-availability",
     [{"op": "forbid", "var": "assign", "key": ["robot2", "*"]}, {"op": "forbid", "var": "assign", "key": ["robot3", "*"]}]),
    ("What if task1 and task5 both had to go to robot3?", "assignment",
     [{"op": "fix", "var": "assign", "key": ["robot3", "task1"], "value": True},
      {"op": "fix", "var": "assign", "key": ["robot3", "task5"], "value": True}]),
]


def generate_cases() -> list[QueryCase]:
    return [QueryCase(f"ta-{i:03d}", text, qtype, {"ops": ops}) for i, (text, qtype, ops) in enumerate(_QUERIES)]
