"""Workforce scheduling: staff every shift with available workers at least pay."""

from __future__ import annotations

import itertools
from typing import Any, Mapping

from .base import INFEASIBLE, QueryCase, SingleStepDomain


class Workforce(SingleStepDomain):
    id = "workforce"
    upstream_query_count = 231
    var_index = {"assign": ("Worker", "Shift")}
    bool_vars = frozenset({"assign"})

    def limits(self, case: QueryCase) -> tuple[int | None, int | None]:
        lo = hi = None
        for op in case.delta.get("ops", []):
            if op["op"] == "max_shifts":
                hi = op["value"]
            elif op["op"] == "min_shifts":
                lo = op["value"]
        return lo, hi

    def extra_statements(self, case: QueryCase) -> list[str]:
        out = super().extra_statements(case)
        lo, hi = self.limits(case)
        if hi is not None:
            out.append(f"assert forall w in Worker: count(s in Shift) assign[w, s] <= {hi};")
        if lo is not None:
            out.append(f"assert forall w in Worker: count(s in Shift) assign[w, s] >= {lo};")
        return out

    def allowed(self, case: QueryCase, t: Mapping[str, Any]) -> dict[str, list[str]]:
        pins = self.pinned(case, "assign")
        return {
            s: [w for w in t["Worker"] if t["availability"][w][s] and pins.get((w, s), True)]
            for s in t["Shift"]
        }

    def compute_oracle(self, case: QueryCase) -> Any:
        """Depth-first branch and bound over shifts, one worker subset per shift."""
        t = self.tables(case)
        shifts, pay = t["Shift"], t["pay"]
        need = t["shift_requirement"]
        allowed = self.allowed(case, t)
        pins = self.pinned(case, "assign")
        must = {s: {w for (w, s2), v in pins.items() if s2 == s and v} for s in shifts}
        lo, hi = self.limits(case)
        # cheapest possible completion of each suffix, ignoring per-worker limits
        floor = [0] * (len(shifts) + 1)
        for i in range(len(shifts) - 1, -1, -1):
            costs = sorted(pay[w] for w in allowed[shifts[i]])
            floor[i] = floor[i + 1] + (sum(costs[: need[shifts[i]]]) if len(costs) >= need[shifts[i]] else 0)
        best = [None]
        load = {w: 0 for w in t["Worker"]}

        def dfs(i: int, cost: int) -> None:
            if best[0] is not None and cost + floor[i] >= best[0]:
                return
            if i == len(shifts):
                if lo is not None and any(n < lo for n in load.values()):
                    return
                best[0] = cost
                return
            s = shifts[i]
            for crew in itertools.combinations(allowed[s], need[s]):
                if not must[s] <= set(crew):
                    continue
                if hi is not None and any(load[w] >= hi for w in crew):
                    continue
                for w in crew:
                    load[w] += 1
                dfs(i + 1, cost + sum(pay[w] for w in crew))
                for w in crew:
                    load[w] -= 1

        dfs(0, 0)
        return INFEASIBLE if best[0] is None else best[0]

    def evaluate(self, case: QueryCase, plan: Mapping[str, Any]) -> tuple[list[str], Any]:
        t = self.tables(case)
        pairs = {tuple(p) for p in plan["assignments"]}
        bad = []
        for w, s in pairs:
            if w not in t["Worker"] or s not in t["Shift"]:
                raise ValueError(f"unknown assignment {(w, s)!r}")
            if not t["availability"][w][s]:
                bad.append(f"availability ({w}, {s})")
        for s in t["Shift"]:
            if sum(1 for w, s2 in pairs if s2 == s) != t["shift_requirement"][s]:
                bad.append(f"shift requirement ({s})")
        lo, hi = self.limits(case)
        for w in t["Worker"]:
            n = sum(1 for w2, _ in pairs if w2 == w)
            if (hi is not None and n > hi) or (lo is not None and n < lo):
                bad.append(f"shift limit ({w})")
        for key, v in self.pinned(case, "assign").items():
            if (key in pairs) != v:
                bad.append(f"query restriction on {key}")
        return bad, sum(t["pay"][w] for w, _ in pairs)


_QUERIES = [
    ("How should the week be staffed at the lowest total pay?", "baseline", []),
    ("What if no worker may take more than 2 shifts?", "fairness", [{"op": "max_shifts", "value": 2}]),
    ("What if every worker had to get at least 1 shift?", "fairness", [{"op": "min_shifts", "value": 1}]),
    ("What if dan became unavailable on tuesday?", "availability",
     [{"op": "set", "table": "availability", "key": ["dan", "tue"], "value": False}]),
    ("What if ed could not work at all this week?", "availability",
     [{"op": "forbid", "var": "assign", "key": ["ed", "*"]}]),
    ("What if wednesday needed 3 workers?", "requirement",
     [{"op": "set", "table": "shift_requirement", "key": ["wed"], "value": 3}]),
    ("What if monday needed only 1 worker?", "requirement",
     [{"op": "set", "table": "shift_requirement", "key": ["mon"], "value": 1}]),
    ("What if dan's pay rose to 11 per shift?", "pay", [{"op": "set", "table": "pay", "key": ["dan"], "value": 11}]),
    ("What if everyone's pay went up by 2 per shift?", "pay", [{"op": "add", "table": "pay", "key": ["*"], "value": 2}]),
    ("What if bob had to work on friday?", "assignment", [{"op": "fix", "var": "assign", "key": ["bob", "fri"], "value": True}]),
    ("What if no worker may take more than 2 shifts and fred could not work on monday?", "fairness",
     [{"op": "max_shifts", "value": 2}, {"op": "forbid", "var": "assign", "key": ["fred", "mon"]}]),
    ("What if no worker may take more than 1 shift?", "fairness", [{"op": "max_shifts", "value": 1}]),
]


def generate_cases() -> list[QueryCase]:
    return [QueryCase(f"wf-{i:03d}", text, qtype, {"ops": ops}) for i, (text, qtype, ops) in enumerate(_QUERIES)]
