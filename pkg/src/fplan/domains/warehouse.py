"""Warehouse picking route: cover every required item with the shortest tour."""

from __future__ import annotations

import itertools
from typing import Any, Mapping, Sequence

from .base import INFEASIBLE, QueryCase, SingleStepDomain

END = "end"


def route_length(t: Mapping[str, Any], route: Sequence[str]) -> int:
    if not route:
        return 0
    total = t["depot_distance"][route[0]]
    for a, b in zip(route, route[1:]):
        total += t["distance"][a][b]
    return total


def covers(t: Mapping[str, Any], stations: Sequence[str]) -> bool:
    return all(
        any(t["offers"][s][i] for s in stations)
        for i in t["Item"]
        if t["required"][i]
    )


class Warehouse(SingleStepDomain):
    id = "warehouse"
    upstream_query_count = 50
    var_index = {"visit": ("Pos", "Node")}
    bool_vars = frozenset({"visit"})

    def closed(self, case: QueryCase) -> set[str]:
        return {n for (_, n), v in self.pinned(case, "visit").items() if v is False and n != END}

    def compute_oracle(self, case: QueryCase) -> Any:
        """Every ordered selection of open stations that fits the route slots."""
        t = self.tables(case)
        slots = len(t["Pos"])
        stations = [s for s in t["Station"] if s not in self.closed(case)]
        best = None
        for k in range(min(slots, len(stations)) + 1):
            for chosen in itertools.combinations(stations, k):
                if not covers(t, chosen):
                    continue
                for order in itertools.permutations(chosen):
                    d = route_length(t, order)
                    if best is None or d < best:
                        best = d
        return INFEASIBLE if best is None else best

    def evaluate(self, case: QueryCase, plan: Mapping[str, Any]) -> tuple[list[str], Any]:
        t = self.tables(case)
        route = list(plan["route"])
        bad = []
        for s in route:
            if s not in t["Station"]:
                raise ValueError(f"unknown station {s!r}")
        if len(route) > len(t["Pos"]):
            bad.append("route longer than the available slots")
        if len(set(route)) != len(route):
            bad.append("station visited twice")
        if not covers(t, route):
            bad.append("required items not covered")
        for s in set(route) & self.closed(case):
            bad.append(f"query restriction on station {s}")
        return bad, route_length(t, route)


def _close(station: str) -> dict:
    return {"op": "forbid", "var": "visit", "key": ["*", station]}


_QUERIES = [
    ("Which stations should the picker visit, and in what order, to collect every required item?", "baseline", []),
    ("What if station st4 were closed?", "station-closed", [_close("st4")]),
    ("What if st1 and st2 were both closed?", "station-closed", [_close("st1"), _close("st2")]),
    ("What if screws were also required?", "requirement", [{"op": "set", "table": "required", "key": ["screws"], "value": True}]),
    ("What if only bolts and gears were needed?", "requirement",
     [{"op": "set", "table": "required", "key": ["wires"], "value": False},
      {"op": "set", "table": "required", "key": ["panels"], "value": False}]),
    ("What if st2 ran out of gears?", "stock", [{"op": "set", "table": "offers", "key": ["st2", "gears"], "value": False}]),
    ("What if st5 started stocking wires?", "stock", [{"op": "set", "table": "offers", "key": ["st5", "wires"], "value": True}]),
    ("What if the walk from the depot to st4 grew to 10?", "distance",
     [{"op": "set", "table": "depot_distance", "key": ["st4"], "value": 10}]),
    ("What if the aisle between st1 and st3 were blocked, making that leg 12 each way?", "distance",
     [{"op": "set", "table": "distance", "key": ["st1", "st3"], "value": 12},
      {"op": "set", "table": "distance", "key": ["st3", "st1"], "value": 12}]),
    ("What if nothing at all were required?", "requirement",
     [{"op": "set", "table": "required", "key": ["*"], "value": False}]),
    ("What if st3 and st5 were both closed?", "station-closed", [_close("st3"), _close("st5")]),
    ("What if screws were required and st2 were closed?", "station-closed",
     [{"op": "set", "table": "required", "key": ["screws"], "value": True}, _close("st2")]),
]


def generate_cases() -> list[QueryCase]:
    return [QueryCase(f"wh-{i:03d}", text, qtype, {"ops": ops}) for i, (text, qtype, ops) in enumerate(_QUERIES)]
