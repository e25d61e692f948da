"""Capacitated facility location with five candidate plants."""

from __future__ import annotations

import itertools
from typing import Any, Iterator, Mapping, Sequence

import networkx as nx

from .base import INFEASIBLE, InstanceTooLarge, QueryCase, SingleStepDomain

MAX_PLANTS = 10


def open_patterns(plants: Sequence[str]) -> Iterator[tuple[str, ...]]:
    """Every subset of ``plants`` (as the tuple of open plants), 2**n in all."""
    for pattern in itertools.product((False, True), repeat=len(plants)):
        yield tuple(p for p, v in zip(plants, pattern) if v)


def transport_cost(t: Mapping[str, Any], opened: tuple[str, ...]) -> Any:
    """Cheapest integral shipment plan from the ``opened`` plants, or None."""
    g = nx.DiGraph()
    total = sum(t["demand"].values())
    g.add_node("source", demand=-total)
    for c in t["Customer"]:
        g.add_node(("cust", c), demand=t["demand"][c])
    for p in opened:
        g.add_edge("source", ("plant", p), capacity=t["capacity"][p], weight=0)
        for c in t["Customer"]:
            g.add_edge(("plant", p), ("cust", c), weight=t["transport_cost"][p][c])
    try:
        cost, _ = nx.network_simplex(g)
    except nx.NetworkXUnfeasible:
        return None
    return cost


class Facility(SingleStepDomain):
    id = "facility"
    upstream_query_count = 165
    var_index = {"open": ("Plant",), "ship": ("Plant", "Customer")}
    bool_vars = frozenset({"open"})

    def compute_oracle(self, case: QueryCase) -> Any:
        """Minimum over every open/closed pattern of fixed plus transport cost."""
        t = self.tables(case)
        plants = t["Plant"]
        if len(plants) > MAX_PLANTS:
            raise InstanceTooLarge(f"{len(plants)} plants exceed the enumeration cap of {MAX_PLANTS}")
        forced = self.pinned(case, "open")
        best = None
        for opened in open_patterns(plants):
            if any(forced.get((p,), p in opened) != (p in opened) for p in plants):
                continue
            moving = transport_cost(t, opened)
            if moving is None:
                continue
            cost = sum(t["fixed_cost"][p] for p in opened) + moving
            if best is None or cost < best:
                best = cost
        return INFEASIBLE if best is None else best

    def evaluate(self, case: QueryCase, plan: Mapping[str, Any]) -> tuple[list[str], Any]:
        t = self.tables(case)
        opened = set(plan["open_plants"])
        ship = plan["shipments"]
        bad = []
        for p in opened:
            if p not in t["Plant"]:
                raise ValueError(f"unknown plant {p!r}")
        for p in t["Plant"]:
            for c in t["Customer"]:
                v = ship[p][c]
                if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                    bad.append(f"non-negative integer shipment ({p}, {c})")
            sent = sum(ship[p][c] for c in t["Customer"])
            if sent > (t["capacity"][p] if p in opened else 0):
                bad.append(f"plant capacity ({p})")
        for c in t["Customer"]:
            if sum(ship[p][c] for p in t["Plant"]) != t["demand"][c]:
                bad.append(f"customer demand ({c})")
        for (p,), v in self.pinned(case, "open").items():
            if (p in opened) != v:
                bad.append(f"query restriction on plant {p}")
        cost = sum(t["fixed_cost"][p] for p in opened)
        cost += sum(t["transport_cost"][p][c] * ship[p][c] for p in t["Plant"] for c in t["Customer"])
        return bad, cost


_QUERIES = [
    ("Which plants should be opened to serve all customers at the lowest cost?", "baseline", []),
    ("What if demand at customer2 increased by 25%?", "demand",
     [{"op": "scale", "table": "demand", "key": ["customer2"], "factor": "1.25", "round": "ceil"}]),
    ("What if every customer's demand grew by 40%?", "demand",
     [{"op": "scale", "table": "demand", "key": ["*"], "factor": "1.40", "round": "ceil"}]),
    ("What if plant4 could only produce 12 units?", "capacity",
     [{"op": "set", "table": "capacity", "key": ["plant4"], "value": 12}]),
    ("What if the fixed cost of plant3 rose to 160?", "fixed-cost",
     [{"op": "set", "table": "fixed_cost", "key": ["plant3"], "value": 160}]),
    ("What if plant4 had to stay closed?", "open-close", [{"op": "fix", "var": "open", "key": ["plant4"], "value": False}]),
    ("What if plant2 had to be opened?", "open-close", [{"op": "fix", "var": "open", "key": ["plant2"], "value": True}]),
    ("What if shipping from plant5 to customer1 cost 9 per unit?", "transport-cost",
     [{"op": "set", "table": "transport_cost", "key": ["plant5", "customer1"], "value": 9}]),
    ("What if plant1 could not serve customer4?", "route", [{"op": "forbid", "var": "ship", "key": ["plant1", "customer4"]}]),
    ("What if transport costs from every plant went up by 1 per unit?", "transport-cost",
     [{"op": "add", "table": "transport_cost", "key": ["*", "*"], "value": 1}]),
    ("What if plant4 had to stay closed and demand at customer4 doubled?", "open-close",
     [{"op": "fix", "var": "open", "key": ["plant4"], "value": False},
      {"op": "scale", "table": "demand", "key": ["customer4"], "factor": "2", "round": "ceil"}]),
    ("What if all plants but plant1 were closed?", "open-close",
     [{"op": "fix", "var": "open", "key": [p], "value": False} for p in ("plant2", "plant3", "plant4", "plant5")]),
]


def generate_cases() -> list[QueryCase]:
    return [QueryCase(f"fa-{i:03d}", text, qtype, {"ops": ops}) for i, (text, qtype, ops) in enumerate(_QUERIES)]
