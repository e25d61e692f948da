"""Coffee supply chain: suppliers to roasteries to cafes, light and dark roasts."""

from __future__ import annotations

import itertools
from typing import Any, Iterator, Mapping

import networkx as nx

from .base import INFEASIBLE, InstanceTooLarge, QueryCase, SingleStepDomain

# largest number of joint flow assignments the enumeration oracle will try
ENUMERATION_CAP = 2_000_000


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Ordered ways to write ``total`` as ``parts`` non-negative integers."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first, *rest)


class Coffee(SingleStepDomain):
    id = "coffee"
    upstream_query_count = 266
    var_index = {"x": ("Supplier", "Roastery"), "y_light": ("Roastery", "Cafe"), "y_dark": ("Roastery", "Cafe")}

    def compute_oracle(self, case: QueryCase) -> Any:
        if self.dataset_name(case) == "desk":
            return self.enumeration_oracle(case)
        return self.flow_oracle(case)

    def flow_oracle(self, case: QueryCase) -> Any:
        """Min-cost flow; integral optimum since all data are integers."""
        t = self.tables(case)
        banned = {(var, *k) for var in self.var_index for k in self.pinned(case, var)}
        g = nx.DiGraph()
        total = 0
        for c in t["Cafe"]:
            for roast in ("light", "dark"):
                need = t[f"{roast}_coffee_needed_for_cafe"][c]
                g.add_node(("cafe", c, roast), demand=need)
                total += need
        g.add_node("source", demand=-total)
        for s in t["Supplier"]:
            g.add_edge("source", ("sup", s), capacity=t["capacity_in_supplier"][s], weight=0)
            for r in t["Roastery"]:
                if ("x", s, r) not in banned:
                    g.add_edge(("sup", s), ("roast", r), weight=t["shipping_cost_from_supplier_to_roastery"][s][r])
        for r in t["Roastery"]:
            for roast in ("light", "dark"):
                g.add_edge(("roast", r), ("out", r, roast), weight=t[f"roasting_cost_{roast}"][r])
                for c in t["Cafe"]:
                    if (f"y_{roast}", r, c) not in banned:
                        g.add_edge(("out", r, roast), ("cafe", c, roast), weight=t["shipping_cost_from_roastery_to_cafe"][r][c])
        try:
            cost, _ = nx.network_simplex(g)
        except nx.NetworkXUnfeasible:
            return INFEASIBLE
        return cost

    def enumeration_oracle(self, case: QueryCase) -> Any:
        """Exhaustive search over integer flows.

        Cafe deliveries range over exact splits of each requirement (shipping
        more never lowers a non-negative cost); supplier purchases range over
        exact splits of what each roastery ships out.
        """
        t = self.tables(case)
        S, R, C = t["Supplier"], t["Roastery"], t["Cafe"]
        banned = {(var, *k) for var in self.var_index for k in self.pinned(case, var)}
        ship_sr = t["shipping_cost_from_supplier_to_roastery"]
        ship_rc = t["shipping_cost_from_roastery_to_cafe"]

        demand_slots = [(c, roast) for c in C for roast in ("light", "dark")]
        split_options = []
        for c, roast in demand_slots:
            opts = [
                split
                for split in _compositions(t[f"{roast}_coffee_needed_for_cafe"][c], len(R))
                if all(v == 0 or (f"y_{roast}", r, c) not in banned for r, v in zip(R, split))
            ]
            split_options.append(opts)
        size = 1
        for opts in split_options:
            size *= max(1, len(opts))
        if size > ENUMERATION_CAP:
            raise InstanceTooLarge(f"{size} delivery combinations exceed the cap of {ENUMERATION_CAP}")

        purchase_memo: dict[tuple, Any] = {}

        def purchase_cost(need: tuple[int, ...]) -> Any:
            if need in purchase_memo:
                return purchase_memo[need]
            best = None
            per_roastery = [
                [
                    split
                    for split in _compositions(n, len(S))
                    if all(v == 0 or ("x", s, r) not in banned for s, v in zip(S, split))
                ]
                for r, n in zip(R, need)
            ]
            for choice in itertools.product(*per_roastery):
                used = [sum(choice[j][i] for j in range(len(R))) for i in range(len(S))]
                if any(u > t["capacity_in_supplier"][s] for u, s in zip(used, S)):
                    continue
                cost = sum(ship_sr[s][r] * choice[j][i] for j, r in enumerate(R) for i, s in enumerate(S))
                if best is None or cost < best:
                    best = cost
            purchase_memo[need] = best
            return best

        best = None
        for combo in itertools.product(*split_options):
            need = [0] * len(R)
            cost = 0
            for (c, roast), split in zip(demand_slots, combo):
                for j, r in enumerate(R):
                    need[j] += split[j]
                    cost += split[j] * (t[f"roasting_cost_{roast}"][r] + ship_rc[r][c])
            if best is not None and cost >= best:
                continue
            buy = purchase_cost(tuple(need))
            if buy is None:
                continue
            if best is None or cost + buy < best:
                best = cost + buy
        return INFEASIBLE if best is None else best

    def evaluate(self, case: QueryCase, plan: Mapping[str, Any]) -> tuple[list[str], Any]:
        t = self.tables(case)
        S, R, C = t["Supplier"], t["Roastery"], t["Cafe"]
        x = plan["supplier_to_roastery"]
        y = {"light": plan["light_roastery_to_cafe"], "dark": plan["dark_roastery_to_cafe"]}
        bad = []
        values = [x[s][r] for s in S for r in R] + [y[k][r][c] for k in y for r in R for c in C]
        if any(not isinstance(v, int) or isinstance(v, bool) or v < 0 for v in values):
            bad.append("non-negative integer quantities")
        for s in S:
            if sum(x[s][r] for r in R) > t["capacity_in_supplier"][s]:
                bad.append(f"supplier capacity ({s})")
        for r in R:
            if sum(x[s][r] for s in S) != sum(y[k][r][c] for k in y for c in C):
                bad.append(f"flow conservation ({r})")
        for c in C:
            for k in y:
                if sum(y[k][r][c] for r in R) < t[f"{k}_coffee_needed_for_cafe"][c]:
                    bad.append(f"{k} demand ({c})")
        for var in self.var_index:
            for key, value in self.pinned(case, var).items():
                got = x[key[0]][key[1]] if var == "x" else y[var[2:]][key[0]][key[1]]
                if got != value:
                    bad.append(f"query restriction on {var}{list(key)}")
        cost = sum(t["shipping_cost_from_supplier_to_roastery"][s][r] * x[s][r] for s in S for r in R)
        for k in y:
            for r in R:
                for c in C:
                    cost += (t[f"roasting_cost_{k}"][r] + t["shipping_cost_from_roastery_to_cafe"][r][c]) * y[k][r][c]
        return bad, cost


def _demand_scale(cafe: str, pct: int, up: bool = True) -> list[dict]:
    factor = f"{(100 + pct if up else 100 - pct) / 100:.2f}"
    return [
        {"op": "scale", "table": f"{k}_coffee_needed_for_cafe", "key": [cafe], "factor": factor, "round": "ceil"}
        for k in ("light", "dark")
    ]


def _forbid_route(roastery: str, cafe: str) -> list[dict]:
    return [{"op": "forbid", "var": v, "key": [roastery, cafe]} for v in ("y_light", "y_dark")]


# (query text, query type, ops, note); the dataset is added per block below
_ORIGINAL = [
    ("What is the lowest total cost of meeting every cafe's demand?", "baseline", [], ""),
    ("What would happen if demand at cafe2 increased by 29%?", "demand-increase", _demand_scale("cafe2", 29), ""),
    ("What if demand at cafe1 went up by 15%?", "demand-increase", _demand_scale("cafe1", 15), ""),
    ("What if dark coffee demand at cafe3 dropped by 20%?", "demand-decrease",
     [{"op": "scale", "table": "dark_coffee_needed_for_cafe", "key": ["cafe3"], "factor": "0.80", "round": "ceil"}], ""),
    ("What if supplier3 could no longer ship to roastery1?", "supply-roastery",
     [{"op": "forbid", "var": "x", "key": ["supplier3", "roastery1"]}], ""),
    ("What would the cost be if we did not buy anything from supplier3?", "supply-roastery",
     [{"op": "forbid", "var": "x", "key": ["supplier3", "*"]}],
     "read as: supplier3 is not used at all; questions of this kind are ambiguous in intent"),
    ("What if roastery2 could not deliver to cafe3?", "roastery-cafe", _forbid_route("roastery2", "cafe3"), ""),
    ("What if supplier1 could only provide 120 units?", "supply",
     [{"op": "set", "table": "capacity_in_supplier", "key": ["supplier1"], "value": 120}], ""),
    ("What if shipping from supplier2 to roastery2 cost 5 per unit?", "shipping-cost",
     [{"op": "set", "table": "shipping_cost_from_supplier_to_roastery", "key": ["supplier2", "roastery2"], "value": 5}], ""),
    ("What if light roasting at roastery1 cost 2 more per unit?", "roasting-cost",
     [{"op": "add", "table": "roasting_cost_light", "key": ["roastery1"], "value": 2}], ""),
]

_DESK = [
    ("Small network: what is the cheapest way to supply both cafes?", "baseline", [], ""),
    ("Small network: what if demand at cafe1 increased by 50%?", "demand-increase", _demand_scale("cafe1", 50), ""),
    ("Small network: what if demand at cafe2 grew by 34%?", "demand-increase", _demand_scale("cafe2", 34), ""),
    ("Small network: what if light coffee demand at cafe2 fell by 50%?", "demand-decrease",
     [{"op": "scale", "table": "light_coffee_needed_for_cafe", "key": ["cafe2"], "factor": "0.50", "round": "ceil"}], ""),
    ("Small network: what if supplier2 could not ship to roastery2?", "supply-roastery",
     [{"op": "forbid", "var": "x", "key": ["supplier2", "roastery2"]}], ""),
    ("Small network: what if nothing were bought from supplier1?", "supply-roastery",
     [{"op": "forbid", "var": "x", "key": ["supplier1", "*"]}], "supplier2 alone cannot cover demand"),
    ("Small network: what if roastery1 could not deliver to cafe1?", "roastery-cafe", _forbid_route("roastery1", "cafe1"), ""),
    ("Small network: what if supplier1 could only provide 4 units?", "supply",
     [{"op": "set", "table": "capacity_in_supplier", "key": ["supplier1"], "value": 4}], ""),
    ("Small network: what if shipping from supplier1 to roastery1 cost 8 per unit?", "shipping-cost",
     [{"op": "set", "table": "shipping_cost_from_supplier_to_roastery", "key": ["supplier1", "roastery1"], "value": 8}], ""),
    ("Small network: what if dark roasting at roastery2 cost 3 more per unit?", "roasting-cost",
     [{"op": "add", "table": "roasting_cost_dark", "key": ["roastery2"], "value": 3}], ""),
    ("Small network: what if roastery2 could not deliver to cafe2 and supplier1 could only provide 6 units?", "roastery-cafe",
     _forbid_route("roastery2", "cafe2") + [{"op": "set", "table": "capacity_in_supplier", "key": ["supplier1"], "value": 6}], ""),
]


def generate_cases() -> list[QueryCase]:
    cases = []
    for dataset, rows in (("original", _ORIGINAL), ("desk", _DESK)):
        for text, qtype, ops, note in rows:
            cases.append(QueryCase(f"co-{len(cases):03d}", text, qtype, {"dataset": dataset, "ops": ops}, note=note))
    return cases
