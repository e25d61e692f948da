"""Deterministic conversion of solver models into domain plan schemas.

A schema is a JSON object ``{"kind": ..., "fields": [...]}``.  Each field has
a ``name`` and a ``type``:

``scalar``     value of the scalar variable ``variable``
``table``      nested mapping over the index of ``variable``
``selection``  sorted index tuples where the Bool family ``variable`` is true
``sequence``   Bool family over (position, item): the true item per position,
               stopping at ``sentinel`` (optional)
``actions``    ordered action labels, one per timestep
``objective``  the optimized objective value
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping

from .lower import SmtProblem
from .solve import SolveOutcome

FIELD_TYPES = ("scalar", "table", "selection", "sequence", "actions", "objective")


class SchemaMismatch(Exception):
    pass


class DecodeError(Exception):
    pass


@dataclass(frozen=True)
class PlanSchema:
    kind: str
    fields: tuple[Mapping[str, Any], ...]

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PlanSchema":
        fields = tuple(dict(f) for f in data.get("fields", ()))
        for f in fields:
            if f.get("type") not in FIELD_TYPES or "name" not in f:
                raise SchemaMismatch(f"bad schema field {f!r}")
        return cls(data.get("kind", "single_step"), fields)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "fields": [dict(f) for f in self.fields]}

    @property
    def variables(self) -> list[str]:
        return [f["variable"] for f in self.fields if "variable" in f]


def json_number(v: Any) -> Any:
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else float(v)
    return v


def _family(problem: SmtProblem, name: str) -> dict[tuple, str]:
    try:
        return problem.families[name]
    except KeyError:
        raise SchemaMismatch(f"schema field refers to {name!r}, which the program does not declare") from None


def decode(outcome: SolveOutcome, schema: PlanSchema | Mapping[str, Any], problem: SmtProblem | None = None) -> dict:
    """Fill ``schema`` from a sat outcome; never invents missing values."""
    if isinstance(schema, Mapping):
        schema = PlanSchema.from_dict(schema)
    if outcome.status != "sat" or outcome.model is None:
        raise DecodeError(f"cannot decode a {outcome.status} outcome")
    problem = problem or outcome.problem
    if problem is None:
        raise DecodeError("decoding needs the lowered problem")
    model = outcome.model
    plan: dict[str, Any] = {}
    for f in schema.fields:
        kind = f["type"]
        if kind == "objective":
            if outcome.objective_value is None:
                raise SchemaMismatch(f"field {f['name']!r} wants an objective but the program has none")
            plan[f["name"]] = json_number(outcome.objective_value)
        elif kind == "actions":
            plan[f["name"]] = decode_actions(model, problem)
        else:
            fam = _family(problem, f["variable"])
            if kind == "scalar":
                if () not in fam:
                    raise SchemaMismatch(f"{f['variable']!r} is indexed, not a scalar")
                plan[f["name"]] = json_number(model[fam[()]])
            elif kind == "table":
                plan[f["name"]] = _table(fam, model)
            elif kind == "selection":
                rows = sorted((k for k, sym in fam.items() if model[sym] is True), key=repr)
                plan[f["name"]] = [list(k) if len(k) != 1 else k[0] for k in rows]
            elif kind == "sequence":
                plan[f["name"]] = _sequence(fam, model, f.get("sentinel"))
    return plan


def _table(fam: Mapping[tuple, str], model: Mapping[str, Any]) -> Any:
    out: dict = {}
    for key, sym in fam.items():
        if not key:
            return json_number(model[sym])
        node = out
        for k in key[:-1]:
            node = node.setdefault(str(k), {})
        node[str(key[-1])] = json_number(model[sym])
    return out


def _sequence(fam: Mapping[tuple, str], model: Mapping[str, Any], sentinel: Any) -> list:
    by_pos: dict[Any, list] = {}
    for key, sym in fam.items():
        if len(key) != 2:
            raise SchemaMismatch("a sequence field needs a family indexed by (position, item)")
        by_pos.setdefault(key[0], [])
        if model[sym] is True:
            by_pos[key[0]].append(key[1])
    seq = []
    for pos in sorted(by_pos):
        chosen = by_pos[pos]
        if len(chosen) != 1:
            raise DecodeError(f"position {pos} holds {len(chosen)} items, expected exactly one")
        if sentinel is not None and chosen[0] == sentinel:
            break
        seq.append(chosen[0])
    return seq


def decode_actions(model: Mapping[str, Any], problem: SmtProblem) -> list[str]:
    """Action labels ordered by timestep; empty for a zero horizon."""
    T = problem.horizon or 0
    plan = []
    for t in range(T):
        chosen = [ga.label for ga, lits in problem.actions if model[lits[t].decl().name()] is True]
        if len(chosen) != 1:
            raise DecodeError(f"step {t} has {len(chosen)} actions, expected exactly one")
        plan.append(chosen[0])
    return plan
