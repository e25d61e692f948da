"""Pipeline data artifacts shared by every stage.

The JSON forms produced by ``to_dict`` use the same field names the
formulation representation uses on the wire (``name``, ``SMT_variable``,
``number_of_variables``, ``data_source``, ``value``,
``specific_requirement``), so a formulator response can be loaded directly.
"""

from __future__ import annotations

import ast
import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, Mapping

SINGLE_STEP = "single_step"
MULTI_STEP = "multi_step"
MULTI_STEP_SECTIONS = ("objects", "predicates", "actions", "update", "goal")

IR_FIELDS = (
    "name",
    "SMT_variable",
    "number_of_variables",
    "data_source",
    "value",
    "specific_requirement",
)
# Older formulator demonstrations call the ``value`` field ``how_to_pick``.
IR_FIELD_ALIASES = {"how_to_pick": "value"}

# References a formulation may make without declaring them in the background.
BUILTIN_SOURCES = frozenset({"query", "update_data", "T", "math"})


class FrozenMap(tuple):
    """Immutable stand-in for a JSON object: a tuple of (key, value) pairs."""

    __slots__ = ()


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, dict):
        return FrozenMap((k, _freeze(v)) for k, v in value.items())
    return value


def _thaw(value: Any) -> Any:
    if isinstance(value, FrozenMap):
        return {k: _thaw(v) for k, v in value}
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    return value


# ---------------------------------------------------------------------------
# Problem input
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BackgroundItem:
    """A named data table or API signature available to the planner.

    ``kind`` is ``"data"`` for tables (``value`` holds JSON data) or
    ``"api"`` for callable helpers (``arity`` and ``doc`` describe them).
    """

    name: str
    kind: str = "data"
    value: Any = None
    arity: int | None = None
    doc: str = ""

    def __post_init__(self):
        object.__setattr__(self, "value", _freeze(self.value))

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.kind == "data":
            out["value"] = _thaw(self.value)
        else:
            out["arity"] = self.arity
        if self.doc:
            out["doc"] = self.doc
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "BackgroundItem":
        kind = data.get("kind", "data")
        return cls(
            name=data["name"],
            kind=kind,
            value=_freeze(data.get("value")) if kind == "data" else None,
            arity=data.get("arity"),
            doc=data.get("doc", ""),
        )

    @property
    def data(self) -> Any:
        """Plain (mutable) JSON view of the table value."""
        return _thaw(self.value)


@dataclass(frozen=True)
class ProblemInput:
    task_description: str
    background: tuple[BackgroundItem, ...]
    query: str
    domain_id: str | None = None

    def __post_init__(self):
        if not self.task_description.strip():
            raise ValueError("task_description must be non-empty")
        if not self.query.strip():
            raise ValueError("query must be non-empty")
        names = [b.name for b in self.background]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate background names: {', '.join(dupes)}")

    def background_item(self, name: str) -> BackgroundItem | None:
        for item in self.background:
            if item.name == name:
                return item
        return None

    def data_tables(self) -> dict[str, Any]:
        return {b.name: b.data for b in self.background if b.kind == "data"}

    def render_info_api(self) -> str:
        """Text listing of background tables and APIs used in prompts."""
        lines = []
        for item in self.background:
            if item.kind == "data":
                line = f"{item.name} = {json.dumps(item.data, sort_keys=False)}"
                lines.append(line + (f"  # {item.doc}" if item.doc else ""))
            else:
                lines.append(f"API {item.name} (arity {item.arity}): {item.doc}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "task_description": self.task_description,
            "background": [b.to_dict() for b in self.background],
            "query": self.query,
            "domain_id": self.domain_id,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProblemInput":
        return cls(
            task_description=data["task_description"],
            background=tuple(BackgroundItem.from_dict(b) for b in data.get("background", [])),
            query=data["query"],
            domain_id=data.get("domain_id"),
        )


# ---------------------------------------------------------------------------
# Definer output
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemDefinition:
    goal: str
    decision_variables: tuple[str, ...]
    constraint_reasoning: str
    constraints: tuple[str, ...]
    raw: str = ""

    def render(self) -> str:
        """Definer-style text block, as fed to downstream prompts."""
        if self.raw:
            return self.raw
        return (
            f"[[GOAL: {self.goal}]]\n"
            f"[[Decision Variables: {'; '.join(self.decision_variables)}]]\n"
            f"[[Constraints Reasoning: {self.constraint_reasoning}]]\n"
            f"[[Constraints: {'; '.join(self.constraints)}]]"
        )

    def to_dict(self) -> dict:
        return {
            "goal": self.goal,
            "decision_variables": list(self.decision_variables),
            "constraint_reasoning": self.constraint_reasoning,
            "constraints": list(self.constraints),
            "raw": self.raw,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ProblemDefinition":
        return cls(
            goal=data["goal"],
            decision_variables=tuple(data.get("decision_variables", ())),
            constraint_reasoning=data.get("constraint_reasoning", ""),
            constraints=tuple(data.get("constraints", ())),
            raw=data.get("raw", ""),
        )


# ---------------------------------------------------------------------------
# Formulation representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IRVariable:
    name: str | None
    smt_variable: bool | None
    number_of_variables: int | str | None
    data_source: str | tuple[str, ...] | None
    value: str | None
    specific_requirement: str | None

    def references(self) -> list[str]:
        """Leading identifiers of each data_source reference."""
        if self.data_source is None:
            return []
        parts = [self.data_source] if isinstance(self.data_source, str) else list(self.data_source)
        refs = []
        for part in parts:
            if part is None:
                continue
            for token in str(part).split(","):
                token = token.strip()
                if not token or token.lower() in ("null", "none"):
                    continue
                m = re.match(r"[A-Za-z_][A-Za-z0-9_\-]*", token)
                if m:
                    refs.append(m.group(0))
        return refs

    def to_dict(self) -> dict:
        ds = list(self.data_source) if isinstance(self.data_source, tuple) else self.data_source
        return {
            "name": self.name,
            "SMT_variable": self.smt_variable,
            "number_of_variables": self.number_of_variables,
            "data_source": ds,
            "value": self.value,
            "specific_requirement": self.specific_requirement,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "IRVariable":
        data = {IR_FIELD_ALIASES.get(k, k): v for k, v in data.items()}
        ds = data.get("data_source")
        if isinstance(ds, list):
            ds = tuple(str(d) for d in ds)
        return cls(
            name=data.get("name"),
            smt_variable=data.get("SMT_variable"),
            number_of_variables=data.get("number_of_variables"),
            data_source=ds,
            value=data.get("value"),
            specific_requirement=data.get("specific_requirement"),
        )


Section = tuple[tuple[str, IRVariable], ...]


@dataclass(frozen=True)
class FormulationIR:
    """The per-variable representation, single-step or sectioned.

    For ``single_step`` there is one unnamed section (key ``""``); for
    ``multi_step`` the sections are named after the five definition stages.
    ``raw_fields`` keeps the field names seen on the wire per variable id, so
    validation can report missing or unknown fields after loading.
    """

    kind: str
    sections: tuple[tuple[str, Section], ...]
    raw_fields: tuple[tuple[str, tuple[str, ...]], ...] = field(default=(), compare=False)

    def variables(self) -> Iterator[tuple[str, str, IRVariable]]:
        for section, entries in self.sections:
            for var_id, var in entries:
                yield section, var_id, var

    def section_names(self) -> list[str]:
        return [name for name, _ in self.sections]

    def get(self, var_id: str) -> IRVariable | None:
        for _, vid, var in self.variables():
            if vid == var_id:
                return var
        return None

    def to_dict(self) -> dict:
        if self.kind == SINGLE_STEP:
            entries = dict(self.sections[0][1]) if self.sections else {}
            return {vid: var.to_dict() for vid, var in entries.items()}
        return {name: {vid: var.to_dict() for vid, var in entries} for name, entries in self.sections}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FormulationIR":
        is_multi = any(k in MULTI_STEP_SECTIONS for k in data) and all(
            isinstance(v, Mapping) and all(isinstance(x, Mapping) for x in v.values()) for v in data.values()
        )
        raw_fields: list[tuple[str, tuple[str, ...]]] = []

        def load(entries: Mapping[str, Any]) -> Section:
            out = []
            for vid, body in entries.items():
                if not isinstance(body, Mapping):
                    raise ValueError(f"{vid}: variable entry must be an object")
                raw_fields.append((vid, tuple(body.keys())))
                out.append((vid, IRVariable.from_dict(body)))
            return tuple(out)

        if is_multi:
            sections = tuple((name, load(entries)) for name, entries in data.items())
            return cls(MULTI_STEP, sections, tuple(raw_fields))
        return cls(SINGLE_STEP, (("", load(data)),), tuple(raw_fields))


# ---------------------------------------------------------------------------
# Cardinality expressions
# ---------------------------------------------------------------------------


class CardinalityError(ValueError):
    pass


class UnboundName(CardinalityError):
    def __init__(self, name: str):
        super().__init__(f"unbound name {name!r} in cardinality expression")
        self.name = name


class NonPositiveResult(CardinalityError):
    def __init__(self, value):
        super().__init__(f"cardinality evaluates to {value}, expected a positive integer")
        self.value = value


_CARD_FUNCS = {"ceil": math.ceil, "floor": math.floor}


def evaluate_cardinality(expr: int | str, bindings: Mapping[str, int | float | Fraction] | None = None) -> int:
    """Evaluate a cardinality expression to a positive integer.

    Accepts integer literals, bound names, ``+ - * /`` and ``ceil``/``floor``
    (optionally spelled ``math.ceil``/``math.floor``). Decimal literals are
    read exactly, so ``ceil(20 * 1.09)`` is 22 with no float rounding.
    """
    bindings = bindings or {}
    if isinstance(expr, bool):
        raise CardinalityError("boolean is not a cardinality")
    if isinstance(expr, int):
        value: Fraction = Fraction(expr)
    else:
        try:
            tree = ast.parse(str(expr).strip(), mode="eval")
        except SyntaxError as exc:
            raise CardinalityError(f"cannot parse cardinality {expr!r}") from exc
        value = _eval_card(tree.body, bindings)
    if value.denominator != 1:
        raise CardinalityError(f"cardinality {expr!r} is not an integer ({value})")
    if value <= 0:
        raise NonPositiveResult(int(value))
    return int(value)


def _eval_card(node: ast.AST, bindings: Mapping[str, Any]) -> Fraction:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        # repr of the float literal recovers the decimal digits as written
        return Fraction(repr(node.value)) if isinstance(node.value, float) else Fraction(node.value)
    if isinstance(node, ast.Name):
        if node.id not in bindings:
            raise UnboundName(node.id)
        return Fraction(str(bindings[node.id])) if isinstance(bindings[node.id], float) else Fraction(bindings[node.id])
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_card(node.operand, bindings)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        left = _eval_card(node.left, bindings)
        right = _eval_card(node.right, bindings)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            if right == 0:
                raise CardinalityError("division by zero")
            return left / right
    if isinstance(node, ast.Call) and len(node.args) == 1 and not node.keywords:
        fn = node.func
        fname = None
        if isinstance(fn, ast.Name):
            fname = fn.id
        elif isinstance(fn, ast.Attribute) and isinstance(fn.value, ast.Name) and fn.value.id == "math":
            fname = fn.attr
        if fname in _CARD_FUNCS:
            return Fraction(_CARD_FUNCS[fname](_eval_card(node.args[0], bindings)))
    raise CardinalityError(f"unsupported construct in cardinality: {ast.dump(node)}")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationIssue:
    kind: str
    where: str
    message: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "where": self.where, "message": self.message}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ValidationIssue":
        return cls(data["kind"], data["where"], data["message"])

    def __str__(self) -> str:
        return f"{self.kind}({self.where}): {self.message}"


def _numeric_bindings(problem: ProblemInput) -> dict[str, Any]:
    out = {}
    for item in problem.background:
        if item.kind == "data" and isinstance(item.value, (int, float)) and not isinstance(item.value, bool):
            out[item.name] = item.value
    return out


def validate_formulation(ir: FormulationIR, problem: ProblemInput) -> list[ValidationIssue]:
    """Check the shape invariants of a formulation; never raises.

    Descriptive (non-arithmetic) ``number_of_variables`` text and ``null`` are
    tolerated in the ``update`` and ``goal`` sections of multi-step
    formulations, where entries describe assertions rather than variables.
    """
    issues: list[ValidationIssue] = []
    if ir.kind == MULTI_STEP:
        present = ir.section_names()
        for name in MULTI_STEP_SECTIONS:
            if name not in present:
                issues.append(ValidationIssue("MissingSection", name, f"section {name!r} is missing"))
        for name in present:
            if name not in MULTI_STEP_SECTIONS:
                issues.append(ValidationIssue("UnknownSection", name, f"unexpected section {name!r}"))
    elif ir.kind != SINGLE_STEP:
        issues.append(ValidationIssue("BadKind", "", f"unknown formulation kind {ir.kind!r}"))

    raw = dict(ir.raw_fields)
    seen: dict[str, str] = {}
    for section, var_id, _ in ir.variables():
        if var_id in seen:
            issues.append(ValidationIssue("DuplicateId", var_id, f"id {var_id!r} used in {seen[var_id]!r} and {section!r}"))
        seen[var_id] = section
        if var_id in raw:
            fields = [IR_FIELD_ALIASES.get(f, f) for f in raw[var_id]]
            for f in IR_FIELDS:
                if f not in fields:
                    issues.append(ValidationIssue("MissingField", var_id, f"field {f!r} is missing"))
            for f in fields:
                if f not in IR_FIELDS:
                    issues.append(ValidationIssue("UnknownField", var_id, f"unexpected field {f!r}"))

    background_names = {b.name for b in problem.background}
    bindings = _numeric_bindings(problem)
    graph: dict[str, list[str]] = {}
    for section, var_id, var in ir.variables():
        deps = []
        for ref in var.references():
            if ref in seen:
                deps.append(ref)
            elif ref in background_names or ref in BUILTIN_SOURCES:
                continue
            else:
                issues.append(ValidationIssue("UnresolvedReference", var_id, f"data_source {ref!r} names no background item or variable"))
        graph[var_id] = deps

        descriptive_ok = ir.kind == MULTI_STEP and section in ("update", "goal")
        card = var.number_of_variables
        if card is None:
            if not descriptive_ok:
                issues.append(ValidationIssue("BadCardinality", var_id, "number_of_variables is null"))
            continue
        try:
            evaluate_cardinality(card, bindings)
        except UnboundName as exc:
            issues.append(ValidationIssue("UnboundName", var_id, str(exc)))
        except NonPositiveResult as exc:
            issues.append(ValidationIssue("NonPositiveResult", var_id, str(exc)))
        except CardinalityError as exc:
            if not descriptive_ok:
                issues.append(ValidationIssue("BadCardinality", var_id, str(exc)))

    cycle = _find_cycle(graph)
    if cycle:
        issues.append(ValidationIssue("CyclicReference", cycle[0], " -> ".join(cycle)))
    return issues


def _find_cycle(graph: Mapping[str, list[str]]) -> list[str] | None:
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(node: str) -> list[str] | None:
        state[node] = 1
        stack.append(node)
        for nxt in graph.get(node, ()):
            if state.get(nxt) == 1:
                return stack[stack.index(nxt):] + [nxt]
            if state.get(nxt) is None:
                found = visit(nxt)
                if found:
                    return found
        stack.pop()
        state[node] = 2
        return None

    for node in graph:
        if node not in state:
            found = visit(node)
            if found:
                return found
    return None


def evaluation_order(ir: FormulationIR) -> list[str]:
    """Variable ids ordered so that every data_source dependency comes first."""
    ids = [vid for _, vid, _ in ir.variables()]
    known = set(ids)
    deps = {vid: [r for r in var.references() if r in known] for _, vid, var in ir.variables()}
    order: list[str] = []
    done: set[str] = set()

    def place(vid: str, trail: tuple[str, ...]) -> None:
        if vid in done:
            return
        if vid in trail:
            raise ValueError(f"cyclic data_source references through {vid!r}")
        for d in deps[vid]:
            place(d, trail + (vid,))
        done.add(vid)
        order.append(vid)

    for vid in ids:
        place(vid, ())
    return order


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

PLAN_STATUSES = ("plan", "infeasible", "runtime_error", "budget_exhausted")
STEP_NAMES = ("definition", "formulation", "encoding")


@dataclass(frozen=True)
class StageRecord:
    """One trace entry: a chat call, a solver check, or a validation issue."""

    stage: str
    kind: str
    loop: int
    attempt: int
    duration: float = 0.0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "kind": self.kind,
            "loop": self.loop,
            "attempt": self.attempt,
            "duration": self.duration,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "StageRecord":
        return cls(**{k: data[k] for k in ("stage", "kind", "loop", "attempt")},
                   duration=data.get("duration", 0.0),
                   prompt_tokens=data.get("prompt_tokens", 0),
                   completion_tokens=data.get("completion_tokens", 0),
                   detail=data.get("detail", ""))


@dataclass(frozen=True)
class AssessmentReport:
    ratings: tuple[int, int, int]
    reasoning: tuple[str, str, str]
    modification: str | None = None
    modified_step: str | None = None

    def __post_init__(self):
        if len(self.ratings) != 3 or any(r not in (0, 1) for r in self.ratings):
            raise ValueError(f"ratings must be three binary values, got {self.ratings}")
        if all(self.ratings) and self.modification is not None:
            raise ValueError("modification given although every step is rated correct")
        if self.modification is not None and self.modified_step != self.first_incorrect():
            raise ValueError("modification must target the first incorrect step")

    def first_incorrect(self) -> str | None:
        for name, rating in zip(STEP_NAMES, self.ratings):
            if rating == 0:
                return name
        return None

    @property
    def passed(self) -> bool:
        return all(self.ratings)

    def to_dict(self) -> dict:
        return {
            "step_ratings": list(self.ratings),
            "reasoning": list(self.reasoning),
            "modification": self.modification,
            "modified_step": self.modified_step,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "AssessmentReport":
        return cls(
            ratings=tuple(data["step_ratings"]),
            reasoning=tuple(data["reasoning"]),
            modification=data.get("modification"),
            modified_step=data.get("modified_step"),
        )


PLAN_RESULT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PlanResult:
    status: str
    plan: Any = None
    objective_value: int | float | None = None
    horizon: int | None = None
    stage_trace: tuple[StageRecord, ...] = ()
    assessments: tuple[AssessmentReport, ...] = ()
    last_plan_attempt: Any = None
    detail: str = ""

    def __post_init__(self):
        if self.status not in PLAN_STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if (self.status == "plan") != (self.plan is not None):
            raise ValueError("plan must be present exactly when status is 'plan'")
        object.__setattr__(self, "plan", _freeze(self.plan))
        object.__setattr__(self, "last_plan_attempt", _freeze(self.last_plan_attempt))

    @property
    def assess_loops(self) -> int:
        """Assessment loops run, including ones whose answer did not parse."""
        return sum(1 for r in self.stage_trace if r.stage == "assess" and r.kind == "chat")

    def to_dict(self, include_durations: bool = True) -> dict:
        trace = [r.to_dict() for r in self.stage_trace]
        if not include_durations:
            for r in trace:
                r["duration"] = 0.0
        return {
            "schema_version": PLAN_RESULT_SCHEMA_VERSION,
            "status": self.status,
            "plan": _thaw(self.plan),
            "objective_value": self.objective_value,
            "horizon": self.horizon,
            "stage_trace": trace,
            "assessments": [a.to_dict() for a in self.assessments],
            "last_plan_attempt": _thaw(self.last_plan_attempt),
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PlanResult":
        version = data.get("schema_version", PLAN_RESULT_SCHEMA_VERSION)
        if version != PLAN_RESULT_SCHEMA_VERSION:
            raise ValueError(f"unsupported PlanResult schema_version {version}")
        return cls(
            status=data["status"],
            plan=_freeze(data.get("plan")),
            objective_value=data.get("objective_value"),
            horizon=data.get("horizon"),
            stage_trace=tuple(StageRecord.from_dict(r) for r in data.get("stage_trace", ())),
            assessments=tuple(AssessmentReport.from_dict(a) for a in data.get("assessments", ())),
            last_plan_attempt=_freeze(data.get("last_plan_attempt")),
            detail=data.get("detail", ""),
        )

    @property
    def plan_data(self) -> Any:
        return _thaw(self.plan)
