"""Shared machinery for bundled benchmark domains."""

from __future__ import annotations

import copy
import itertools
import json
import math
import threading
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from ..fpl import ast as A
from ..fpl import parse, print_program, typecheck
from ..ir import BackgroundItem, ProblemInput
from ..smt import HorizonConfig, PlanSchema, SchemaMismatch, decode, lower, solve, solve_bounded_horizon
from ..strips import (
    DEFAULT_BFS_CAP,
    InstanceTooLarge,  # re-exported for the domain modules
    GroundAction,
    PreconditionViolated,
    atom_text,
    bfs,
    goal_reached,
    simulate,
)

DATA_DIR = Path(__file__).parent / "data"
INFEASIBLE = "infeasible"


class IncompleteMap(Exception):
    pass


class UnknownQuery(KeyError):
    pass


@dataclass(frozen=True)
class QueryCase:
    id: str
    query: str
    query_type: str
    delta: Mapping[str, Any] = field(default_factory=dict, hash=False)
    oracle_answer: Any = None
    note: str = ""

    def to_dict(self) -> dict:
        out = {"id": self.id, "query": self.query, "query_type": self.query_type, "delta": self.delta}
        if self.note:
            out["note"] = self.note
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], oracle_answer: Any = None) -> "QueryCase":
        return cls(d["id"], d["query"], d["query_type"], d.get("delta", {}), oracle_answer, d.get("note", ""))


@dataclass(frozen=True)
class Verdict:
    valid: bool
    optimal: bool
    diagnostics: tuple[str, ...] = ()
    value: Any = None

    def to_dict(self) -> dict:
        return {"valid": self.valid, "optimal": self.optimal, "diagnostics": list(self.diagnostics), "value": self.value}


@dataclass
class ReferenceRun:
    """Result of solving a case with the bundled reference program."""

    status: str
    plan: dict | None
    value: Any
    horizon: int | None
    outcome: Any = None


def load_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def dump_json(data: Any, path: Path) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n", encoding="utf-8")


class Domain:
    """A bundled domain backed by a directory of data files."""

    id: str = ""
    kind: str = "single_step"
    upstream_query_count: int = 0
    name_map: Mapping[str, str] | None = None

    def __init__(self, root: Path | None = None):
        self.root = root or DATA_DIR / self.id
        self._cache_lock = threading.Lock()
        self._oracle_memo: dict[str, Any] = {}

    # -- bundle files ----------------------------------------------------------

    @cached_property
    def description(self) -> str:
        return (self.root / "description.txt").read_text(encoding="utf-8").strip()

    @cached_property
    def background(self) -> dict:
        return load_json(self.root / "background.json")

    @cached_property
    def schema(self) -> PlanSchema:
        return PlanSchema.from_dict(load_json(self.root / "schema.json"))

    @cached_property
    def reference_source(self) -> str:
        return (self.root / "reference.fpl").read_text(encoding="utf-8")

    @cached_property
    def reference_ast(self) -> A.Program:
        return parse(self.reference_source)

    @cached_property
    def oracle_cache(self) -> dict:
        path = self.root / "oracle_cache.json"
        return load_json(path) if path.exists() else {}

    @cached_property
    def cases(self) -> list[QueryCase]:
        path = self.root / "queries.jsonl"
        out = []
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    d = json.loads(line)
                    out.append(QueryCase.from_dict(d, self.oracle_cache.get(d["id"])))
        return out

    def case(self, key: str) -> QueryCase:
        for c in self.cases:
            if key in (c.id, c.query):
                return c
        raise UnknownQuery(f"{self.id}: no query with id or text {key!r}")

    def slice(self, name: str = "desk") -> list[QueryCase]:
        """Named query slices: ``desk``/``all``, ``first:N``, or a query type."""
        if name in ("desk", "all"):
            return list(self.cases)
        if name.startswith("first:"):
            return list(self.cases[: int(name.split(":", 1)[1])])
        if name.startswith("id:"):
            wanted = set(name[3:].split(","))
            return [c for c in self.cases if c.id in wanted]
        return [c for c in self.cases if c.query_type == name]

    # -- per-case views --------------------------------------------------------

    def case_background(self, case: QueryCase) -> dict:
        return self.background

    def api_items(self) -> list[BackgroundItem]:
        return []

    def problem_input(self, case: QueryCase) -> ProblemInput:
        items = [BackgroundItem(name, "data", value) for name, value in self.case_background(case).items()]
        return ProblemInput(self.description, tuple(items + self.api_items()), case.query, self.id)

    def program_source(self, case: QueryCase) -> str:
        raise NotImplementedError

    # -- oracle ----------------------------------------------------------------

    def compute_oracle(self, case: QueryCase) -> Any:
        raise NotImplementedError

    def oracle_optimal(self, case: QueryCase, use_cache: bool = True) -> Any:
        if use_cache and case.id in self.oracle_cache:
            return self.oracle_cache[case.id]
        with self._cache_lock:
            if case.id in self._oracle_memo:
                return self._oracle_memo[case.id]
        value = self.compute_oracle(case)
        with self._cache_lock:
            self._oracle_memo[case.id] = value
        return value

    def validate_plan(self, case: QueryCase, plan: Any) -> Verdict:
        raise NotImplementedError

    def reference_run(self, case: QueryCase, timeout: float = 900.0, **kw) -> ReferenceRun:
        raise NotImplementedError


# -- single-step domains -------------------------------------------------------


def _keys_at(node: Any, pattern: Sequence[Any], create: bool = False) -> Iterable[tuple]:
    """Concrete key paths matching ``pattern``; ``create`` admits a new last key."""
    if not pattern:
        yield ()
        return
    head, rest = pattern[0], pattern[1:]
    keys = list(node) if head == "*" else [str(head)]
    for k in keys:
        if k not in node:
            if create and not rest:
                yield (k,)
                continue
            raise KeyError(f"no entry {k!r}")
        for tail in _keys_at(node[k], rest, create):
            yield (k, *tail)


def _get(node: Any, path: Sequence[str]) -> Any:
    for k in path:
        node = node[k]
    return node


def _set(node: Any, path: Sequence[str], value: Any) -> None:
    for k in path[:-1]:
        node = node[k]
    node[path[-1]] = value


def round_value(value: Fraction, mode: str) -> int | Fraction:
    if mode == "ceil":
        return math.ceil(value)
    if mode == "floor":
        return math.floor(value)
    return value


def apply_delta(tables: Mapping[str, Any], ops: Sequence[Mapping[str, Any]]) -> dict:
    """Apply data edits (``scale``, ``set``, ``add``) to a copy of ``tables``.

    Other op kinds are structural and left to the domain.
    """
    out = copy.deepcopy(dict(tables))
    for op in ops:
        kind = op["op"]
        if kind not in ("scale", "set", "add"):
            continue
        table = op["table"]
        pattern = op.get("key", [])
        for path in list(_keys_at(out[table], pattern, create=kind == "set")):
            if kind == "set":
                new = op["value"]
            else:
                old = _get(out[table], path) if path else out[table]
            if kind == "add":
                new = old + op["value"]
            elif kind == "scale":
                new = round_value(Fraction(old) * Fraction(str(op["factor"])), op.get("round", "ceil"))
            if isinstance(new, Fraction) and new.denominator == 1:
                new = int(new)
            if path:
                _set(out[table], path, new)
            else:
                out[table] = new
    return out


class SingleStepDomain(Domain):
    kind = "single_step"

    @cached_property
    def datasets(self) -> dict[str, dict]:
        path = self.root / "datasets.json"
        extra = load_json(path) if path.exists() else {}
        return {"original": self.background, **extra}

    def dataset_name(self, case: QueryCase) -> str:
        return case.delta.get("dataset", "original")

    def case_background(self, case: QueryCase) -> dict:
        return self.datasets[self.dataset_name(case)]

    def tables(self, case: QueryCase) -> dict:
        """Background tables after the case's data edits."""
        return apply_delta(self.case_background(case), case.delta.get("ops", []))

    # decision family -> index sets, used to phrase structural edits in FPL
    var_index: Mapping[str, tuple[str, ...]] = {}

    def extra_statements(self, case: QueryCase) -> list[str]:
        """FPL statements expressing the case's structural edits.

        ``forbid`` pins a family (``*`` ranges over a whole index set) to zero
        or false; ``fix`` pins it to ``value``.
        """
        out = []
        for op in case.delta.get("ops", []):
            if op["op"] in ("forbid", "fix"):
                out.append(self.pin_statement(op["var"], op["key"], op.get("value", 0)))
        return out

    def pin_statement(self, var: str, key: Sequence[Any], value: Any) -> str:
        binders, args = [], []
        for i, (k, set_name) in enumerate(zip(key, self.var_index[var])):
            if k == "*":
                binders.append(f"i{i} in {set_name}")
                args.append(f"i{i}")
            else:
                args.append(json.dumps(k))
        if var in self.bool_vars:
            value = "true" if value else "false"
        body = f"{var}[{', '.join(args)}] == {value}"
        return f"assert forall {', '.join(binders)}: {body};" if binders else f"assert {body};"

    bool_vars: frozenset = frozenset()

    def pinned(self, case: QueryCase, var: str) -> dict[tuple, Any]:
        """Index tuples of ``var`` pinned by the case, expanded over ``*``."""
        tables = self.tables(case)
        out = {}
        for op in case.delta.get("ops", []):
            if op["op"] in ("forbid", "fix") and op["var"] == var:
                domains = [tables[s] if k == "*" else [k] for k, s in zip(op["key"], self.var_index[var])]
                value = op.get("value", 0)
                if var in self.bool_vars:
                    value = bool(value)
                for key in itertools.product(*domains):
                    out[key] = value
        return out

    def program_source(self, case: QueryCase) -> str:
        base = self.case_background(case)
        edited = self.tables(case)
        stmts = []
        for s in self.reference_ast.statements:
            if isinstance(s, A.ParamDecl) and s.value is None and edited.get(s.name) != base.get(s.name):
                s = replace(s, value=edited[s.name])
            elif isinstance(s, A.SetDecl) and s.elements is None and s.range_ is None and edited.get(s.name) != base.get(s.name):
                s = replace(s, elements=tuple(edited[s.name]))
            stmts.append(s)
        text = print_program(A.Program(tuple(stmts)))
        extra = self.extra_statements(case)
        return text + "".join(line + "\n" for line in extra)

    def evaluate(self, case: QueryCase, plan: Mapping[str, Any]) -> tuple[list[str], Any]:
        """Constraint violations of ``plan`` and its objective value."""
        raise NotImplementedError

    def better(self, a: Any, b: Any) -> bool:
        return a < b

    def validate_plan(self, case: QueryCase, plan: Any) -> Verdict:
        if not isinstance(plan, Mapping):
            raise SchemaMismatch("a plan is a JSON object")
        for f in self.schema.fields:
            if f["type"] != "objective" and f["name"] not in plan:
                raise SchemaMismatch(f"plan lacks field {f['name']!r}")
        try:
            violations, value = self.evaluate(case, plan)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaMismatch(f"malformed plan: {exc}") from exc
        if violations:
            return Verdict(False, False, tuple(violations), value)
        best = self.oracle_optimal(case)
        optimal = best != INFEASIBLE and value == best
        diag = () if optimal else (f"objective {value} differs from optimum {best}",)
        return Verdict(True, optimal, diag, value)

    def reference_run(self, case: QueryCase, timeout: float = 900.0, **kw) -> ReferenceRun:
        prog = parse(self.program_source(case))
        env = typecheck(prog, self.case_background(case))
        problem = lower(prog, env)
        outcome = solve(problem, timeout)
        if outcome.status != "sat":
            return ReferenceRun(outcome.status, None, None, None, outcome)
        plan = decode(outcome, self.schema, problem)
        return ReferenceRun("plan", plan, outcome.objective_value, None, outcome)


# -- multi-step domains --------------------------------------------------------


def render_atoms(atoms: Iterable[tuple]) -> str:
    return ", ".join(atom_text(a) for a in sorted(atoms, key=repr))


def render_query(objects: Mapping[str, Sequence], init: Iterable[tuple], goal: Iterable[tuple]) -> str:
    objs = "; ".join(f"{k}: {', '.join(map(str, v))}" for k, v in objects.items())
    head = f"Objects ({objs}). " if objs else ""
    return (
        f"{head}Initially the following facts hold: {render_atoms(init)}. "
        f"Find the shortest plan that reaches a state where {render_atoms(goal)} hold."
    )


def _fpl_atom(atom: tuple) -> str:
    args = ", ".join(json.dumps(a) if isinstance(a, str) else str(a) for a in atom[1:])
    return f"{atom[0]}[{args}]" if args else atom[0]


class StripsDomain(Domain):
    """Multi-step domain whose cases carry objects, an initial state and a goal."""

    kind = "multi_step"
    # FPL set name -> key in the case's "objects" delta
    object_sets: Mapping[str, str] = {}

    def objects(self, case: QueryCase) -> dict[str, list]:
        return {k: list(v) for k, v in case.delta["objects"].items()}

    def init(self, case: QueryCase) -> frozenset:
        return frozenset(tuple(a) for a in case.delta["init"])

    def goal(self, case: QueryCase) -> frozenset:
        return frozenset(tuple(a) for a in case.delta["goal"])

    def ground_actions(self, case: QueryCase) -> list[GroundAction]:
        raise NotImplementedError

    def case_background(self, case: QueryCase) -> dict:
        return {**self.background, **self.objects(case)}

    def program_source(self, case: QueryCase, with_goal: bool = True) -> str:
        text = self.reference_source.rstrip() + "\n"
        init = sorted(self.init(case), key=repr)
        if init:
            text += f"init: {', '.join(_fpl_atom(a) for a in init)};\n"
        goal = sorted(self.goal(case), key=repr)
        if with_goal and goal:
            text += f"goal: {', '.join(_fpl_atom(a) for a in goal)};\n"
        return text

    def compute_oracle(self, case: QueryCase) -> Any:
        plan = bfs(self.init(case), self.goal(case), self.ground_actions(case), DEFAULT_BFS_CAP)
        return INFEASIBLE if plan is None else len(plan)

    def action_table(self, case: QueryCase) -> dict[str, GroundAction]:
        return {ga.label: ga for ga in self.ground_actions(case)}

    def parse_plan(self, case: QueryCase, plan: Any) -> list[GroundAction]:
        steps = plan.get("plan") if isinstance(plan, Mapping) else plan
        if not isinstance(steps, list) or not all(isinstance(s, str) for s in steps):
            raise SchemaMismatch("a multi-step plan is a list of action labels")
        table = self.action_table(case)
        out = []
        for s in steps:
            label = " ".join(s.replace("(", " ").replace(")", " ").replace(",", " ").split())
            if label not in table:
                raise SchemaMismatch(f"unknown action {s!r}")
            out.append(table[label])
        return out

    def validate_plan(self, case: QueryCase, plan: Any) -> Verdict:
        try:
            actions = self.parse_plan(case, plan)
        except SchemaMismatch as exc:
            return Verdict(False, False, (str(exc),))
        state = self.init(case)
        for i, ga in enumerate(actions):
            try:
                state = simulate(state, ga)
            except PreconditionViolated as exc:
                return Verdict(False, False, (f"step {i}: {exc}",), len(actions))
        if not goal_reached(state, self.goal(case)):
            missing = render_atoms(self.goal(case) - state)
            return Verdict(False, False, (f"goal not reached; missing {missing}",), len(actions))
        best = self.oracle_optimal(case)
        optimal = len(actions) == best
        diag = () if optimal else (f"plan length {len(actions)} differs from optimum {best}",)
        return Verdict(True, optimal, diag, len(actions))

    def reference_run(self, case: QueryCase, timeout: float = 900.0, t_max: int = 30, exactly_one: str = "pb", **kw) -> ReferenceRun:
        prog = parse(self.program_source(case))
        env = typecheck(prog, self.case_background(case))
        cfg = HorizonConfig(0, t_max, timeout, timeout)
        outcome, T = solve_bounded_horizon(prog, env, cfg, exactly_one=exactly_one)
        if outcome.status != "sat":
            return ReferenceRun(outcome.status, None, None, T, outcome)
        plan = decode(outcome, self.schema, outcome.problem)
        return ReferenceRun("plan", plan, T, T, outcome)
