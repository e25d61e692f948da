"""Frame axioms and one-action-per-step constraints for bounded-horizon plans."""

from __future__ import annotations

import itertools
from typing import Mapping, Sequence

import z3

from ..strips import GroundAction


class UnknownPredicate(Exception):
    pass


def emit_frame_axioms(
    fluents: Mapping[tuple, Sequence[z3.BoolRef]],
    actions: Sequence[tuple[GroundAction, Sequence[z3.BoolRef]]],
    T: int,
) -> list[z3.BoolRef]:
    """Explanation-closure successor-state axioms.

    For every ground fluent p and step t < T:
    ``p[t+1] <-> (p[t] and no chosen action deletes p) or some chosen action adds p``.
    An action that both adds and deletes p counts as adding it.
    """
    adders: dict[tuple, list] = {atom: [] for atom in fluents}
    deleters: dict[tuple, list] = {atom: [] for atom in fluents}
    for ga, lits in actions:
        for atom in itertools.chain(ga.add, ga.delete):
            if atom not in fluents:
                raise UnknownPredicate(f"{ga.label} changes {atom}, which is not a declared ground fluent")
        for atom in ga.add:
            adders[atom].append(lits)
        for atom in ga.delete - ga.add:
            deleters[atom].append(lits)

    out = []
    for atom in fluents:
        terms = fluents[atom]
        ctx = terms[0].ctx
        for t in range(T):
            add = [lits[t] for lits in adders[atom]]
            dele = [lits[t] for lits in deleters[atom]]
            keep = terms[t] if not dele else z3.And(terms[t], z3.Not(_any(dele, ctx)))
            cause = keep if not add else z3.Or(keep, _any(add, ctx))
            out.append(terms[t + 1] == cause)
    return out


def _any(lits: list, ctx: z3.Context) -> z3.BoolRef:
    if not lits:
        return z3.BoolVal(False, ctx)
    return lits[0] if len(lits) == 1 else z3.Or(lits)


def emit_exactly_one_action(
    steps: Sequence[Sequence[z3.BoolRef]],
    method: str = "pairwise",
    ctx: z3.Context | None = None,
) -> list[z3.BoolRef]:
    """Exactly one true literal per step.

    ``pairwise`` emits one at-least-one clause plus a negated conjunction for
    every pair; ``pb`` uses the solver's native pseudo-boolean equality.
    """
    if method not in ("pairwise", "pb"):
        raise ValueError(f"unknown exactly-one encoding {method!r}")
    out = []
    for lits in steps:
        lits = list(lits)
        if not lits:
            if ctx is None:
                raise ValueError("a step without actions needs an explicit context")
            out.append(z3.BoolVal(False, ctx))
            continue
        if method == "pb":
            out.append(z3.PbEq([(lit, 1) for lit in lits], 1))
            continue
        out.append(z3.Or(lits) if len(lits) > 1 else lits[0])
        for a, b in itertools.combinations(lits, 2):
            out.append(z3.Not(z3.And(a, b)))
    return out
