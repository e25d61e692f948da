"""The nine bundled benchmark domains."""

from __future__ import annotations

import threading
from typing import Any

from .base import (
    DATA_DIR,
    INFEASIBLE,
    Domain,
    IncompleteMap,
    InstanceTooLarge,
    QueryCase,
    ReferenceRun,
    SingleStepDomain,
    StripsDomain,
    UnknownQuery,
    Verdict,
    apply_delta,
)
from .blocksworld import MYSTERY_NAMES, Blocksworld, MysteryBlocksworld, deobfuscate, obfuscate
from .coffee import Coffee
from .facility import Facility
from .gripper import Gripper
from .movie import Movie
from .task_allocation import TaskAllocation
from .warehouse import Warehouse
from .workforce import Workforce

_CLASSES = (
    Coffee,
    Workforce,
    Facility,
    TaskAllocation,
    Warehouse,
    Blocksworld,
    MysteryBlocksworld,
    Movie,
    Gripper,
)
DOMAIN_IDS = tuple(c.id for c in _CLASSES)
_instances: dict[str, Domain] = {}
_lock = threading.Lock()


class UnknownDomain(KeyError):
    pass


def get_domain(domain_id: str) -> Domain:
    try:
        cls = next(c for c in _CLASSES if c.id == domain_id)
    except StopIteration:
        raise UnknownDomain(f"unknown domain {domain_id!r}; choose from {', '.join(DOMAIN_IDS)}") from None
    with _lock:
        if domain_id not in _instances:
            _instances[domain_id] = cls()
        return _instances[domain_id]


def oracle_optimal(domain_id: str, query: str) -> Any:
    d = get_domain(domain_id)
    return d.oracle_optimal(d.case(query))


def validate_plan(domain_id: str, query: str, plan: Any) -> Verdict:
    d = get_domain(domain_id)
    return d.validate_plan(d.case(query), plan)


__all__ = [
    "DATA_DIR",
    "DOMAIN_IDS",
    "INFEASIBLE",
    "MYSTERY_NAMES",
    "Domain",
    "IncompleteMap",
    "InstanceTooLarge",
    "QueryCase",
    "ReferenceRun",
    "SingleStepDomain",
    "StripsDomain",
    "UnknownDomain",
    "UnknownQuery",
    "Verdict",
    "apply_delta",
    "deobfuscate",
    "get_domain",
    "obfuscate",
    "oracle_optimal",
    "validate_plan",
]
