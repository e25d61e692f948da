"""Movie night: rewind the tape, zero the counter and fetch snacks."""

from __future__ import annotations

import itertools

from ..strips import GroundAction
from .base import QueryCase, StripsDomain, render_query

SNACKS = ("chips", "dip", "pop", "cheese", "crackers")
FLUENTS = (
    "movie_rewound",
    "counter_at_zero",
    "counter_at_two_hours",
    "counter_at_other_than_two_hours",
    "watched",
    *(f"have_{s}" for s in SNACKS),
)

# snack -> snack that must be in hand first
_NEEDS = {"dip": "chips", "crackers": "cheese"}


def _atoms(names) -> frozenset:
    return frozenset((n,) for n in names)


def _act(name, pre=(), add=(), delete=()) -> GroundAction:
    return GroundAction(name, (), _atoms(pre), _atoms(add), _atoms(delete))


def movie_actions() -> list[GroundAction]:
    out = [
        _act("rewind_movie_2", pre=["counter_at_two_hours"], add=["movie_rewound"]),
        _act("rewind_movie", pre=["counter_at_other_than_two_hours"], add=["movie_rewound"], delete=["counter_at_zero"]),
        _act("reset_counter", add=["counter_at_zero"]),
        _act(
            "watch_movie",
            pre=["movie_rewound", "counter_at_zero", "have_pop"],
            add=["watched", "counter_at_two_hours"],
            delete=["movie_rewound", "counter_at_zero", "counter_at_other_than_two_hours"],
        ),
    ]
    for s in SNACKS:
        pre = [f"have_{_NEEDS[s]}"] if s in _NEEDS else []
        out.append(_act(f"get_{s}", pre=pre, add=[f"have_{s}"]))
    return out


class Movie(StripsDomain):
    id = "movie"
    upstream_query_count = 21

    def objects(self, case: QueryCase) -> dict[str, list]:
        return {}

    def ground_actions(self, case: QueryCase) -> list[GroundAction]:
        return movie_actions()


_INITS = {
    "counter_two_hours": ["counter_at_two_hours"],
    "counter_other": ["counter_at_other_than_two_hours"],
    "counter_zero_other": ["counter_at_zero", "counter_at_other_than_two_hours"],
}
_GOALS = [
    ["movie_rewound", "counter_at_zero"],
    ["movie_rewound", "counter_at_zero", "have_chips", "have_dip"],
    ["movie_rewound", "counter_at_zero", "have_pop", "have_cheese", "have_crackers"],
    ["movie_rewound", "counter_at_zero", *(f"have_{s}" for s in SNACKS)],
    ["watched"],
    ["watched", "movie_rewound", "counter_at_zero"],
    ["have_dip", "have_crackers", "watched"],
]


def generate_cases() -> list[QueryCase]:
    cases = []
    for (tag, init), goal in itertools.product(_INITS.items(), _GOALS):
        init_atoms = sorted([f] for f in init)
        goal_atoms = sorted([f] for f in goal)
        text = render_query({}, map(tuple, init_atoms), map(tuple, goal_atoms))
        cases.append(
            QueryCase(f"mv-{len(cases):03d}", text, tag, {"objects": {}, "init": init_atoms, "goal": goal_atoms})
        )
    return cases
