"""TOML configuration for the command line.

Example::

    [pipeline]
    max_regen = 5
    max_assess_loops = 5
    solver_timeout = 900      # seconds
    exactly_one = "pb"        # or "pairwise"

    [horizon]
    t_start = 0
    t_max = 30

    [provider]
    name = "openai"           # or "reference" for the offline responder
    base_url = "https://api.openai.com/v1"
    model_id = "gpt-4o"
    temperature = 0.0

    [cassette]
    path = "cassettes/run.ndjson"
    mode = "replay"           # record | replay | passthrough

    [prices.gpt-4o]           # dollars per 1000 tokens
    prompt = 0.0025
    completion = 0.01
"""

from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .pipeline import PipelineConfig
from .smt import HorizonConfig


def load_config(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def pipeline_config(data: Mapping[str, Any], **overrides: Any) -> PipelineConfig:
    p = dict(data.get("pipeline", {}))
    prov = data.get("provider", {})
    cas = data.get("cassette", {})
    timeout = float(p.get("solver_timeout", PipelineConfig.solver_timeout))
    h = data.get("horizon", {})
    horizon = HorizonConfig(
        t_start=int(h.get("t_start", 0)),
        t_max=int(h.get("t_max", 30)),
        per_check_timeout=float(h.get("per_check_timeout", timeout)),
        total_timeout=float(h.get("total_timeout", timeout)),
    )
    cfg = PipelineConfig(
        max_regen=int(p.get("max_regen", 5)),
        max_assess_loops=int(p.get("max_assess_loops", 5)),
        solver_timeout=timeout,
        horizon=horizon,
        cassette_mode=cas.get("mode", "replay"),
        cassette_path=cas.get("path"),
        provider=prov.get("name", "openai"),
        base_url=prov.get("base_url"),
        model_id=prov.get("model_id", "gpt-4o"),
        temperature=float(prov.get("temperature", 0.0)),
        exactly_one=p.get("exactly_one", "pb"),
    )
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(cfg, **overrides) if overrides else cfg


def prices(data: Mapping[str, Any]) -> dict[str, dict[str, float]]:
    return {model: {k: float(v) for k, v in table.items()} for model, table in data.get("prices", {}).items()}
