"""Command line: ``fplan solve|bench|validate|oracle|dump-smt|replay``."""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import bench as B
from .config import load_config, pipeline_config, prices
from .domains import DOMAIN_IDS, UnknownDomain, get_domain
from .domains.base import UnknownQuery
from .fpl import FplSyntaxError, FplTypeError, parse, typecheck
from .llm.chat import MODES, Cassette, CassetteMiss, ChatRequest
from .pipeline import EXIT_CODES, make_client, solve_query
from .smt import LoweringError, lower, to_smtlib

USAGE_ERROR = 64


def _fail(msg: str, code: int = USAGE_ERROR):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _case(domain_id: str, query: str):
    try:
        domain = get_domain(domain_id)
        return domain, domain.case(query)
    except (UnknownDomain, UnknownQuery) as exc:
        _fail(str(exc))


def _dump(data, out: str | None):
    text = json.dumps(data, indent=2, sort_keys=True, default=str) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


domain_opt = click.option("--domain", "domain_id", required=True, type=click.Choice(DOMAIN_IDS), help="bundled domain id")
config_opt = click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="TOML config file")


@click.group()
def main():
    """Formalize planning queries as constraint programs and solve them."""


@main.command()
@domain_opt
@click.option("--query", required=True, help="query id or exact query text")
@click.option("--cassette", type=click.Path(dir_okay=False), help="NDJSON cassette file")
@click.option("--mode", type=click.Choice(MODES), help="cassette mode")
@click.option("--provider", type=click.Choice(["openai", "reference"]), help="chat backend when not replaying")
@click.option("--timeout", type=float, help="solver wall-clock cap in seconds")
@click.option("--out", type=click.Path(dir_okay=False), help="write the PlanResult JSON here")
@config_opt
def solve(domain_id, query, cassette, mode, provider, timeout, out, config_path):
    """Run the full pipeline on one query; exit status encodes the outcome."""
    data = load_config(config_path)
    cfg = pipeline_config(data, cassette_path=cassette, cassette_mode=mode, provider=provider, solver_timeout=timeout)
    if timeout is not None:
        cfg = replace(cfg, horizon=replace(cfg.horizon, per_check_timeout=timeout, total_timeout=timeout))
    domain, case = _case(domain_id, query)
    try:
        result = solve_query(domain.problem_input(case), cfg, make_client(cfg, domain_id), domain.schema)
    except CassetteMiss as miss:
        _fail(str(miss), EXIT_CODES["runtime_error"])
    _dump(result.to_dict(), out)
    sys.exit(EXIT_CODES[result.status])


@main.command()
@domain_opt
@click.option("--slice", "slice_name", default="desk", show_default=True, help="desk, first:N, id:a,b or a query type")
@click.option("--concurrency", default=1, type=click.IntRange(min=1), show_default=True)
@click.option("--cassette", type=click.Path(dir_okay=False))
@click.option("--mode", type=click.Choice(MODES))
@click.option("--provider", type=click.Choice(["openai", "reference"]))
@click.option("--out", "out_dir", default="bench_out", show_default=True, type=click.Path(file_okay=False))
@click.option("--format", "formats", default="json,csv,summary", show_default=True)
@config_opt
def bench(domain_id, slice_name, concurrency, cassette, mode, provider, out_dir, formats, config_path):
    """Run a query slice and write JSON, CSV and summary reports."""
    data = load_config(config_path)
    cfg = pipeline_config(data, cassette_path=cassette, cassette_mode=mode, provider=provider)
    try:
        run = B.run_benchmark(domain_id, slice_name, cfg, concurrency, price_table=prices(data))
    except B.EmptySlice as exc:
        _fail(str(exc))
    except B.MissingCassetteEntries as exc:
        _fail(str(exc), EXIT_CODES["runtime_error"])
    for path in B.report(run, out_dir, [f.strip() for f in formats.split(",") if f.strip()]):
        click.echo(f"wrote {path}", err=True)
    click.echo(B.to_summary(run), nl=False)


@main.command()
@domain_opt
@click.option("--plan", "plan_file", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--query", help="query id; defaults to the 'query' field of the plan file")
def validate(domain_id, plan_file, query):
    """Check a plan against the domain rules and the oracle optimum.

    The file holds either a bare plan with a ``--query`` flag, or an object
    with ``query`` and ``plan`` fields (a saved PlanResult works when it also
    carries ``query``).
    """
    data = json.loads(Path(plan_file).read_text(encoding="utf-8"))
    plan = data
    if isinstance(data, dict) and "plan" in data:
        plan = data["plan"]
        query = query or data.get("query")
    if not query:
        _fail("no query given: pass --query or add a 'query' field to the plan file")
    domain, case = _case(domain_id, query)
    verdict = domain.validate_plan(case, plan)
    _dump({"query": case.id, **verdict.to_dict(), "oracle": domain.oracle_optimal(case)}, None)
    sys.exit(0 if verdict.valid else 1)


@main.command()
@domain_opt
@click.option("--query", required=True)
@click.option("--fresh", is_flag=True, help="recompute instead of reading the bundled cache")
def oracle(domain_id, query, fresh):
    """Print the exact optimum (or plan length) from the independent oracle."""
    domain, case = _case(domain_id, query)
    _dump({"query": case.id, "optimal": domain.oracle_optimal(case, use_cache=not fresh)}, None)


@main.command("dump-smt")
@click.option("--program", "program_file", type=click.Path(exists=True, dir_okay=False), help="FPL source file")
@click.option("--background", type=click.Path(exists=True, dir_okay=False), help="JSON object of parameter tables")
@click.option("--domain", "domain_id", type=click.Choice(DOMAIN_IDS), help="take program and tables from a bundled query")
@click.option("--query")
@click.option("--horizon", type=click.IntRange(min=0), help="unrolling depth for programs with a horizon")
@click.option("--exactly-one", type=click.Choice(["pb", "pairwise"]), default="pb", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False))
def dump_smt(program_file, background, domain_id, query, horizon, exactly_one, out):
    """Write the lowered problem as SMT-LIB 2 for external solvers."""
    tables = json.loads(Path(background).read_text(encoding="utf-8")) if background else {}
    if domain_id:
        domain, case = _case(domain_id, query or domain_id)
        source = Path(program_file).read_text(encoding="utf-8") if program_file else domain.program_source(case)
        tables = {**domain.problem_input(case).data_tables(), **tables}
    elif program_file:
        source = Path(program_file).read_text(encoding="utf-8")
    else:
        _fail("give --program, or --domain with --query")
    try:
        prog = parse(source)
        env = typecheck(prog, tables)
        if env.horizon is not None and horizon is None:
            _fail("the program declares a horizon: pass --horizon T")
        text = to_smtlib(lower(prog, env, horizon=horizon, exactly_one=exactly_one))
    except (FplSyntaxError, FplTypeError) as exc:
        click.echo(exc.format(program_file or f"<{domain_id}>"), err=True)
        sys.exit(1)
    except LoweringError as exc:
        _fail(str(exc), 1)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--cassette", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--domain", "domain_id", type=click.Choice(DOMAIN_IDS))
@click.option("--query")
@config_opt
def replay(cassette, domain_id, query, config_path):
    """Audit a cassette, or re-run a query strictly from it.

    Without ``--query`` every entry is listed and its fingerprint recomputed
    from the stored request; a mismatch exits non-zero.
    """
    if query:
        if not domain_id:
            _fail("--query needs --domain")
        cfg = pipeline_config(load_config(config_path), cassette_path=cassette, cassette_mode="replay")
        domain, case = _case(domain_id, query)
        try:
            result = solve_query(domain.problem_input(case), cfg, make_client(cfg, domain_id), domain.schema)
        except CassetteMiss as miss:
            _fail(str(miss), EXIT_CODES["runtime_error"])
        _dump(result.to_dict(), None)
        sys.exit(EXIT_CODES[result.status])
    bad = 0
    store = Cassette(cassette, "replay")
    for rec in store.records():
        actual = ChatRequest.from_dict(rec["request"]).fingerprint()
        ok = actual == rec["fingerprint"]
        bad += not ok
        usage = rec.get("usage", {})
        click.echo(
            f"{rec['fingerprint'][:16]}  {'ok ' if ok else 'BAD'}  "
            f"messages={len(rec['request']['messages'])}  "
            f"tokens={usage.get('prompt_tokens', 0)}+{usage.get('completion_tokens', 0)}"
        )
    click.echo(f"{len(store)} entries, {bad} with mismatched fingerprints")
    sys.exit(1 if bad else 0)


if __name__ == "__main__":
    main()
