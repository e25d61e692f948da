import json

import pytest
from click.testing import CliRunner

from fplan.cli import main


@pytest.fixture
def run():
    runner = CliRunner()
    return lambda *args: runner.invoke(main, [str(a) for a in args])


def test_solve_replay(run, cassette_dir, tmp_path):
    out = tmp_path / "r.json"
    r = run("solve", "--domain", "coffee", "--query", "co-001", "--cassette", cassette_dir / "happy_coffee.ndjson", "--mode", "replay", "--out", out)
    assert r.exit_code == 0, r.stderr
    assert json.loads(out.read_text())["objective_value"] == 2612


def test_solve_exit_codes(run, cassette_dir):
    r = run("solve", "--domain", "coffee", "--query", "co-005", "--cassette", cassette_dir / "unsat_coffee.ndjson", "--mode", "replay")
    assert r.exit_code == 2
    assert json.loads(r.stdout)["status"] == "infeasible"
    r = run("solve", "--domain", "coffee", "--query", "co-003", "--cassette", cassette_dir / "codegen_fail_5.ndjson", "--mode", "replay")
    assert r.exit_code == 3
    r = run("solve", "--domain", "coffee", "--query", "co-002", "--cassette", cassette_dir / "happy_coffee.ndjson", "--mode", "replay")
    assert r.exit_code == 4
    assert "no recorded response" in r.stderr


def test_usage_errors(run):
    assert run("solve", "--domain", "coffee", "--query", "nope").exit_code == 64
    assert run("solve", "--domain", "nowhere", "--query", "x").exit_code == 2
    assert run("dump-smt").exit_code == 64


def test_solve_record(run, tmp_path):
    path = tmp_path / "c.ndjson"
    r = run("solve", "--domain", "blocksworld", "--query", "bw-000", "--cassette", path, "--mode", "record", "--provider", "reference")
    assert r.exit_code == 0, r.stderr
    assert len(path.read_text().splitlines()) == 4
    r = run("replay", "--cassette", path)
    assert r.exit_code == 0
    assert "4 entries, 0 with mismatched fingerprints" in r.stdout
    r = run("replay", "--cassette", path, "--domain", "blocksworld", "--query", "bw-000")
    assert r.exit_code == 0
    result = json.loads(r.stdout)
    assert result["status"] == "plan" and len(result["plan"]["plan"]) == 2


def test_replay_detects_tampering(run, tmp_path, cassette_dir):
    lines = (cassette_dir / "happy_gripper.ndjson").read_text().splitlines()
    rec = json.loads(lines[0])
    rec["request"]["messages"][0]["content"] += " tampered"
    path = tmp_path / "bad.ndjson"
    path.write_text("\n".join([json.dumps(rec)] + lines[1:]) + "\n")
    r = run("replay", "--cassette", path)
    assert r.exit_code == 1
    assert "1 with mismatched fingerprints" in r.stdout


def test_validate(run, tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"query": "bw-000", "plan": {"plan": ["pickup(a)", "stack(a, b)"]}}))
    r = run("validate", "--domain", "blocksworld", "--plan", good)
    assert r.exit_code == 0, r.stdout + r.stderr
    verdict = json.loads(r.stdout)
    assert verdict["valid"] and verdict["optimal"]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"plan": ["stack(a, b)"]}))
    r = run("validate", "--domain", "blocksworld", "--plan", bad, "--query", "bw-000")
    assert r.exit_code == 1
    assert not json.loads(r.stdout)["valid"]
    r = run("validate", "--domain", "blocksworld", "--plan", bad)
    assert r.exit_code == 64


def test_oracle(run):
    r = run("oracle", "--domain", "coffee", "--query", "co-001")
    assert r.exit_code == 0
    assert json.loads(r.stdout)["optimal"] == 2612
    r = run("oracle", "--domain", "blocksworld", "--query", "bw-000", "--fresh")
    assert json.loads(r.stdout)["optimal"] == 2


def test_dump_smt(run, tmp_path):
    prog = tmp_path / "p.fpl"
    prog.write_text("var x: Int;\nassert x >= 3;\nminimize x;\n")
    r = run("dump-smt", "--program", prog)
    assert r.exit_code == 0, r.stderr
    assert "(declare-fun x () Int)" in r.stdout or "(declare-const x Int)" in r.stdout
    r = run("dump-smt", "--domain", "blocksworld", "--query", "bw-000")
    assert r.exit_code == 64
    out = tmp_path / "bw.smt2"
    r = run("dump-smt", "--domain", "blocksworld", "--query", "bw-000", "--horizon", 2, "--out", out)
    assert r.exit_code == 0
    assert "(check-sat)" in out.read_text()
    prog.write_text("var x: Int;\nassert y >= 3;\n")
    r = run("dump-smt", "--program", prog)
    assert r.exit_code == 1
    assert r.stderr.startswith(f"{prog}:2:")


def test_bench(run, cassette_dir, tmp_path):
    r = run(
        "bench", "--domain", "blocksworld", "--slice", "first:10", "--concurrency", 2,
        "--cassette", cassette_dir / "bench_mixed.ndjson", "--mode", "replay", "--out", tmp_path,
    )
    assert r.exit_code == 0, r.stderr
    assert "success rate  0.900" in r.stdout
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bench_blocksworld.csv", "bench_blocksworld.json", "bench_blocksworld.txt"]
    r = run("bench", "--domain", "blocksworld", "--slice", "id:", "--cassette", cassette_dir / "bench_mixed.ndjson", "--mode", "replay", "--out", tmp_path)
    assert r.exit_code == 64


def test_config_file(run, cassette_dir, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(f'[cassette]\npath = "{cassette_dir / "happy_gripper.ndjson"}"\nmode = "replay"\n')
    r = run("solve", "--domain", "gripper", "--query", "gr-000", "--config", cfg)
    assert r.exit_code == 0, r.stderr
