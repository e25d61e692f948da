"""Regenerate queries.jsonl and oracle_cache.json for every bundled domain.

Run from the repository root:  python3 scripts/build_domains.py
"""

import json
import sys

from fplan.domains import DOMAIN_IDS, get_domain, obfuscate
from fplan.domains.base import dump_json
from fplan.domains import blocksworld, coffee, facility, gripper, movie, task_allocation, warehouse, workforce

GENERATORS = {
    "coffee": coffee.generate_cases,
    "workforce": workforce.generate_cases,
    "facility": facility.generate_cases,
    "task_allocation": task_allocation.generate_cases,
    "warehouse": warehouse.generate_cases,
    "blocksworld": blocksworld.generate_cases,
    "mystery_blocksworld": lambda: [obfuscate(c) for c in blocksworld.generate_cases()],
    "movie": movie.generate_cases,
    "gripper": gripper.generate_cases,
}


def build(domain_id: str) -> None:
    d = get_domain(domain_id)
    cases = GENERATORS[domain_id]()
    texts = [c.query for c in cases]
    if len(set(texts)) != len(texts):
        sys.exit(f"{domain_id}: duplicate query texts")
    lines = "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in cases)
    (d.root / "queries.jsonl").write_text(lines, encoding="utf-8")
    cache = {c.id: d.oracle_optimal(c, use_cache=False) for c in cases}
    dump_json(cache, d.root / "oracle_cache.json")
    print(f"{domain_id}: {len(cases)} queries")


if __name__ == "__main__":
    for domain_id in sys.argv[1:] or DOMAIN_IDS:
        build(domain_id)
