"""
Campaign-scale acceptance experiments.

Verifies:
- Valid-program rates order the strategies: grammar < mutate < spe < tce
- A fault-enabled TCE campaign finds several bug clusters, including a miscompilation
- No divergence is reported with faults off
- Padded witnesses reduce back to their core
- Fuzzer-found duplicates collapse to one cluster per fault
- Campaign results do not depend on the worker count
- Mutation keeps programs well typed and shrinks placeholders every round

The slow experiments are marked `campaign` and only run with RUN_CAMPAIGN_TESTS=1.
"""

import json
import random
from pathlib import Path

import pytest

from tcefuzz.campaign import evaluate, run_campaign
from tcefuzz.checker import check_program
from tcefuzz.config import config_from_dict
from tcefuzz.faults import CATALOG
from tcefuzz.generation import generation_phase
from tcefuzz.mutation import MutConfig, iterate_mutation_with_stats
from tcefuzz.parser import parse
from tcefuzz.triage import ReductionGoal, count_tokens, dedup, reduce_with_stats, report_key

ROOT = Path(__file__).resolve().parent.parent.parent
CORPUS = ROOT / "corpus"


def _cfg(out, **overrides):
    raw = {"corpus": str(CORPUS), "out": str(out), "seed": 1, "iterations": 1000,
           "reduce": False, "progress_every": 100}
    raw.update(overrides)
    return config_from_dict(raw)


def _padding(n: int) -> str:
    """`n` declarations unrelated to any witness."""
    parts = []
    for i in range(n):
        if i % 2:
            parts.append(f"fun pad{i}(a: Int): Int {{\n    val t = a * {i}\n    return t + 1\n}}\n")
        else:
            parts.append(f"val pad{i} = {i} + 1\n")
    return "\n" + "\n".join(parts)


def _finding(text, fault, registry):
    cfg = config_from_dict({"faults": [fault]})
    status, findings = evaluate(parse(text), cfg, registry)
    assert findings, f"{fault} not triggered"
    return findings[0]


@pytest.mark.campaign
def test_validity_rates(tmp_path, seeds, registry):
    rates = {}
    for strategy in ("grammar", "mutate", "spe", "tce"):
        stats = run_campaign(_cfg(tmp_path / strategy, strategy=strategy), seeds, registry)
        assert stats.internal_errors == 0
        rates[strategy] = stats.valid_rate
    assert rates["tce"] >= 0.50
    assert rates["mutate"] <= 0.20
    assert rates["grammar"] <= 0.05
    assert rates["mutate"] <= rates["spe"] <= rates["tce"]


@pytest.mark.campaign
def test_fault_discovery(tmp_path, seeds, registry):
    tce = run_campaign(_cfg(tmp_path / "tce", faults="all", iterations=100_000, time_budget=600.0),
                       seeds, registry)
    mutate = run_campaign(_cfg(tmp_path / "mutate", strategy="mutate", faults="all", iterations=100_000,
                               time_budget=600.0), seeds, registry)
    assert tce.clusters >= 4
    assert tce.miscompilation_bugs >= 1
    assert mutate.miscompilation_bugs == 0


@pytest.mark.campaign
def test_no_false_positives_without_faults(tmp_path, seeds, registry):
    stats = run_campaign(_cfg(tmp_path / "out", iterations=400), seeds, registry)
    assert stats.valid >= 200
    assert stats.miscompilations == 0
    assert stats.backend_crashes == 0
    assert stats.frontend_crashes == 0


@pytest.mark.campaign
@pytest.mark.parametrize("fault", sorted(CATALOG))
def test_padded_witness_reduces(fault, witnesses, registry):
    text = witnesses[fault] + _padding(50)
    goal = ReductionGoal.from_report(_finding(text, fault, registry), {fault}, registry=registry)
    reduced, stats = reduce_with_stats(parse(text), goal, budget=500)
    assert goal(reduced)
    assert stats.evaluations <= 500
    assert count_tokens(reduced) <= 0.2 * count_tokens(text)


@pytest.mark.parametrize("fault", sorted(f.name for f in CATALOG.values() if f.effect == "crash"))
def test_duplicates_collapse_per_fault(fault, witnesses, registry):
    reports = [_finding(witnesses[fault] + f"\nval dup{k} = {k}\n", fault, registry) for k in range(10)]
    assert len({r["program"] for r in reports}) == 10
    clusters = dedup(reports)
    assert len(clusters) == 1
    assert clusters[0].size == 10


def test_crash_faults_give_one_cluster_each(witnesses, registry):
    crash_faults = sorted(f.name for f in CATALOG.values() if f.effect == "crash")
    reports = [_finding(witnesses[f] + f"\nval dup{k} = {k}\n", f, registry) for f in crash_faults for k in range(3)]
    assert len(dedup(reports)) == len(crash_faults)


def _jsonl(path):
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


@pytest.mark.campaign
def test_campaign_findings_collapse_per_fault(tmp_path, seeds, registry):
    cfg = _cfg(tmp_path, faults="all", iterations=3000)
    run_campaign(cfg, seeds, registry)
    found = _jsonl(tmp_path / "crashes" / "index.jsonl") + _jsonl(tmp_path / "divergences" / "index.jsonl")
    by_fault = {}
    for r in found:
        if r.get("fault"):
            by_fault.setdefault(r["fault"], {}).setdefault(r["program"], r)
    sample = {fault: list(programs.values())[:10] for fault, programs in by_fault.items()}
    crash_faults = [f for f in sample if CATALOG[f].effect == "crash"]
    miscompile_faults = [f for f in sample if CATALOG[f].effect == "miscompile"]
    assert crash_faults and miscompile_faults
    for fault in crash_faults:
        assert len(dedup(sample[fault])) == 1
    clusters = dedup(r for fault in crash_faults for r in sample[fault])
    assert len(clusters) == len(crash_faults)
    # miscompilations cluster by a fault-independent fingerprint that must not depend on the run
    for fault in miscompile_faults:
        for r in sample[fault]:
            _, again = evaluate(parse(r["program"]), cfg, registry)
            assert again
            assert report_key(again[0]) == report_key(r)
    merged = dedup(r for fault in miscompile_faults for r in sample[fault])
    assert sum(c.size for c in merged) == sum(len(sample[f]) for f in miscompile_faults)


@pytest.mark.campaign
def test_worker_count_is_invisible(tmp_path, seeds, registry):
    mutation = {"time_limit": 600.0}
    one = run_campaign(_cfg(tmp_path / "a", faults="all", iterations=200, mutation=mutation), seeds, registry)
    again = run_campaign(_cfg(tmp_path / "b", faults="all", iterations=200, mutation=mutation), seeds, registry)
    four = run_campaign(_cfg(tmp_path / "c", faults="all", iterations=200, workers=4, mutation=mutation),
                        seeds, registry)
    a = json.loads((tmp_path / "a" / "report.json").read_text(encoding="utf-8"))
    b = json.loads((tmp_path / "b" / "report.json").read_text(encoding="utf-8"))
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert a == b
    assert one == again == four


@pytest.mark.campaign
def test_mutation_guarantees(seeds, registry):
    rng = random.Random(1000)
    cfg = MutConfig(time_limit=600.0)
    pools = {}
    for _ in range(1000):
        seed_index = rng.randrange(len(seeds))
        seed = seeds[seed_index]
        if seed_index not in pools:
            pools[seed_index] = generation_phase(seed, rng=random.Random(seed_index), registry=registry)
        tree, rounds = iterate_mutation_with_stats(seed, pools[seed_index], cfg, rng, registry)
        assert check_program(tree, registry).ok
        for prev, cur in zip(rounds, rounds[1:]):
            assert cur.placeholders <= cfg.shrink * prev.placeholders
