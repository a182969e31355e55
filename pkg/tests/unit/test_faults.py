from pathlib import Path

import pytest

from tcefuzz.errors import ConfigError
from tcefuzz.faults import ALL_FAULTS, CATALOG, describe, parse_faults
from tcefuzz.oracle import run_both
from tcefuzz.parser import parse
from tcefuzz.vm import compile_and_run


def _finding(text, faults, registry):
    """('crash', fault) or ('divergence', fault) or None for one program."""
    cmp = run_both(parse(text), faults, registry=registry)
    if cmp.crash is not None:
        return "crash", cmp.crash.fault
    d = cmp.divergence
    if d is not None and d.classification == "miscompilation":
        return "divergence", d.fault
    return None


def test_there_is_one_witness_per_fault(witnesses):
    assert set(witnesses) == set(CATALOG)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_witness_is_clean_without_its_fault(name, witnesses, registry):
    others = ALL_FAULTS - {name}
    assert _finding(witnesses[name], (), registry) is None
    assert _finding(witnesses[name], others, registry) is None


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_witness_triggers_its_fault(name, witnesses, registry):
    fault = CATALOG[name]
    expected = "crash" if fault.effect == "crash" else "divergence"
    assert _finding(witnesses[name], {name}, registry) == (expected, name)


@pytest.mark.parametrize("name", sorted(n for n, f in CATALOG.items() if f.effect == "crash"))
def test_crash_signature_is_stable(name, witnesses, registry):
    tree = parse(witnesses[name])
    first = compile_and_run(tree, {name}, registry=registry)
    second = compile_and_run(parse(witnesses[name]), {name}, registry=registry)
    assert first.crashed
    assert first.phase == CATALOG[name].phase
    assert first.kind == CATALOG[name].kind
    assert first.signature == second.signature


VARIANTS = Path(__file__).resolve().parent.parent / "data" / "witnesses" / "variants"


@pytest.mark.parametrize("path", sorted(VARIANTS.glob("*.tl")), ids=lambda p: p.stem)
def test_witness_variants(path, registry):
    name = path.stem.rsplit("_", 1)[0]
    text = path.read_text(encoding="utf-8")
    expected = "crash" if CATALOG[name].effect == "crash" else "divergence"
    assert _finding(text, (), registry) is None
    assert _finding(text, {name}, registry) == (expected, name)


NESTED = """\
class Inner(val x: Int)

class Outer(var y: Int) {
    fun twice(): Int {
        return y * 2
    }
}

fun main() {
    %s
}
"""


def test_one_fault_has_one_signature_across_compiler_paths(registry):
    uses = ["println(Outer(Inner(3).x).y)", "println(Outer(Inner(3).x).twice())", "Outer(Inner(3).x).y = 4"]
    results = [compile_and_run(parse(NESTED % use), {"NESTED_ACCESSOR"}, registry=registry) for use in uses]
    assert all(r.crashed and r.fault == "NESTED_ACCESSOR" for r in results)
    assert len({r.signature for r in results}) == 1


def test_crash_faults_have_distinct_sites():
    sites = [f.site for f in CATALOG.values() if f.effect == "crash"]
    assert all(sites)
    assert len(set(sites)) == len(sites)


def test_corpus_is_clean_under_every_fault(seeds, registry):
    for seed in seeds:
        cmp = run_both(seed, ALL_FAULTS, registry=registry)
        assert cmp.crash is None
        assert cmp.divergence is None


def test_parse_faults():
    assert parse_faults(None) == frozenset()
    assert parse_faults("all") == ALL_FAULTS
    assert parse_faults(" ALL ") == ALL_FAULTS
    assert parse_faults("FUNREF_ARGUMENT, NESTED_ACCESSOR") == {"FUNREF_ARGUMENT", "NESTED_ACCESSOR"}
    assert parse_faults(["RANGE_UNTIL_LOOP"]) == {"RANGE_UNTIL_LOOP"}
    assert parse_faults("") == frozenset()


def test_unknown_fault_name():
    with pytest.raises(ConfigError, match="NO_SUCH_FAULT"):
        parse_faults("FUNREF_ARGUMENT,NO_SUCH_FAULT")


def test_catalog_mixes_phases_and_effects():
    phases = {f.phase for f in CATALOG.values()}
    effects = {f.effect for f in CATALOG.values()}
    assert phases == {"frontend", "backend"}
    assert effects == {"crash", "miscompile"}
    text = describe()
    for name in CATALOG:
        assert name in text
