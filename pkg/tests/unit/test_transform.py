import re
from pathlib import Path

import pytest

from tcefuzz.checker import check_program
from tcefuzz.errors import MergeConflict, UnknownNode
from tcefuzz.interpreter import interpret
from tcefuzz.parser import parse
from tcefuzz.printer import print_tree
from tcefuzz.syntax import mk, replace_node
from tcefuzz.transform import anonymize_names, anonymize_with_map, merge_programs

GOLDEN = Path(__file__).resolve().parent.parent / "data" / "golden"

BOX = """\
class Box<T>(val value: T) {
    fun unwrap(): T {
        return value
    }
}

fun <T> wrap(x: T): Box<T> {
    return Box<T>(x)
}

val origin = 5

fun main() {
    val b = wrap<Int>(origin)
    println(b.unwrap() + b.value)
    println("tl".length)
}
"""

COUNTER = """\
fun main() {
    var total = 0
    val step = 3
    total += step
    println(total)
}
"""


def _labels(tree):
    return {n.id: (n.kind, n.text) for n in tree.nodes()}


def test_replace_node_keeps_other_ids():
    tree = parse(COUNTER)
    three = next(n for n in tree.nodes() if n.kind == "IntLit" and n.text == "3")
    out = replace_node(tree, three.id, mk("IntLit", "7"))
    before, after = _labels(tree), _labels(out)
    assert "val step = 7" in print_tree(out)
    assert "val step = 3" in print_tree(tree)
    for nid, label in before.items():
        if nid != three.id:
            assert after[nid] == label
    assert three.id not in after
    new = next(n for n in out.nodes() if n.kind == "IntLit" and n.text == "7")
    assert new.id not in before


def test_replace_node_rejects_unknown_target():
    tree = parse(COUNTER)
    with pytest.raises(UnknownNode):
        replace_node(tree, 10**6, mk("IntLit", "1"))


def test_anonymized_program_still_typechecks(registry):
    out = anonymize_names(parse(BOX), salt=3)
    assert check_program(out, registry).ok
    decls = {n.text for n in out.root.children}
    assert "main" in decls
    assert not {"Box", "wrap", "origin"} & decls


def test_anonymization_keeps_ctor_params_and_stdlib_members():
    out, mapping = anonymize_with_map(parse(BOX), salt=3)
    assert set(mapping) >= {"Box", "wrap", "origin", "unwrap"}
    assert "main" not in mapping
    assert "value" not in mapping
    assert "length" not in mapping
    assert ".length" in print_tree(out)


def test_anonymization_depends_only_on_the_salt():
    one = print_tree(anonymize_names(parse(BOX), salt=11))
    again = print_tree(anonymize_names(parse(BOX), salt=11))
    other = print_tree(anonymize_names(parse(BOX), salt=12))
    assert one == again
    assert one != other


def test_merge_drops_the_generation_seed_entry(registry):
    gen = anonymize_names(parse(BOX), salt=1)
    merged = merge_programs(gen, parse(COUNTER))
    mains = [n for n in merged.root.children if n.kind == "FunDecl" and n.text == "main"]
    assert len(mains) == 1
    assert merged.root.children[-1] is mains[0]
    assert "total" in print_tree(merged)
    assert check_program(merged, registry).ok


def test_merge_keeps_the_entry_when_the_mutation_seed_has_none(registry):
    helper = parse("fun helper(): Int {\n    return 2\n}\n")
    merged = merge_programs(parse(BOX), helper)
    names = [n.text for n in merged.root.children]
    assert names.count("main") == 1
    assert names[-1] == "helper"
    assert check_program(merged, registry).ok


def test_merge_rejects_clashing_names():
    with pytest.raises(MergeConflict):
        merge_programs(parse(BOX), parse(BOX))


def _restore(text, mapping):
    """`text` with every fresh name mapped back to the name it replaced."""
    back = {new: old for old, new in mapping.items()}
    if not back:
        return text
    pattern = re.compile(r"\b(" + "|".join(map(re.escape, sorted(back, key=len, reverse=True))) + r")\b")
    return pattern.sub(lambda m: back[m.group(1)], text)


def _observed(result, mapping):
    trace = [(e.block, tuple((_restore(k, mapping), _restore(v, mapping)) for k, v in e.state))
             for e in result.trace]
    return result.outcome, [_restore(line, mapping) for line in result.output], trace


def test_anonymization_preserves_behaviour(seeds):
    for seed in seeds:
        renamed, mapping = anonymize_with_map(seed, salt=7)
        assert _observed(interpret(renamed), mapping) == _observed(interpret(seed), {})


def test_merged_program_prints_as_expected(registry):
    gen = parse((GOLDEN / "merge_gen.tl").read_text(encoding="utf-8"))
    mut = parse((GOLDEN / "merge_mut.tl").read_text(encoding="utf-8"))
    merged = merge_programs(gen, mut)
    assert print_tree(merged) == (GOLDEN / "merged.tl").read_text(encoding="utf-8")
    assert check_program(merged, registry).ok
