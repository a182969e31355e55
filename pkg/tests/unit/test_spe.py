import itertools
import random
from pathlib import Path

import pytest

from tcefuzz.checker import check_program
from tcefuzz.errors import Untypeable
from tcefuzz.parser import parse
from tcefuzz.printer import print_tree
from tcefuzz.spe import CanonicalForm, enumerate_names, is_scope_safe, spe_enumerate, var_skeleton

SKELETONS = Path(__file__).resolve().parent.parent / "data" / "skeletons"

SMALL = """\
fun main() {
    val a = 1
    val b = a + 1
    if (b > 1) {
        val c = b
        println(c)
    }
    println(a)
}
"""

WITH_PARAMS = """\
fun f(n: Int): Int {
    val x = n
    var y = x
    for (i in 0 until n) {
        y += i
    }
    return y
}

fun main() {
    println(f(3))
}
"""


def _is_renaming(a, b, renamable):
    """Whether `b` is `a` under a one-to-one renaming of the renamable names."""
    forward, backward = {}, {}
    for x, y in zip(a, b):
        if (x in renamable) != (y in renamable):
            return False
        if x not in renamable:
            if x != y:
                return False
        elif forward.setdefault(x, y) != y or backward.setdefault(y, x) != x:
            return False
    return True


def _brute_force_representatives(skel):
    """One scope-safe filling per renaming class, by exhaustive search."""
    renamable = set(skel.renamable)
    alphabet = sorted(renamable | set(skel.fixed))
    reps = []
    for names in itertools.product(alphabet, repeat=len(skel.holes)):
        if is_scope_safe(skel, names) and not any(_is_renaming(r, names, renamable) for r in reps):
            reps.append(names)
    return reps


def _assert_matches_brute_force(skel):
    renamable = set(skel.renamable)
    reps = _brute_force_representatives(skel)
    enumerated = list(enumerate_names(skel, random.Random(0)))
    assert len(enumerated) == len(reps)
    for names in enumerated:
        assert is_scope_safe(skel, names)
        assert sum(1 for r in reps if _is_renaming(r, names, renamable)) == 1
    forms = [skel.canonical(names) for names in enumerated]
    assert len(set(forms)) == len(forms)
    for r in reps:
        for names in enumerated:
            assert (skel.canonical(r) == skel.canonical(names)) == _is_renaming(r, names, renamable)


@pytest.mark.parametrize("source", [SMALL, WITH_PARAMS])
def test_enumeration_matches_brute_force(source, registry):
    tree = parse(source)
    _assert_matches_brute_force(var_skeleton(tree, check_program(tree, registry)))


def _small_skeletons(seeds, registry):
    """Skeletons of bundled programs with at most 3 renamable names and 6 holes."""
    programs = list(seeds) + [parse(p.read_text(encoding="utf-8")) for p in sorted(SKELETONS.glob("*.tl"))]
    for tree in programs:
        skel = var_skeleton(tree, check_program(tree, registry))
        alphabet = len(set(skel.renamable) | set(skel.fixed))
        if len(skel.renamable) <= 3 and len(skel.holes) <= 6 and alphabet ** len(skel.holes) <= 100_000:
            yield tree, skel


def test_bundled_skeletons_match_brute_force(seeds, registry):
    checked = 0
    for tree, skel in _small_skeletons(seeds, registry):
        _assert_matches_brute_force(skel)
        instances = list(spe_enumerate(tree, 10**6, random.Random(2), registry))
        assert len(instances) == len(_brute_force_representatives(skel))
        checked += 1
    assert checked >= 5


def test_original_program_is_scope_safe(seeds, registry):
    for seed in seeds[:10]:
        skel = var_skeleton(seed, check_program(seed, registry))
        assert is_scope_safe(skel, skel.original())


def test_skeleton_of_small_program(registry):
    tree = parse(SMALL)
    skel = var_skeleton(tree, check_program(tree, registry))
    assert skel.renamable == ("a", "b", "c")
    assert len(skel.holes) == 8
    assert len(skel.decl_holes) == 3
    assert skel.original() == ("a", "a", "b", "b", "b", "c", "c", "a")


def test_parameters_and_loop_variables_stay_fixed(registry):
    tree = parse(WITH_PARAMS)
    skel = var_skeleton(tree, check_program(tree, registry))
    assert {"n", "i"} <= skel.fixed
    assert not set(skel.renamable) & skel.fixed


def test_use_before_declaration_is_unsafe(registry):
    tree = parse(SMALL)
    skel = var_skeleton(tree, check_program(tree, registry))
    names = list(skel.original())
    names[1] = "b"
    assert not is_scope_safe(skel, names)


def test_redeclaring_a_visible_name_is_unsafe(registry):
    tree = parse(SMALL)
    skel = var_skeleton(tree, check_program(tree, registry))
    names = list(skel.original())
    names[2] = "a"
    assert not is_scope_safe(skel, names)


def test_instances_typecheck_and_differ(registry):
    tree = parse(SMALL)
    programs = [print_tree(p) for p in spe_enumerate(tree, 50, random.Random(1), registry)]
    assert len(programs) == len(set(programs)) > 1
    for text in programs:
        assert check_program(parse(text), registry).ok


def test_limit_is_respected(registry):
    tree = parse(SMALL)
    assert len(list(spe_enumerate(tree, 2, random.Random(1), registry))) == 2


def test_canonical_form_numbers_by_first_occurrence():
    form = CanonicalForm.of(["b", "a", "b", "n"], {"a", "b"})
    assert form.labels == ("#0", "#1", "#0", "n")
    assert form == CanonicalForm.of(["x", "y", "x", "n"], {"x", "y"})


def test_ill_typed_seed_is_rejected(registry):
    with pytest.raises(Untypeable):
        list(spe_enumerate(parse("fun main() {\n    println(y)\n}\n"), 5, registry=registry))
