import random

import pytest

from tcefuzz.checker import check_program
from tcefuzz.errors import ConfigError, NoCandidate, Untypeable
from tcefuzz.generation import GenConfig, generation_phase
from tcefuzz.mutation import (
    MutConfig, eligible_holes, fill_skeleton, gen_ph_expr, iterate_mutation, iterate_mutation_with_stats, merge_seeds,
    mutation_phase, select_placeholders, tce_mutate,
)
from tcefuzz.parser import parse
from tcefuzz.printer import print_tree
from tcefuzz.syntax import structurally_equal
from tcefuzz.tltypes import BOOLEAN, INT, STRING, ClassType

# no wall-clock cutoff, so runs are reproducible
STEADY = MutConfig(time_limit=600.0)

COUNTER = """\
fun main() {
    var total = 0
    val step = 3
    for (i in 0 until 4) {
        total += step * i
    }
    println(total)
}
"""


def test_eligible_holes_skip_read_only_targets(registry):
    tree = parse(COUNTER)
    result = check_program(tree, registry)
    holes = eligible_holes(tree, result)
    assert holes
    for node, ty, lvalue in holes:
        assert result.types[node.id] == ty
        if lvalue:
            assert node.kind == "NameRef" and node.text == "total"


def test_zero_ratio_gives_an_empty_skeleton(registry):
    tree = parse(COUNTER)
    skel = select_placeholders(tree, 0.0, random.Random(1), check_program(tree, registry))
    assert len(skel) == 0


@pytest.mark.parametrize("ratio", [0.25, 0.5, 1.0])
def test_placeholder_count_follows_the_ratio(ratio, registry):
    tree = parse(COUNTER)
    result = check_program(tree, registry)
    n = len(eligible_holes(tree, result))
    skel = select_placeholders(tree, ratio, random.Random(4), result)
    assert 0 < len(skel) <= int(ratio * n + 0.5)


def test_limit_caps_the_placeholders(registry):
    tree = parse(COUNTER)
    skel = select_placeholders(tree, 1.0, random.Random(4), check_program(tree, registry), limit=2)
    assert len(skel) <= 2


def test_erase_restores_the_program(registry):
    tree = parse(COUNTER)
    skel = select_placeholders(tree, 0.6, random.Random(9), check_program(tree, registry))
    assert any(n.kind == "Placeholder" for n in skel.tree.nodes())
    assert structurally_equal(skel.erase().root, tree.root)
    assert not any(n.kind == "Placeholder" for n in tree.nodes())


def test_holes_carry_the_expression_type(registry):
    tree = parse(COUNTER)
    result = check_program(tree, registry)
    skel = select_placeholders(tree, 1.0, random.Random(2), result)
    for hole, ty in skel.holes.items():
        assert result.types[hole] == ty


def test_roots_restrict_holes_to_given_items(registry):
    tree = parse("fun a(): Int {\n    return 1 + 2\n}\n\nfun b(): Int {\n    return 3 + 4\n}\n")
    result = check_program(tree, registry)
    first = tree.root.children[0]
    skel = select_placeholders(tree, 1.0, random.Random(0), result, roots={first.id})
    inside = {n.id for n in first.walk()}
    assert skel.holes and set(skel.holes) <= inside


def test_fill_keeps_the_program_well_typed(seeds, registry):
    seed = seeds[1]
    result = check_program(seed, registry)
    pool = generation_phase(seed, GenConfig(), random.Random(3), registry)
    skel = select_placeholders(seed, 0.8, random.Random(3), result)
    tree, filled, rolled_back = fill_skeleton(skel, result, pool, STEADY, random.Random(3), registry)
    assert filled + rolled_back == len(skel)
    assert check_program(tree, registry).ok


def test_rounds_shrink_the_placeholder_count(seeds, registry):
    seed = seeds[3]
    pool = generation_phase(seed, GenConfig(), random.Random(6), registry)
    cfg = MutConfig(ratio=0.8, shrink=0.5, max_iterations=4, time_limit=600.0)
    tree, rounds = iterate_mutation_with_stats(seed, pool, cfg, random.Random(6), registry)
    assert rounds
    for prev, cur in zip(rounds, rounds[1:]):
        assert cur.placeholders <= cfg.shrink * prev.placeholders
    assert check_program(tree, registry).ok


def test_tce_mutants_typecheck(seeds, registry):
    rng = random.Random(2024)
    for _ in range(12):
        gen_seed, mut_seed = rng.choice(seeds), rng.choice(seeds)
        pool = generation_phase(gen_seed, GenConfig(), rng, registry)
        tree, rounds = tce_mutate(mut_seed, gen_seed, pool, STEADY, rng, registry)
        result = check_program(parse(print_tree(tree)), registry)
        assert result.ok, (print_tree(tree), result.errors[:2])
        assert all(r.filled + r.rolled_back <= r.placeholders for r in rounds)


def test_single_round_and_multi_round_entry_points(seeds, registry):
    rng = random.Random(31)
    pool = generation_phase(seeds[2], GenConfig(), rng, registry)
    once = mutation_phase(seeds[9], seeds[2], pool, STEADY, rng, registry)
    assert check_program(parse(print_tree(once)), registry).ok
    own_pool = generation_phase(seeds[9], GenConfig(), rng, registry)
    rounds = iterate_mutation(seeds[9], own_pool, STEADY, rng, registry)
    assert check_program(parse(print_tree(rounds)), registry).ok


def test_tce_mutation_is_deterministic(seeds, registry):
    def once():
        rng = random.Random(77)
        pool = generation_phase(seeds[4], GenConfig(), rng, registry)
        tree, rounds = tce_mutate(seeds[7], seeds[4], pool, STEADY, rng, registry)
        return print_tree(tree), [r.to_json() for r in rounds]

    assert once() == once()


def test_merge_prepends_the_anonymized_generation_seed(seeds, registry):
    mut_seed, gen_seed = seeds[0], seeds[2]
    pool = generation_phase(gen_seed, GenConfig(), random.Random(1), registry)
    merged, renamed, roots = merge_seeds(mut_seed, gen_seed, pool, random.Random(1), registry)
    assert check_program(merged, registry).ok
    assert len(roots) == len(mut_seed.root.children)
    tail = merged.root.children[-len(mut_seed.root.children):]
    assert {n.id for n in tail} == roots
    assert len(renamed) == len(pool)


def test_ill_typed_seed_is_rejected(seeds, registry):
    bad = parse("fun main() {\n    println(y)\n}\n")
    with pytest.raises(Untypeable):
        tce_mutate(bad, seeds[0], generation_phase(seeds[0], registry=registry), STEADY, random.Random(0), registry)


@pytest.mark.parametrize("kwargs", [
    {"ratio": 0.0},
    {"ratio": 1.5},
    {"shrink": 1.0},
    {"max_iterations": -1},
    {"time_limit": 0.0},
    {"variety_rate": -0.1},
])
def test_bad_mutation_settings(kwargs):
    with pytest.raises(ConfigError):
        MutConfig(**kwargs)


def _hole_context(registry):
    seed = parse(COUNTER)
    result = check_program(seed, registry)
    three = next(n for n in seed.root.walk() if n.kind == "IntLit" and n.text == "3")
    pool = generation_phase(seed, GenConfig(), random.Random(4), registry)
    return result, result.scope_at(three.id), pool


@pytest.mark.parametrize("ty", [INT, STRING, BOOLEAN, ClassType("List", (INT,))])
def test_hole_fill_fits_the_hole_type(ty, registry):
    result, scope, pool = _hole_context(registry)
    rng = random.Random(21)
    for _ in range(20):
        te = gen_ph_expr(ty, pool, scope, STEADY, rng, result.index, registry)
        assert result.index.is_subtype(te.ty, ty)


def test_assignment_target_fill_is_a_writable_variable(registry):
    result, scope, pool = _hole_context(registry)
    te = gen_ph_expr(INT, pool, scope, STEADY, random.Random(2), result.index, registry, lvalue=True)
    assert te.expr.kind == "NameRef"
    assert te.expr.text == "total"
    with pytest.raises(NoCandidate):
        gen_ph_expr(STRING, pool, scope, STEADY, random.Random(2), result.index, registry, lvalue=True)
