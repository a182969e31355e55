import random

import pytest

from tcefuzz.baselines import EDITS, GrammarConfig, grammar_generate, mutate_burst, mutate_random, perturb_literal
from tcefuzz.checker import check_program
from tcefuzz.errors import ConfigError
from tcefuzz.parser import parse
from tcefuzz.printer import print_tree
from tcefuzz.syntax import LITERAL_KINDS, mk


def test_grammar_programs_parse():
    rng = random.Random(12)
    for _ in range(200):
        text = print_tree(grammar_generate(GrammarConfig(), rng))
        assert print_tree(parse(text)) == text


def test_grammar_programs_are_mostly_ill_typed(registry):
    rng = random.Random(3)
    programs = [grammar_generate(GrammarConfig(), rng) for _ in range(100)]
    valid = sum(1 for p in programs if check_program(p, registry).ok)
    assert valid < 50


def test_depth_limit_bounds_the_tree():
    rng = random.Random(1)
    for _ in range(50):
        tree = grammar_generate(GrammarConfig(max_depth=1, soft_depth=0, max_items=2), rng)
        assert len(tree.root.children) <= 2
        assert max((_height(c) for c in tree.root.children), default=0) <= 8


def _height(node):
    return 1 + max((_height(c) for c in node.children), default=0)


def test_grammar_generation_is_deterministic():
    one = print_tree(grammar_generate(GrammarConfig(), random.Random(5)))
    two = print_tree(grammar_generate(GrammarConfig(), random.Random(5)))
    assert one == two


def test_bad_grammar_config():
    with pytest.raises(ConfigError):
        GrammarConfig(max_depth=0)


def test_random_mutation_leaves_the_seed_alone(seeds):
    seed = seeds[5]
    before = print_tree(seed)
    rng = random.Random(8)
    mutants = [print_tree(mutate_random(seed, rng)) for _ in range(30)]
    assert print_tree(seed) == before
    assert any(m != before for m in mutants)


def test_mutants_stay_printable_and_parseable(seeds):
    rng = random.Random(21)
    for _ in range(60):
        mutant = mutate_burst(rng.choice(seeds), rng, edits=3)
        text = print_tree(mutant)
        parse(text)


def test_program_without_literals_or_statements_is_returned_unchanged():
    tree = parse("")
    out = mutate_random(tree, random.Random(0))
    assert print_tree(out) == print_tree(tree)


def test_edit_set():
    assert set(EDITS) == {"swap", "delete", "duplicate", "perturb"}


def test_literal_perturbation_ignores_the_literal_type():
    rng = random.Random(4)
    kinds = set()
    for _ in range(100):
        node = mk("IntLit", "1")
        perturb_literal(node, rng)
        kinds.add(node.kind)
    assert kinds == LITERAL_KINDS


def test_top_level_declarations_can_be_deleted():
    tree = parse("class A()\n")
    sizes = {len(mutate_random(tree, random.Random(k)).root.children) for k in range(20)}
    assert 0 in sizes


def test_random_mutants_are_mostly_ill_typed(seeds, registry):
    rng = random.Random(17)
    mutants = [mutate_burst(rng.choice(seeds), rng, edits=3) for _ in range(200)]
    valid = sum(1 for m in mutants if check_program(m, registry).ok)
    assert valid <= 0.3 * len(mutants)
