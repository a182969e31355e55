import random

import pytest

from tcefuzz.checker import check_program, get_callables
from tcefuzz.errors import ConfigError, DepthExhausted, Untypeable
from tcefuzz.generation import ExprPool, GenConfig, Generator, generation_phase
from tcefuzz.parser import parse
from tcefuzz.syntax import clone, mk
from tcefuzz.tltypes import BOOLEAN, INT, STRING, ClassType, TypedExpr, type_to_node


def _splice(seed, pool):
    """The seed with every pool entry bound to a fresh top-level val of the entry's type."""
    tree = seed.copy()
    for i, e in enumerate(pool):
        decl = mk("VarDecl", f"spliced{i}", [type_to_node(e.ty), clone(e.expr)], ["val"])
        tree.root.children.append(decl)
        tree.adopt(decl)
    return tree


@pytest.mark.parametrize("stem", ["001_arith", "003_box", "004_shapes", "009_max", "017_pair", "025_queue",
                                  "031_bank_interface", "033_tree"])
def test_pool_entries_typecheck_at_their_type(stem, corpus_dir, registry):
    seed = parse((corpus_dir / f"{stem}.tl").read_text(encoding="utf-8"))
    pool = generation_phase(seed, GenConfig(), random.Random(11), registry)
    assert len(pool) > 0
    result = check_program(_splice(seed, pool), registry)
    assert result.ok, result.errors[:3]


def test_pool_covers_user_classes(corpus_dir, registry):
    seed = parse((corpus_dir / "003_box.tl").read_text(encoding="utf-8"))
    pool = generation_phase(seed, GenConfig(), random.Random(2), registry)
    names = {ty.name for ty in pool.types() if isinstance(ty, ClassType)}
    assert "Box" in names
    for ty in (INT, BOOLEAN, STRING):
        assert ty in pool.types()


@pytest.mark.parametrize("name", ["fbound", "nested_boxes", "self_recursive"])
def test_pathological_seeds_terminate(name, pathological, registry):
    seed = pathological[name]
    pool = generation_phase(seed, GenConfig(max_type_depth=4), random.Random(5), registry)
    assert check_program(_splice(seed, pool), registry).ok


def test_type_arguments_meet_f_bounds(pathological, registry):
    seed = pathological["fbound"]
    result = check_program(seed, registry)
    gen = Generator(result.index, GenConfig(), random.Random(3), registry)
    info = result.index.classes["Sorted"]
    for _ in range(30):
        args = gen.gen_type_params(info)
        assert result.index.well_formed(ClassType("Sorted", args))


def test_self_referential_bound(pathological, registry):
    seed = pathological["self_recursive"]
    result = check_program(seed, registry)
    gen = Generator(result.index, GenConfig(), random.Random(4), registry)
    for _ in range(30):
        te = gen.gen_instance(ClassType("Chain", (ClassType("Link"),)))
        assert result.index.is_subtype(te.ty, ClassType("Chain", (ClassType("Link"),)))


def test_generation_is_deterministic(corpus_dir, registry):
    seed = parse((corpus_dir / "004_shapes.tl").read_text(encoding="utf-8"))
    one = generation_phase(seed, GenConfig(), random.Random(99), registry).records()
    two = generation_phase(seed, GenConfig(), random.Random(99), registry).records()
    assert one == two


def test_pool_has_no_duplicates():
    pool = ExprPool()
    assert pool.add(_int_literal("1"))
    assert not pool.add(_int_literal("1"))
    assert pool.add(_int_literal("2"))
    assert len(pool) == 2


def _int_literal(text):
    return TypedExpr(mk("IntLit", text), INT, 0, "literal")


def test_pool_file_can_be_reloaded(tmp_path, corpus_dir, registry):
    seed = parse((corpus_dir / "001_arith.tl").read_text(encoding="utf-8"))
    pool = generation_phase(seed, GenConfig(), random.Random(1), registry)
    path = tmp_path / "pool.jsonl"
    assert pool.to_jsonl(path) == len(pool)
    loaded = ExprPool.from_jsonl(path, check_program(seed, registry).index)
    assert loaded.records() == pool.records()


def test_lookup_is_by_subtype(pathological, registry):
    seed = pathological["self_recursive"]
    result = check_program(seed, registry)
    pool = generation_phase(seed, GenConfig(), random.Random(8), registry)
    found = pool.lookup(ClassType("Chain", (ClassType("Link"),)), result.index)
    assert all(result.index.is_subtype(e.ty, ClassType("Chain", (ClassType("Link"),))) for e in found)


def test_ill_typed_seed_is_rejected(registry):
    with pytest.raises(Untypeable):
        generation_phase(parse("fun main() {\n    println(y)\n}\n"), registry=registry)


@pytest.mark.parametrize("kwargs", [
    {"nest_decay": 1.0},
    {"max_call_depth": -1},
    {"weights": {"magic": 1.0}},
    {"weights": {"variable": 0.0, "pool": 0.0, "literal": 0.0, "stdlib": 0.0}},
    {"named_arg_rate": 2.0},
])
def test_bad_generation_settings(kwargs):
    with pytest.raises(ConfigError):
        GenConfig(**kwargs)


def _box_generator(corpus_dir, registry, rng_seed):
    seed = parse((corpus_dir / "003_box.tl").read_text(encoding="utf-8"))
    result = check_program(seed, registry)
    return seed, result, Generator(result.index, GenConfig(), random.Random(rng_seed), registry)


def test_adapt_type_params_follows_the_abstract_type(corpus_dir, registry):
    _, result, gen = _box_generator(corpus_dir, registry, 6)
    args = gen.adapt_type_params(result.index.classes["ArrayList"], ClassType("List", (INT,)))
    assert args == (INT,)
    assert gen.adapt_type_params(result.index.classes["Box"], ClassType("List", (INT,))) is None


def test_class_instances_typecheck(corpus_dir, registry):
    seed, result, gen = _box_generator(corpus_dir, registry, 7)
    made = [gen.gen_class_instance(result.index.classes["Box"]) for _ in range(10)]
    assert all(te is not None and te.ty.name == "Box" for te in made)
    assert check_program(_splice(seed, made), registry).ok


def test_interface_instance_comes_from_an_implementation(corpus_dir, registry):
    seed = parse((corpus_dir / "031_bank_interface.tl").read_text(encoding="utf-8"))
    result = check_program(seed, registry)
    gen = Generator(result.index, GenConfig(), random.Random(9), registry)
    te = gen.gen_class_instance(result.index.classes["Priced"])
    assert te is not None
    assert te.ty == ClassType("Priced")
    assert te.expr.text in ("Book", "Pen")
    assert check_program(_splice(seed, [te]), registry).ok


def test_constructor_call_respects_depth(corpus_dir, registry):
    seed, result, gen = _box_generator(corpus_dir, registry, 8)
    ctor = result.index.ctor_callable(result.index.classes["Box"], (INT,))
    te = gen.gen_constructor_call(ctor)
    assert te.ty == ClassType("Box", (INT,))
    assert te.expr.kind == "ConstructorCall"
    assert check_program(_splice(seed, [te]), registry).ok
    with pytest.raises(DepthExhausted):
        gen.gen_constructor_call(ctor, depth=gen.cfg.max_call_depth)


def test_generic_call_gets_type_arguments(corpus_dir, registry):
    seed, _, gen = _box_generator(corpus_dir, registry, 10)
    wrap = next(c for c in get_callables(seed, registry, include_stdlib=False) if c.name == "wrap")
    made = [gen.gen_call(wrap) for _ in range(10)]
    for te in made:
        assert te.ty.name == "Box"
        assert len(te.ty.args) == 1
    assert check_program(_splice(seed, made), registry).ok


@pytest.mark.parametrize("target", [INT, STRING, BOOLEAN, ClassType("List", (INT,)), ClassType("Box", (STRING,))])
def test_value_of_type_is_a_subtype(target, corpus_dir, registry):
    seed, result, gen = _box_generator(corpus_dir, registry, 12)
    made = [gen.gen_value_of_type(target) for _ in range(10)]
    assert all(result.index.is_subtype(te.ty, target) for te in made)
    assert check_program(_splice(seed, made), registry).ok


def test_value_at_depth_limit_is_a_leaf(corpus_dir, registry):
    _, _, gen = _box_generator(corpus_dir, registry, 13)
    te = gen.gen_value_of_type(INT, depth=gen.cfg.max_call_depth)
    assert te.ty == INT
    assert te.expr.kind not in ("Call", "ConstructorCall")
