from pathlib import Path

import pytest

from tcefuzz.checker import check_program, get_callables, get_instance_callables, is_subtype
from tcefuzz.errors import CompilerFault, UnknownNode, Untypeable
from tcefuzz.parser import parse
from tcefuzz.tltypes import ANY, INT, INT_RANGE, STRING, ClassType


def _check(source, registry, faults=frozenset()):
    return check_program(parse(source), registry, faults)


def test_every_corpus_seed_typechecks(seeds):
    assert len(seeds) == 36


def test_pathological_seeds_typecheck(pathological, registry):
    assert set(pathological) == {"fbound", "nested_boxes", "self_recursive"}
    for name, tree in pathological.items():
        result = check_program(tree, registry)
        assert result.ok, (name, result.errors)


def test_witnesses_typecheck_without_faults(witnesses, registry):
    for name, text in witnesses.items():
        assert _check(text, registry).ok, name


@pytest.mark.parametrize("source", [
    "fun main() {\n    println(y)\n}\n",
    'fun main() {\n    val x: Int = "a"\n}\n',
    "fun main() {\n    val x = 1\n    x = 2\n}\n",
    "fun f(): Int {\n    if (true) {\n        return 1\n    }\n}\n",
    "class A()\n\nclass B() : A()\n",
    "class V(val x: Int) {\n    fun plus(o: V): V {\n        return V(x)\n    }\n}\n\n"
    "fun main() {\n    val v = V(1) + V(2)\n}\n",
    "fun main() {\n    println(maxOf(1))\n}\n",
    "abstract class S()\n\nfun main() {\n    val s = S()\n}\n",
    "open class A() {\n    open fun f(x: Int = 1): Int {\n        return x\n    }\n}\n",
    "fun main() {\n    val x = 1\n    val x = 2\n}\n",
    "fun main() {\n    while (1) {\n    }\n}\n",
    "fun main() {\n    for (c in 5) {\n    }\n}\n",
    "fun <T : Comparable<T>> top(a: T): T {\n    return a\n}\n\nfun main() {\n    println(top<Boolean>(true))\n}\n",
    "return 1\n",
])
def test_ill_typed_programs_are_rejected(source, registry):
    result = _check(source, registry)
    assert not result.ok
    assert all(e.message for e in result.errors)


def test_types_of_expressions(registry):
    tree = parse('fun main() {\n    val r = 1..3\n    val s = "a" + "b"\n    println(r.count())\n}\n')
    result = check_program(tree, registry)
    assert result.ok
    decls = {n.text: n for n in tree.nodes() if n.kind == "VarDecl"}
    assert result.type_of(decls["r"].initializer().id) == INT_RANGE
    assert result.type_of(decls["s"].initializer().id) == STRING


def test_type_of_a_statement_is_untypeable(registry):
    tree = parse("fun main() {\n    val a = 1\n}\n")
    result = check_program(tree, registry)
    decl = next(n for n in tree.nodes() if n.kind == "VarDecl")
    with pytest.raises(Untypeable):
        result.type_of(decl.id)


def test_scope_at_sees_earlier_declarations_only(registry):
    tree = parse("fun main() {\n    val a = 1\n    val b = 2\n    println(a + b)\n}\n")
    result = check_program(tree, registry)
    decl_b = next(n for n in tree.nodes() if n.kind == "VarDecl" and n.text == "b")
    use = next(n for n in tree.nodes() if n.kind == "NameRef" and n.text == "b")
    assert result.scope_at(decl_b.id).names() == ["a"]
    assert result.scope_at(use.id).names() == ["a", "b"]


def test_scope_includes_parameters_and_loop_variables(registry):
    tree = parse("fun f(n: Int): Int {\n    var s = 0\n    for (i in 0 until n) {\n        s += i\n    }\n"
                 "    return s\n}\n")
    result = check_program(tree, registry)
    assert result.ok
    assign = next(n for n in tree.nodes() if n.kind == "Assign")
    scope = result.scope_at(assign.id)
    assert {"n", "s", "i"} <= set(scope.names())
    assert scope.lookup("i").kind == "loop"
    assert scope.lookup("n").kind == "param"


def test_scope_at_unknown_node(registry):
    tree = parse("fun main() {\n}\n")
    result = check_program(tree, registry)
    with pytest.raises(UnknownNode):
        result.scope_at(10_000)


def test_subtyping(registry):
    assert is_subtype(INT, ANY)
    assert is_subtype(INT, ClassType("Comparable", (INT,)))
    assert not is_subtype(STRING, INT)
    assert is_subtype(ClassType("ArrayList", (INT,)), ClassType("List", (INT,)))
    assert not is_subtype(ClassType("List", (INT,)), ClassType("List", (STRING,)))


def test_user_class_hierarchy(registry):
    tree = parse("open class A()\n\nclass B() : A()\n")
    result = check_program(tree, registry)
    assert result.ok
    assert result.index.is_subtype(ClassType("B"), ClassType("A"))
    assert not result.index.is_subtype(ClassType("A"), ClassType("B"))


def test_range_argument_to_overload_is_a_frontend_crash(witnesses, registry):
    text = witnesses["OVERLOAD_RANGE_ARG"]
    assert _check(text, registry).ok
    with pytest.raises(CompilerFault) as err:
        _check(text, registry, frozenset({"OVERLOAD_RANGE_ARG"}))
    assert err.value.phase == "frontend"


def test_format_errors_uses_line_and_column(registry):
    source = "fun main() {\n    println(y)\n}\n"
    result = _check(source, registry)
    lines = result.format_errors(source)
    assert lines and lines[0].startswith("2:")


BOX = (Path(__file__).resolve().parent.parent.parent / "corpus" / "003_box.tl").read_text(encoding="utf-8")


def test_user_callables_in_declaration_order(registry):
    callables = get_callables(parse(BOX), registry, include_stdlib=False)
    assert [c.name for c in callables] == ["Box", "value", "unwrap", "wrap", "main"]
    assert [c.kind for c in callables[:4]] == ["Constructor", "PropertyAccessor", "Method", "TopLevelFunction"]
    with_stdlib = get_callables(parse(BOX), registry)
    assert with_stdlib[:5] == callables
    assert any(c.name == "listOf" and c.stdlib for c in with_stdlib)


def test_instance_callables_are_substituted(registry):
    result = check_program(parse(BOX), registry)
    box_of_string = ClassType("Box", (STRING,))
    members = {c.name: c for c in get_instance_callables(box_of_string, result.index)}
    assert members["value"].ret == STRING
    assert members["unwrap"].ret == STRING
    assert members["unwrap"].owner == box_of_string
