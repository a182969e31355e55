from pathlib import Path

import pytest

from tcefuzz.errors import ParseError
from tcefuzz.parser import parse, parse_expression, parse_statement, parse_type, tokenize
from tcefuzz.printer import print_node, print_tree
from tcefuzz.syntax import structurally_equal

TESTS = Path(__file__).resolve().parent.parent
CORPUS = TESTS.parent / "corpus"
PATHOLOGICAL = CORPUS / "pathological"
WITNESSES = TESTS / "data" / "witnesses"


def _programs():
    files = sorted(CORPUS.glob("*.tl")) + sorted(PATHOLOGICAL.glob("*.tl")) + sorted(WITNESSES.glob("*.tl"))
    return [pytest.param(p, id=p.stem) for p in files]


@pytest.mark.parametrize("path", _programs())
def test_print_then_parse_gives_same_tree(path):
    tree = parse(path.read_text(encoding="utf-8"))
    again = parse(print_tree(tree))
    assert structurally_equal(tree.root, again.root)


@pytest.mark.parametrize("path", _programs())
def test_printer_is_a_fixpoint(path):
    text = print_tree(parse(path.read_text(encoding="utf-8")))
    assert print_tree(parse(text)) == text


def test_node_ids_are_unique_and_start_at_first_id():
    tree = parse("fun main() {\n    println(1 + 2)\n}\n", first_id=100)
    ids = [n.id for n in tree.nodes()]
    assert len(ids) == len(set(ids))
    assert min(ids) == 100


def test_negative_literal_is_a_single_node():
    node = parse_expression("-2147483648")
    assert node.kind == "IntLit"
    assert node.text == "-2147483648"


def test_minus_with_space_is_unary():
    node = parse_expression("- x")
    assert node.kind == "UnaryOp"


def test_binary_minus_of_negative_literal_round_trips():
    node = parse_expression("1 - -5")
    assert node.kind == "BinaryOp"
    assert structurally_equal(parse_expression(print_node(node)), node)


def test_precedence_keeps_parentheses():
    node = parse_expression("(1 + 2) * 3")
    assert node.kind == "BinaryOp" and node.text == "*"
    assert print_node(node) == "(1 + 2) * 3"


def test_long_and_double_literals():
    assert parse_expression("42L").kind == "LongLit"
    assert parse_expression("1.5").kind == "DoubleLit"


def test_generic_call_with_explicit_type_args():
    node = parse_expression("listOf<Int>(1, 2)")
    assert node.kind == "Call"
    assert print_node(node) == "listOf<Int>(1, 2)"


def test_function_type_ref():
    ref = parse_type("(Int, String) -> Boolean")
    assert print_node(ref) == "(Int, String) -> Boolean"


def test_funref_and_named_args():
    assert parse_expression("::inc").kind == "FunRef"
    call = parse_expression("Point(x = 1, y = 2)")
    assert call.kind == "ConstructorCall"
    assert [a.kind for a in call.children if a.kind == "NamedArg"] == ["NamedArg", "NamedArg"]


def test_string_escapes_round_trip():
    node = parse_expression('"a\\"b\\n"')
    assert node.text == 'a"b\n'
    assert parse_expression(print_node(node)).text == node.text


def test_comments_are_skipped():
    tokens = tokenize("val x = 1 // trailing\n")
    assert [t.text for t in tokens if t.kind != "eof"] == ["val", "x", "=", "1"]


@pytest.mark.parametrize("source", [
    "fun main( {",
    "val x = ",
    "class A(val x: Int",
    'val s = "unterminated',
    "val x = 2147483648",
    "val x = 1 $ 2",
    "fun f(): Int { return 1 } }",
])
def test_parse_errors(source):
    with pytest.raises(ParseError):
        parse(source)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as err:
        parse("fun main() {\n    val = 1\n}\n")
    assert err.value.span is not None


def test_statement_fragments():
    node = parse_statement("xs[i] += 1")
    assert node.kind == "Assign" and node.text == "+="
    assert [c.kind for c in node.children] == ["Index", "IntLit"]
    assert parse_statement("val n: Long = 2L").kind == "VarDecl"
