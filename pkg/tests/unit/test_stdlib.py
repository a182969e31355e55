import random

import pytest

from tcefuzz.errors import NoCandidate
from tcefuzz.stdlib import (
    default_registry, find_implementations, load_stdlib, random_primitive_value, stdlib_callables_returning,
)
from tcefuzz.tltypes import BOOLEAN, DOUBLE, INT, INT_RANGE, LONG, STRING, UNIT, ClassType


def test_bundled_stdlib_loads_once(registry):
    assert default_registry() is registry
    assert load_stdlib() is load_stdlib()


def test_registry_lists_classes_and_callables(registry):
    names = {info.name for info in registry.classes()}
    assert {"Int", "String", "List", "MutableList", "ArrayList", "IntRange"} <= names
    qualified = {c.name for c in registry.callables()}
    assert {"listOf", "println", "maxOf", "sumOf"} <= qualified


def test_implementations_of_an_interface(registry):
    found = find_implementations(ClassType("List", (INT,)), registry.index)
    assert ClassType("ArrayList", (INT,)) in found


def test_callables_returning_int_range(registry):
    callables = stdlib_callables_returning(INT_RANGE, 2, registry)
    assert callables
    assert all(registry.index.is_subtype(c.ret, INT_RANGE) for c in callables)


def test_callables_returning_respect_the_depth_budget(registry):
    shallow = stdlib_callables_returning(STRING, 1, registry)
    deep = stdlib_callables_returning(STRING, 3, registry)
    assert len(shallow) <= len(deep)


def test_nothing_returns_unit(registry):
    assert stdlib_callables_returning(UNIT, 3, registry) == []


@pytest.mark.parametrize("ty,kind", [
    (INT, "IntLit"), (LONG, "LongLit"), (DOUBLE, "DoubleLit"), (BOOLEAN, "BoolLit"), (STRING, "StringLit"),
])
def test_random_primitive_values(ty, kind):
    rng = random.Random(7)
    for _ in range(50):
        e = random_primitive_value(ty, rng)
        assert e.ty == ty
        assert e.expr.kind == kind


def test_no_literal_for_unit():
    with pytest.raises(NoCandidate):
        random_primitive_value(UNIT, random.Random(0))
