import pytest

from tcefuzz.checker import check_program
from tcefuzz.errors import Untypeable
from tcefuzz.interpreter import interpret
from tcefuzz.oracle import diff_traces
from tcefuzz.parser import parse
from tcefuzz.runtime import Limits, show, wrap32
from tcefuzz.vm import compile_and_run


def _run(source, registry, limits=Limits()):
    tree = parse(source)
    ref = interpret(tree, limits, check_program(tree, registry))
    vm = compile_and_run(tree, (), limits, registry)
    return ref, vm


def test_backends_agree_on_the_corpus(seeds, registry):
    for seed in seeds:
        ref = interpret(seed, Limits(), check_program(seed, registry))
        vm = compile_and_run(seed, (), Limits(), registry)
        assert ref.outcome == "Completed", ref.summary()
        assert diff_traces(ref, vm) is None
        assert ref.output == vm.output


def test_backends_agree_on_the_witnesses_without_faults(witnesses, registry):
    for name, text in witnesses.items():
        ref, vm = _run(text, registry)
        assert diff_traces(ref, vm) is None, name


def test_println_output(registry):
    ref, vm = _run('fun main() {\n    println(1 + 2)\n    println("a" + "b")\n    println(true)\n}\n', registry)
    assert ref.output == ["3", "ab", "true"]
    assert vm.output == ref.output


def test_int_arithmetic_wraps(registry):
    ref, vm = _run("fun main() {\n    val x = 2147483647\n    println(x + 1)\n}\n", registry)
    assert ref.output == ["-2147483648"]
    assert vm.output == ref.output
    assert wrap32(2 ** 31) == -(2 ** 31)


def test_top_level_statements_run_before_main(registry):
    ref, vm = _run('val g = 5\n\nfun main() {\n    println(g)\n}\n\nprintln("first")\n', registry)
    assert ref.output == ["first", "5"]
    assert vm.output == ref.output


def test_division_by_zero_is_a_runtime_error(registry):
    ref, vm = _run("fun main() {\n    val z = 0\n    println(1 / z)\n}\n", registry)
    assert (ref.outcome, ref.kind) == ("RuntimeError", "DivByZero")
    assert (vm.outcome, vm.kind) == ("RuntimeError", "DivByZero")
    assert diff_traces(ref, vm) is None


def test_index_out_of_bounds(registry):
    ref, vm = _run("fun main() {\n    val xs = listOf<Int>(1)\n    println(xs[3])\n}\n", registry)
    assert ref.kind == vm.kind == "IndexOutOfBounds"


def test_infinite_loop_hits_the_step_limit(registry):
    limits = Limits(max_events=1_000_000, max_steps=5_000, timeout=30.0)
    ref, vm = _run("fun main() {\n    var i = 0\n    while (true) {\n        i += 1\n    }\n}\n", registry, limits)
    assert (ref.outcome, ref.kind) == ("Timeout", "StepLimit")
    assert vm.outcome == "Timeout"


def test_event_limit(registry):
    limits = Limits(max_events=10, max_steps=1_000_000, timeout=30.0)
    ref, _ = _run("fun main() {\n    for (i in 0 until 100) {\n        println(i)\n    }\n}\n", registry, limits)
    assert (ref.outcome, ref.kind) == ("Timeout", "EventLimit")


def test_deep_recursion_overflows(registry):
    source = "fun down(n: Int): Int {\n    return down(n + 1)\n}\n\nfun main() {\n    println(down(0))\n}\n"
    ref, vm = _run(source, registry, Limits(max_call_depth=50))
    assert (ref.outcome, ref.kind) == ("RuntimeError", "StackOverflow")
    assert (vm.outcome, vm.kind) == ("RuntimeError", "StackOverflow")


def test_trace_records_block_entries(registry):
    ref, vm = _run("fun main() {\n    var n = 0\n    for (i in 0 until 3) {\n        n += i\n    }\n}\n", registry)
    assert len(ref.trace) > 3
    assert [e.block for e in ref.trace] == [e.block for e in vm.trace]


def test_virtual_dispatch_and_overrides(registry):
    source = (
        "open class A() {\n    open fun name(): String {\n        return \"a\"\n    }\n}\n\n"
        "class B() : A() {\n    override fun name(): String {\n        return \"b\"\n    }\n}\n\n"
        "fun main() {\n    val x: A = B()\n    println(x.name())\n}\n"
    )
    ref, vm = _run(source, registry)
    assert ref.output == vm.output == ["b"]


def test_ill_typed_program_is_not_run(registry):
    with pytest.raises(Untypeable):
        interpret(parse("fun main() {\n    println(y)\n}\n"))


def test_show_formats_values():
    assert show(True) == "true"
    assert show(1.5) == "1.5"
    assert show("s", quoted=True) == '"s"'
    assert show(float("inf")) == "Infinity"
