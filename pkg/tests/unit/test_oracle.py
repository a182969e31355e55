import pytest

from tcefuzz.errors import ConfigError, Untypeable
from tcefuzz.oracle import AllowList, crash_signature, diff_traces, run_both, run_external
from tcefuzz.parser import parse
from tcefuzz.runtime import ExecutionResult, TraceEvent

SIMPLE = "fun main() {\n    println(1)\n}\n"


def _result(outcome="Completed", kind="", trace=(), output=()):
    return ExecutionResult(outcome, kind, trace=[TraceEvent(b, s) for b, s in trace], output=list(output))


def test_identical_results_do_not_diverge():
    a = _result(trace=[("B0", ()), ("B1", (("x", "1"),))], output=["1"])
    b = _result(trace=[("B0", ()), ("B1", (("x", "1"),))], output=["1"])
    assert diff_traces(a, b) is None


def test_state_mismatch_is_a_trace_divergence():
    a = _result(trace=[("B0", ()), ("B1", (("x", "1"),))])
    b = _result(trace=[("B0", ()), ("B1", (("x", "2"),))])
    report = diff_traces(a, b)
    assert report.reason == "trace"
    assert report.index == 1
    assert report.classification == "miscompilation"


def test_output_mismatch():
    report = diff_traces(_result(output=["1"]), _result(output=["2"]))
    assert report.reason == "output"


def test_extra_events_are_a_length_divergence():
    a = _result(trace=[("B0", ())])
    b = _result("RuntimeError", "DivByZero", trace=[("B0", ()), ("B1", ())])
    report = diff_traces(a, b)
    assert report.reason == "length"
    assert report.outcomes == ("Completed", "RuntimeError:DivByZero")


def test_whole_doubles_are_allowlisted():
    a = _result(trace=[("B0", (("d", "2.0"),))], output=["2.0"])
    b = _result(trace=[("B0", (("d", "2"),))], output=["2"])
    assert diff_traces(a, b) is None
    assert diff_traces(a, b, AllowList.of([])) is not None


def test_resource_timeout_is_allowlisted():
    a = _result(trace=[("B0", ())])
    b = _result("Timeout", "StepLimit", trace=[("B0", ())])
    report = diff_traces(a, b)
    assert report.classification == "allowlisted"
    strict = diff_traces(a, b, AllowList.of(["float-format"]))
    assert strict.classification == "miscompilation"


def test_event_limit_is_not_allowlisted():
    a = _result(trace=[("B0", ())])
    b = _result("Timeout", "EventLimit", trace=[("B0", ())])
    assert diff_traces(a, b).classification == "miscompilation"


def test_crash_is_not_reported_as_agreement():
    report = diff_traces(_result(), _result("CompilerCrash", "X"))
    assert report is not None
    assert report.classification == "crashed"
    assert report.reason == "crash"
    assert report.outcomes == ("Completed", "CompilerCrash:X")


def test_run_both_keeps_crashes_out_of_divergences(witnesses, registry):
    cmp = run_both(parse(witnesses["FUNREF_ARGUMENT"]), {"FUNREF_ARGUMENT"}, registry=registry)
    assert cmp.crash is not None
    assert cmp.divergence is None


def test_unknown_allowlist_rule():
    with pytest.raises(ConfigError):
        AllowList.of(["whitespace"])


def test_fingerprint_ignores_program_text(witnesses, registry):
    name = "NAMED_ARG_INHERITED_CTOR"
    one = run_both(parse(witnesses[name]), {name}, registry=registry).divergence
    padded = witnesses[name] + "\nfun unused(): Int {\n    return 3\n}\n"
    two = run_both(parse(padded), {name}, registry=registry).divergence
    assert one.fingerprint == two.fingerprint
    assert one.program != two.program
    record = one.to_json()
    assert record["kind"] == "divergence"
    assert record["fault"] == name


def test_run_both_rejects_ill_typed_programs(registry):
    with pytest.raises(Untypeable):
        run_both(parse("fun main() {\n    println(y)\n}\n"), registry=registry)


def test_crash_signature_is_deterministic():
    try:
        raise ValueError("boom 1")
    except ValueError as e:
        first = crash_signature(e, "backend", "ValueError")
        again = crash_signature(e, "backend", "ValueError")
    assert first == again
    assert len(first) == 16


def test_external_nonzero_exit_is_a_crash():
    result = run_external(parse(SIMPLE), 'sh -c "exit 3"')
    assert result.crashed
    assert result.phase == "external"
    assert result.kind == "exit 3"


def test_external_crash_pattern():
    result = run_external(parse(SIMPLE), 'sh -c "echo Internal Error: at line 12"')
    assert result.crashed
    assert "Internal Error" in result.kind


def test_external_success(tmp_path):
    result = run_external(parse(SIMPLE), "cat {file}")
    assert result.outcome == "Completed"
    assert "println(1)" in "\n".join(result.output)


def test_external_timeout():
    result = run_external(parse(SIMPLE), 'sh -c "sleep 5"', timeout=0.2)
    assert (result.outcome, result.kind) == ("Timeout", "WallClock")


def test_external_missing_command():
    with pytest.raises(ConfigError):
        run_external(parse(SIMPLE), "/nonexistent/tlc {file}")


def test_bad_crash_pattern():
    with pytest.raises(ConfigError):
        run_external(parse(SIMPLE), "cat {file}", crash_pattern="(")
