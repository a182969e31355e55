import json
from pathlib import Path

import pytest

from tcefuzz.checker import check_program
from tcefuzz.cli import EXIT_CONFIG, EXIT_EMPTY, EXIT_FAILED, EXIT_OK, main
from tcefuzz.faults import CATALOG
from tcefuzz.parser import parse
from tcefuzz.triage import count_tokens
from tcefuzz.vm import compile_and_run

ROOT = Path(__file__).resolve().parent.parent.parent
SEED = ROOT / "corpus" / "002_counter.tl"
FUNREF = Path(__file__).resolve().parent.parent / "data" / "witnesses" / "FUNREF_ARGUMENT.tl"
ILL_TYPED = "fun main() {\n    println(y)\n}\n"


@pytest.fixture
def ill_typed(tmp_path):
    path = tmp_path / "bad.tl"
    path.write_text(ILL_TYPED, encoding="utf-8")
    return path


def test_check_ok(capsys):
    assert main(["check", str(SEED)]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith(": ok")


def test_check_reports_position(ill_typed, capsys):
    assert main(["check", str(ill_typed)]) == EXIT_FAILED
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("2:")
    assert str(ill_typed) not in out


def test_check_syntax_error(tmp_path):
    path = tmp_path / "broken.tl"
    path.write_text("fun main( {\n", encoding="utf-8")
    assert main(["check", str(path)]) == EXIT_FAILED


def test_missing_file_is_a_config_error(tmp_path):
    assert main(["check", str(tmp_path / "none.tl")]) == EXIT_CONFIG


def test_faults_listing(capsys):
    assert main(["faults"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in CATALOG:
        assert name in out


def test_run_without_faults_is_clean(capsys):
    assert main(["run", str(FUNREF)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "reference: Completed" in out
    assert "  | 2" in out


def test_run_reports_crash(tmp_path, capsys):
    trace = tmp_path / "trace.jsonl"
    assert main(["run", str(FUNREF), "--faults", "FUNREF_ARGUMENT", "--trace", str(trace)]) == EXIT_FAILED
    assert "crash signature" in capsys.readouterr().out


def test_run_writes_trace(tmp_path):
    trace = tmp_path / "trace.jsonl"
    assert main(["run", str(SEED), "--backend", "interp", "--trace", str(trace)]) == EXIT_OK
    events = [json.loads(line) for line in trace.read_text(encoding="utf-8").splitlines()]
    assert events and events[0]["block"].startswith("B")


def test_run_unknown_fault():
    assert main(["run", str(SEED), "--faults", "NOPE"]) == EXIT_CONFIG


def test_run_ill_typed(ill_typed):
    assert main(["run", str(ill_typed)]) == EXIT_FAILED


def test_generate_writes_pool(tmp_path, capsys):
    pool = tmp_path / "pool.jsonl"
    assert main(["generate", str(SEED), "--out", str(pool), "--rng-seed", "4"]) == EXIT_OK
    assert pool.read_text(encoding="utf-8").strip()
    assert "expressions" in capsys.readouterr().out


def test_mutate_prints_a_typed_program(capsys, registry):
    assert main(["mutate", str(SEED), "--rng-seed", "2"]) == EXIT_OK
    text = capsys.readouterr().out
    assert check_program(parse(text), registry).ok


def test_baseline_grammar(capsys):
    assert main(["baseline", "--strategy", "grammar", "--count", "3"]) == EXIT_OK
    assert capsys.readouterr().out.count("// --- grammar #") == 3


def test_baseline_writes_files(tmp_path):
    out = tmp_path / "spe"
    assert main(["baseline", "--strategy", "spe", "--seed", str(SEED), "--count", "2", "--out", str(out)]) == EXIT_OK
    assert len(list(out.glob("spe_*.tl"))) >= 1


def test_baseline_needs_a_seed():
    assert main(["baseline", "--strategy", "mutate"]) == EXIT_CONFIG


def test_reduce(tmp_path, registry):
    faults = {"FUNREF_ARGUMENT"}
    signature = compile_and_run(parse(FUNREF.read_text(encoding="utf-8")), faults, registry=registry).signature
    out = tmp_path / "reduced.tl"
    argv = ["reduce", str(FUNREF), "--goal-signature", signature, "--faults", "FUNREF_ARGUMENT", "--out", str(out)]
    assert main(argv) == EXIT_OK
    assert count_tokens(out.read_text(encoding="utf-8")) <= count_tokens(FUNREF.read_text(encoding="utf-8"))


def test_reduce_unreproducible(tmp_path):
    argv = ["reduce", str(SEED), "--goal-signature", "0000000000000000", "--faults", "all"]
    assert main(argv) == EXIT_FAILED


def test_fuzz_bad_config(tmp_path):
    config = tmp_path / "campaign.yaml"
    config.write_text("strategy: afl\n", encoding="utf-8")
    assert main(["fuzz", "--config", str(config), "--log-dir", str(tmp_path / "logs")]) == EXIT_CONFIG


def test_fuzz_empty_corpus(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    argv = ["fuzz", "--strategy", "mutate", "--corpus", str(empty), "--out", str(tmp_path / "out"),
            "--iterations", "2", "--log-dir", str(tmp_path / "logs")]
    assert main(argv) == EXIT_EMPTY


def test_fuzz_unknown_compare_strategy(tmp_path):
    argv = ["fuzz", "--compare", "tce,afl", "--log-dir", str(tmp_path / "logs")]
    assert main(argv) == EXIT_CONFIG


def test_fuzz_then_dedup_and_report(tmp_path, capsys):
    out = tmp_path / "out"
    argv = ["fuzz", "--strategy", "grammar", "--corpus", str(ROOT / "corpus"), "--out", str(out),
            "--iterations", "5", "--log-dir", str(tmp_path / "logs")]
    assert main(argv) == EXIT_OK
    assert (out / "report.json").is_file()
    assert list((tmp_path / "logs").glob("fuzz_*.log"))
    capsys.readouterr()
    assert main(["dedup", str(out), "--out", str(tmp_path / "clusters.jsonl")]) == EXIT_OK
    assert "cluster(s)" in capsys.readouterr().out
    assert main(["report", str(out)]) == EXIT_OK
    assert "Correct programs, %" in capsys.readouterr().out


def test_report_without_campaigns(tmp_path):
    assert main(["report", str(tmp_path)]) == EXIT_CONFIG
