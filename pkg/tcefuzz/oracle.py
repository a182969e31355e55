"""
Differential oracle: run a program on both backends and compare.

Usage:
    cmp = run_both(tree, faults={"DEFAULT_ARG_OPERATOR"})
    if cmp.crash is not None: ...              # compiler crashed
    if cmp.divergence is not None: ...         # traces or outputs differ

Allowlist rules (AllowList.rules):
    float-format       "1.0" and "1" compare equal in states and output
    resource-timeout   a StepLimit/WallClock timeout on one side is not a
                       divergence when the common trace prefix agrees
"""

import hashlib
import logging
import re
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple

from .checker import check_program
from .errors import ConfigError, Untypeable
from .interpreter import Interpreter
from .printer import print_tree
from .runtime import (
    ExecutionResult, Limits, TraceEvent, block_ids, crash_signature as _signature,
)
from .stdlib import StdlibRegistry
from .syntax import SyntaxTree
from .vm import compile_and_run

logger = logging.getLogger(__name__)

RULES = ("float-format", "resource-timeout")
RESOURCE_TIMEOUTS = ("StepLimit", "WallClock")
DEFAULT_CRASH_PATTERN = r"(?i)(exception|internal error|crash)"

_WHOLE_DOUBLE = re.compile(r"(?<![\w.])(-?\d+)\.0(?![\d\w])")


@dataclass(frozen=True)
class AllowList:
    rules: FrozenSet[str] = frozenset(RULES)

    @classmethod
    def of(cls, names: Iterable[str]) -> "AllowList":
        names = frozenset(names)
        unknown = names - set(RULES)
        if unknown:
            raise ConfigError(f"unknown allowlist rule(s): {', '.join(sorted(unknown))}")
        return cls(names)

    def normalize(self, text: str) -> str:
        if "float-format" in self.rules:
            return _WHOLE_DOUBLE.sub(r"\1", text)
        return text

    def event(self, e: TraceEvent) -> Tuple[str, Tuple[Tuple[str, str], ...]]:
        return e.block, tuple((k, self.normalize(v)) for k, v in e.state)


@dataclass
class DivergenceReport:
    program: str
    index: int                                  # first divergent event
    events: Tuple[Optional[Dict[str, Any]], Optional[Dict[str, Any]]]
    classification: str                         # miscompilation, allowlisted or crashed
    reason: str                                 # trace, length, output or outcome
    outcomes: Tuple[str, str] = ("", "")
    context: str = "top"                        # declaration kind enclosing the divergent block
    fault: str = ""

    @property
    def fingerprint(self) -> str:
        key = "|".join((self.reason, self.context) + self.outcomes)
        return hashlib.blake2b(key.encode("utf-8"), digest_size=8).hexdigest()

    def to_json(self) -> Dict[str, Any]:
        return {
            "kind": "divergence", "classification": self.classification, "reason": self.reason,
            "index": self.index, "events": list(self.events), "outcomes": list(self.outcomes),
            "context": self.context, "fingerprint": self.fingerprint, "fault": self.fault,
            "program": self.program,
        }


def _outcome(r: ExecutionResult) -> str:
    return f"{r.outcome}:{r.kind}" if r.kind else r.outcome


def _event_json(trace: List[TraceEvent], i: int) -> Optional[Dict[str, Any]]:
    return trace[i].to_json() if i < len(trace) else None


def diff_traces(a: ExecutionResult, b: ExecutionResult,
                allow: AllowList = AllowList()) -> Optional[DivergenceReport]:
    """Compare two executions of one program.

    Returns:
        None when the results agree, else a DivergenceReport (without program
        text). A compiler crash on either side leaves no traces to compare and
        gives a report classified `crashed`.
    """
    if a.crashed or b.crashed:
        return DivergenceReport("", 0, (None, None), "crashed", "crash", (_outcome(a), _outcome(b)),
                                fault=b.fault or a.fault)
    common = min(len(a.trace), len(b.trace))
    first = None
    for i in range(common):
        if allow.event(a.trace[i]) != allow.event(b.trace[i]):
            first = i
            break
    outcomes = (_outcome(a), _outcome(b))
    if first is not None:
        return _report(a, b, first, "trace", outcomes)

    same_outcome = (a.outcome, a.kind) == (b.outcome, b.kind)
    if same_outcome and len(a.trace) == len(b.trace):
        out_a = [allow.normalize(line) for line in a.output]
        out_b = [allow.normalize(line) for line in b.output]
        if out_a == out_b:
            return None
        if a.outcome == "Timeout" and a.kind in RESOURCE_TIMEOUTS and "resource-timeout" in allow.rules:
            return None
        return _report(a, b, common, "output", outcomes)

    if "resource-timeout" in allow.rules and _resource_timeout(a, b):
        report = _report(a, b, common, "outcome" if len(a.trace) == len(b.trace) else "length", outcomes)
        report.classification = "allowlisted"
        return report
    return _report(a, b, common, "outcome" if len(a.trace) == len(b.trace) else "length", outcomes)


def _resource_timeout(a: ExecutionResult, b: ExecutionResult) -> bool:
    return any(r.outcome == "Timeout" and r.kind in RESOURCE_TIMEOUTS for r in (a, b))


def _report(a: ExecutionResult, b: ExecutionResult, i: int, reason: str,
            outcomes: Tuple[str, str]) -> DivergenceReport:
    return DivergenceReport("", i, (_event_json(a.trace, i), _event_json(b.trace, i)),
                            "miscompilation", reason, outcomes, fault=b.fault or a.fault)


def crash_signature(crash: BaseException, phase: Optional[str] = None, kind: Optional[str] = None) -> str:
    """64-bit digest of (phase, kind, location) of a crash; see runtime.crash_frame."""
    phase = phase if phase is not None else getattr(crash, "phase", "")
    kind = kind if kind is not None else getattr(crash, "kind", type(crash).__name__)
    return _signature(phase, kind, crash)


def divergence_context(tree: SyntaxTree, report: DivergenceReport) -> str:
    """Kind of declaration enclosing the first divergent block: fun, method or top."""
    event = report.events[0] or report.events[1]
    if event is None:
        return "end"
    by_block = {b: nid for nid, b in block_ids(tree).items()}
    node_id = by_block.get(event["block"])
    if node_id is None:
        return "top"
    parents = tree.parents()
    node = tree.find(node_id)
    context = "top"
    while node is not None:
        if node.kind == "FunDecl":
            context = "fun"
        elif node.kind in ("ClassDecl", "InterfaceDecl") and context == "fun":
            context = "method"
        node = parents.get(node.id)
    return context


@dataclass
class Comparison:
    reference: ExecutionResult
    candidate: ExecutionResult
    divergence: Optional[DivergenceReport] = None

    @property
    def crash(self) -> Optional[ExecutionResult]:
        return self.candidate if self.candidate.crashed else None


def run_both(tree: SyntaxTree, faults: Iterable[str] = (), limits: Limits = Limits(),
             allow: AllowList = AllowList(), registry: Optional[StdlibRegistry] = None) -> Comparison:
    """Run the reference interpreter and the compiler under test, then diff.

    Raises:
        Untypeable: when the program does not typecheck.
    """
    result = check_program(tree, registry)
    if not result.ok:
        raise Untypeable(f"program does not typecheck: {result.errors[0].message}")
    reference = Interpreter(tree, result, limits).run()
    candidate = compile_and_run(tree, faults, limits, registry)
    report = None if reference.crashed or candidate.crashed else diff_traces(reference, candidate, allow)
    if report is not None:
        report.program = print_tree(tree)
        report.context = divergence_context(tree, report)
        logger.debug("divergence (%s) at event %d: %s vs %s",
                     report.reason, report.index, *report.outcomes)
    return Comparison(reference, candidate, report)


# -- external compilers -------------------------------------------------------


@dataclass
class ExternalRun:
    command: List[str]
    returncode: Optional[int]
    stdout: str = ""
    stderr: str = ""
    matched: str = ""
    timed_out: bool = False

    @property
    def crashed(self) -> bool:
        return not self.timed_out and (self.returncode != 0 or bool(self.matched))


def run_external(tree: SyntaxTree, command: str, crash_pattern: str = DEFAULT_CRASH_PATTERN,
                 timeout: float = 60.0, workdir: Optional[Path] = None) -> ExecutionResult:
    """Compile a program with an external command; crash-only oracle.

    Args:
        tree: the program, printed to a temporary `.tl` file
        command: shell-like command line, `{file}` is replaced by the file path
        crash_pattern: regex over stdout+stderr that marks a crash
        timeout: seconds before the process is killed

    Returns:
        CompilerCrash (phase "external") on nonzero exit or a pattern match,
        Timeout(WallClock) on timeout, else Completed with stdout lines.
    """
    try:
        pattern = re.compile(crash_pattern, re.MULTILINE)
    except re.error as e:
        raise ConfigError(f"bad crash pattern {crash_pattern!r}: {e}")
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        path = Path(tmp) / "program.tl"
        path.write_text(print_tree(tree), encoding="utf-8")
        argv = [part.replace("{file}", str(path)) for part in shlex.split(command)]
        run = _spawn(argv, timeout)
    if run.timed_out:
        return ExecutionResult("Timeout", "WallClock", backend="external")
    text = run.stdout + "\n" + run.stderr
    m = pattern.search(text)
    run.matched = m.group(0) if m else ""
    if run.crashed:
        line = _crash_line(text, m)
        kind = f"exit {run.returncode}" if not m else run.matched
        digest = hashlib.blake2b("|".join(("external", kind, line)).encode("utf-8"), digest_size=8).hexdigest()
        return ExecutionResult("CompilerCrash", kind, line, phase="external", signature=digest, backend="external")
    return ExecutionResult("Completed", output=run.stdout.splitlines(), backend="external")


def _spawn(argv: List[str], timeout: float) -> ExternalRun:
    logger.debug("external: %s", " ".join(argv))
    try:
        p = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return ExternalRun(argv, None, timed_out=True)
    except OSError as e:
        raise ConfigError(f"cannot run external command {argv[0]!r}: {e}")
    return ExternalRun(argv, p.returncode, p.stdout, p.stderr)


def _crash_line(text: str, m: Optional[re.Match]) -> str:
    """The line holding the crash-pattern match, digits masked so reruns agree."""
    if m is None:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        line = lines[-1] if lines else ""
    else:
        start = text.rfind("\n", 0, m.start()) + 1
        end = text.find("\n", m.end())
        line = text[start:end if end >= 0 else len(text)]
    return re.sub(r"\d+", "N", line.strip())
