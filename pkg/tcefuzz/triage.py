"""
Post-processing of findings: input reduction and deduplication.

reduce_input() shrinks a program while a ReductionGoal keeps holding. Passes
run coarse to fine and loop until nothing changes or the budget is spent:

    1. ddmin over top-level items
    2. ddmin over class members
    3. ddmin over every statement list
    4. expression simplification: replace with a literal of the same type,
       unwrap calls and operators to a same-typed operand, inline single-use vals

dedup() groups crash reports by crash signature and divergence reports by
their divergence fingerprint. The two kinds never share a cluster.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .checker import CheckResult, VarRef, check_program
from .errors import BudgetExhausted, ParseError, TcefuzzError, Untypeable
from .oracle import AllowList, run_both
from .parser import parse, tokenize
from .printer import print_tree
from .runtime import Limits
from .stdlib import StdlibRegistry
from .syntax import EXPRESSION_KINDS, LITERAL_KINDS, Node, SyntaxTree, clone, mk, replace_in_place
from .tltypes import BOOLEAN, DOUBLE, INT, LONG, STRING, Type
from .vm import compile_and_run

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = 500

LITERALS: Dict[Type, Tuple[Tuple[str, str], ...]] = {
    INT: (("IntLit", "0"), ("IntLit", "1")),
    LONG: (("LongLit", "0"), ("LongLit", "1")),
    DOUBLE: (("DoubleLit", "0.0"), ("DoubleLit", "1.0")),
    BOOLEAN: (("BoolLit", "true"), ("BoolLit", "false")),
    STRING: (("StringLit", ""), ("StringLit", "a")),
}

UNWRAPPABLE = ("Call", "ConstructorCall", "MemberAccess", "BinaryOp", "UnaryOp", "Index", "RangeExpr")


def count_tokens(program: "SyntaxTree | str") -> int:
    text = program if isinstance(program, str) else print_tree(program)
    return sum(1 for t in tokenize(text) if t.kind != "eof")


# -- goals -------------------------------------------------------------------


@dataclass
class ReductionGoal:
    """Predicate "the program still reproduces this finding".

    kind is "crash" (matched by crash signature) or "divergence" (matched by
    divergence fingerprint, miscompilations only).
    """

    kind: str
    signature: str
    faults: FrozenSet[str] = frozenset()
    limits: Limits = Limits()
    allow: AllowList = AllowList()
    registry: Optional[StdlibRegistry] = None

    @classmethod
    def from_report(cls, report: Mapping[str, Any], faults: Iterable[str] = (), limits: Limits = Limits(),
                    allow: AllowList = AllowList(), registry: Optional[StdlibRegistry] = None) -> "ReductionGoal":
        if report.get("kind") == "crash":
            return cls("crash", report["signature"], frozenset(faults), limits, allow, registry)
        return cls("divergence", report["fingerprint"], frozenset(faults), limits, allow, registry)

    def __call__(self, tree: SyntaxTree) -> bool:
        try:
            if self.kind == "crash":
                result = compile_and_run(tree, self.faults, self.limits, self.registry)
                return result.crashed and result.signature == self.signature
            cmp = run_both(tree, self.faults, self.limits, self.allow, self.registry)
        except Untypeable:
            return False
        d = cmp.divergence
        return (cmp.crash is None and d is not None and d.classification == "miscompilation"
                and d.fingerprint == self.signature)


# -- reduction ---------------------------------------------------------------


@dataclass
class ReductionStats:
    evaluations: int = 0
    accepted: int = 0
    exhausted: bool = False
    tokens_before: int = 0
    tokens_after: int = 0


class Reducer:
    def __init__(self, goal: Callable[[SyntaxTree], bool], budget: int = DEFAULT_BUDGET):
        self.goal = goal
        self.budget = budget
        self.stats = ReductionStats()
        self._seen: Dict[str, bool] = {}

    def test(self, tree: SyntaxTree) -> bool:
        try:
            key = print_tree(tree)
        except TcefuzzError:
            return False
        if key in self._seen:
            return self._seen[key]
        if self.stats.evaluations >= self.budget:
            raise BudgetExhausted(f"reduction budget of {self.budget} goal evaluations spent")
        self.stats.evaluations += 1
        try:
            # reparse so the candidate looks exactly like a program read from disk
            ok = bool(self.goal(parse(key)))
        except ParseError:
            ok = False
        self._seen[key] = ok
        return ok

    def run(self, tree: SyntaxTree) -> SyntaxTree:
        best = tree
        self.stats.tokens_before = count_tokens(tree)
        try:
            changed = True
            while changed:
                before = print_tree(best)
                best = self.reduce_lists(best, lambda n: n.kind == "File", _removable_top)
                best = self.reduce_lists(best, lambda n: n.kind in ("ClassDecl", "InterfaceDecl"), _is_member)
                best = self.reduce_lists(best, lambda n: n.kind == "Block", lambda c: True)
                best = self.simplify_expressions(best)
                best = self.inline_vals(best)
                changed = print_tree(best) != before
        except BudgetExhausted as e:
            logger.info("%s; keeping best-so-far", e)
            self.stats.exhausted = True
        self.stats.tokens_after = count_tokens(best)
        return best

    # delta debugging over child lists

    def reduce_lists(self, tree: SyntaxTree, owner: Callable[[Node], bool],
                     removable: Callable[[Node], bool]) -> SyntaxTree:
        for node_id in [n.id for n in tree.nodes() if owner(n)]:
            current = _find(tree, node_id)
            if current is None:
                continue
            items = [c.id for c in current.children if removable(c)]
            if not items:
                continue

            def test(keep: Sequence[int], base=tree, parent=node_id, all_items=frozenset(items)) -> bool:
                return self.test(_drop_children(base, parent, all_items - set(keep)))

            kept = ddmin(test, items)
            if len(kept) < len(items):
                tree = _drop_children(tree, node_id, frozenset(items) - set(kept))
                self.stats.accepted += 1
        return tree

    # type-aware expression passes

    def simplify_expressions(self, tree: SyntaxTree) -> SyntaxTree:
        result = _checked(tree)
        if result is None:
            return tree
        queue = [n.id for n in tree.nodes() if n.kind in EXPRESSION_KINDS]
        for node_id in queue:
            node = _find(tree, node_id)
            if node is None or node.kind in LITERAL_KINDS:
                continue
            for candidate in self.expression_candidates(node, result):
                trial = tree.copy()
                replace_in_place(trial, node_id, candidate)
                if self.test(trial):
                    tree = trial
                    self.stats.accepted += 1
                    result = _checked(tree) or result
                    break
        return tree

    def expression_candidates(self, node: Node, result: CheckResult) -> List[Node]:
        ty = result.types.get(node.id)
        out = [mk(kind, text) for kind, text in LITERALS.get(ty, ())]
        if node.kind in UNWRAPPABLE and ty is not None:
            for child in node.children:
                inner = child.children[0] if child.kind == "NamedArg" else child
                if inner.kind in EXPRESSION_KINDS and result.types.get(inner.id) == ty:
                    out.append(clone(inner))
        return out

    def inline_vals(self, tree: SyntaxTree) -> SyntaxTree:
        result = _checked(tree)
        if result is None:
            return tree
        uses: Dict[int, List[int]] = {}
        for n in tree.nodes():
            ref = result.refs.get(n.id)
            if n.kind == "NameRef" and isinstance(ref, VarRef):
                uses.setdefault(ref.var.decl_id, []).append(n.id)
        for decl in [n for n in tree.nodes() if n.kind == "VarDecl" and not n.has("var")]:
            sites = uses.get(decl.id, [])
            if len(sites) != 1:
                continue
            trial = tree.copy()
            replace_in_place(trial, sites[0], clone(decl.initializer()))
            trial = _drop_children(trial, trial.parent_of(decl.id).id, frozenset({decl.id}))
            if self.test(trial):
                return self.inline_vals(trial)
        return tree


def ddmin(test: Callable[[Sequence[Any]], bool], items: Sequence[Any]) -> List[Any]:
    """1-minimal subset of `items` for which `test` holds (test(items) assumed true)."""
    items = list(items)
    if test([]):
        return []
    n = 2
    while len(items) >= 2:
        chunk = max(len(items) // n, 1)
        reduced = False
        start = 0
        while start < len(items):
            complement = items[:start] + items[start + chunk:]
            if test(complement):
                items = complement
                n = max(n - 1, 2)
                reduced = True
                break
            start += chunk
        if not reduced:
            if n >= len(items):
                break
            n = min(n * 2, len(items))
    return items


def _removable_top(n: Node) -> bool:
    return True


def _is_member(n: Node) -> bool:
    return n.kind in ("PropertyDecl", "FunDecl")


def _find(tree: SyntaxTree, node_id: int) -> Optional[Node]:
    for n in tree.nodes():
        if n.id == node_id:
            return n
    return None


def _drop_children(tree: SyntaxTree, parent_id: int, drop: FrozenSet[int]) -> SyntaxTree:
    out = tree.copy()
    parent = _find(out, parent_id)
    if parent is not None and drop:
        parent.children = [c for c in parent.children if c.id not in drop]
    return out


def _checked(tree: SyntaxTree) -> Optional[CheckResult]:
    result = check_program(tree)
    return result if result.ok else None


def reduce_input(program: SyntaxTree, goal: Callable[[SyntaxTree], bool],
                 budget: int = DEFAULT_BUDGET) -> SyntaxTree:
    """Shrink `program` while `goal` holds.

    Args:
        program: the finding; goal(program) must hold
        goal: a ReductionGoal or any deterministic predicate
        budget: maximum number of goal evaluations

    Returns:
        The smallest program found; it satisfies the goal. When the budget runs
        out the best program so far is returned.
    """
    out, stats = reduce_with_stats(program, goal, budget)
    logger.info("reduced %d -> %d tokens in %d evaluations", stats.tokens_before, stats.tokens_after, stats.evaluations)
    return out


def reduce_with_stats(program: SyntaxTree, goal: Callable[[SyntaxTree], bool],
                      budget: int = DEFAULT_BUDGET) -> Tuple[SyntaxTree, ReductionStats]:
    reducer = Reducer(goal, budget)
    if not reducer.test(program):
        raise Untypeable("reduction goal does not hold on the input")
    out = reducer.run(program)
    return out, reducer.stats


# -- reports and clusters -------------------------------------------------------


@dataclass
class CrashReport:
    program: str
    phase: str
    error: str
    signature: str
    message: str = ""
    fault: str = ""

    def to_json(self) -> Dict[str, Any]:
        return {"kind": "crash", "phase": self.phase, "error": self.error, "signature": self.signature,
                "message": self.message, "fault": self.fault, "program": self.program}


@dataclass
class BugCluster:
    kind: str                                   # crash or divergence
    signature: str
    representative: Dict[str, Any]
    members: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.members)

    def to_json(self) -> Dict[str, Any]:
        rep = self.representative
        return {
            "kind": self.kind, "signature": self.signature, "size": self.size,
            "phase": rep.get("phase", ""), "classification": rep.get("classification", ""),
            "faults": sorted({m.get("fault", "") for m in self.members} - {""}),
            "representative": rep.get("program", ""),
        }


def report_key(report: Mapping[str, Any]) -> Tuple[str, str]:
    if report.get("kind") == "crash":
        return "crash", report["signature"]
    return "divergence", report["fingerprint"]


def dedup(reports: Iterable[Any]) -> List[BugCluster]:
    """Cluster reports; the representative is the member with the fewest tokens.

    Allowlisted divergences are not bugs and are skipped.
    """
    clusters: Dict[Tuple[str, str], BugCluster] = {}
    for r in reports:
        record = r.to_json() if hasattr(r, "to_json") else dict(r)
        if record.get("kind") != "crash" and record.get("classification") == "allowlisted":
            continue
        kind, sig = report_key(record)
        cluster = clusters.get((kind, sig))
        if cluster is None:
            cluster = clusters[(kind, sig)] = BugCluster(kind, sig, record)
        cluster.members.append(record)
    for cluster in clusters.values():
        cluster.representative = min(cluster.members, key=_size_key)
    return list(clusters.values())


def _size_key(record: Mapping[str, Any]) -> Tuple[int, str]:
    program = record.get("program", "")
    try:
        return count_tokens(program), program
    except ParseError:
        return len(program), program
