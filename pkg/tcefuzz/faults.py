"""
Injectable compiler faults.

Each fault is a small, localized defect in the compiler under test (the
checker acting as frontend, vm.Compiler as backend). They are modelled on
real miscompilation and crash shapes: defaulted operator arguments, function
references as arguments, nested accessors, empty-range loops, named arguments
of inherited constructors, compound index assignments and overload
resolution with range arguments.

The predicates below decide whether a node triggers a fault. A fault may be
raised from several compiler paths; its `site` names the one code location
it stands for, and crash signatures key on that.
"""

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable

from .errors import ConfigError
from .syntax import LITERAL_KINDS, Node


@dataclass(frozen=True)
class Fault:
    name: str
    phase: str          # frontend or backend
    effect: str         # crash or miscompile
    kind: str           # error kind reported for crashes
    description: str
    site: str = ""      # compiler location the defect lives in


CATALOG: Dict[str, Fault] = {f.name: f for f in (
    Fault("DEFAULT_ARG_OPERATOR", "backend", "miscompile", "",
          "operator-syntax calls pass the last supplied argument to defaulted parameters", "lower:operator-call"),
    Fault("FUNREF_ARGUMENT", "backend", "crash", "FunRefLoweringError",
          "a function reference passed directly as a call argument crashes lowering", "lower:call-arguments"),
    Fault("NESTED_ACCESSOR", "backend", "crash", "AccessorLoweringError",
          "member access on a constructor call whose arguments access members of "
          "another constructor call crashes lowering", "lower:member-receiver"),
    Fault("RANGE_UNTIL_LOOP", "backend", "miscompile", "",
          "for over `start until <literal>` with a non-literal start loops with `!=`", "lower:for-range"),
    Fault("NAMED_ARG_INHERITED_CTOR", "backend", "miscompile", "",
          "named constructor arguments are bound positionally when the class has a user superclass",
          "lower:ctor-arguments"),
    Fault("COMPOUND_INDEX_ORDER", "backend", "crash", "IndexAssignOrderError",
          "compound assignment to an index computed by a call or member access crashes lowering", "lower:index-assign"),
    Fault("OVERLOAD_RANGE_ARG", "frontend", "crash", "OverloadResolutionCrash",
          "overload resolution crashes on a range argument", "resolve:overload"),
)}

ALL_FAULTS: FrozenSet[str] = frozenset(CATALOG)


def parse_faults(selection: "str | Iterable[str] | None") -> FrozenSet[str]:
    """Parse "f1,f2" (or an iterable, or "all") into a validated fault set.

    Raises:
        ConfigError: on an unknown fault name.
    """
    if selection is None:
        return frozenset()
    if isinstance(selection, str):
        if selection.strip().lower() == "all":
            return ALL_FAULTS
        names = [s.strip() for s in selection.split(",") if s.strip()]
    else:
        names = list(selection)
    unknown = [n for n in names if n not in CATALOG]
    if unknown:
        raise ConfigError(f"unknown fault(s): {', '.join(unknown)}; known: {', '.join(sorted(CATALOG))}")
    return frozenset(names)


def unnamed(arg: Node) -> Node:
    return arg.children[0] if arg.kind == "NamedArg" else arg


def funref_argument(call: Node) -> bool:
    return any(unnamed(a).kind == "FunRef" for a in call.args())


def nested_accessor(node: Node) -> bool:
    """`C(D(..).x).y` or `C(D(..).x).m(..)`."""
    recv = node.children[0] if node.kind == "MemberAccess" else node.receiver()
    if recv is None or recv.kind != "ConstructorCall":
        return False
    for a in recv.args():
        a = unnamed(a)
        if a.kind == "MemberAccess" and a.children[0].kind == "ConstructorCall":
            return True
    return False


def compound_index_order(assign: Node) -> bool:
    target = assign.children[0]
    if assign.text == "=" or target.kind != "Index":
        return False
    return any(i.kind in ("Call", "MemberAccess") for i in target.children[1:])


def range_until_loop(loop: Node) -> bool:
    it = loop.children[0]
    return (it.kind == "RangeExpr" and it.text == "until"
            and it.children[1].kind in LITERAL_KINDS and it.children[0].kind not in LITERAL_KINDS)


def describe() -> str:
    lines = []
    for f in CATALOG.values():
        lines.append(f"{f.name:26} {f.phase:8} {f.effect:10} {f.description}")
    return "\n".join(lines)
