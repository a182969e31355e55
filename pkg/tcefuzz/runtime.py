"""
Execution support shared by both backends.

Both the tree-walking interpreter and the bytecode VM represent TL values the
same way, call the same natives for `external` stdlib declarations, print
values with the same canonical printer and number basic blocks with the same
pre-order scheme. Anything that could make the two disagree on a correct
program lives here, once.

Value representation:
    Int, Long       int (wrapped to 32 / 64 bits by the natives)
    Double          float
    Boolean         bool
    String          str
    Unit            UNIT_VALUE
    List types      ListValue
    IntRange        RangeValue
    function refs   FunValue
    class instances Obj (fields in field_layout order)
"""

import hashlib
import math
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from .checker import CheckResult, VarInfo
from .index import ClassInfo, FunInfo, ProgramIndex
from .printer import quote
from .syntax import SyntaxTree

INT_MIN, INT_MAX = -(2 ** 31), 2 ** 31 - 1
LONG_MIN, LONG_MAX = -(2 ** 63), 2 ** 63 - 1

MAX_SHOW_DEPTH = 3

BACKEND_INTERP = "interp"
BACKEND_VM = "vm"


# -- outcomes --------------------------------------------------------------


class TLRuntimeError(Exception):
    """A runtime error of the TL program (not of the fuzzer)."""

    def __init__(self, kind: str, message: str = ""):
        self.kind = kind
        self.message = message
        super().__init__(f"{kind}: {message}" if message else kind)


class ExecutionTimeout(Exception):
    def __init__(self, kind: str):
        self.kind = kind            # EventLimit, StepLimit, WallClock
        super().__init__(kind)


@dataclass(frozen=True)
class Limits:
    max_events: int = 10_000
    max_steps: int = 1_000_000
    max_call_depth: int = 200
    timeout: float = 1.0


@dataclass(frozen=True)
class TraceEvent:
    block: str
    state: Tuple[Tuple[str, str], ...] = ()

    def to_json(self) -> Dict[str, Any]:
        return {"block": self.block, "state": dict(self.state)}


@dataclass
class ExecutionResult:
    outcome: str                    # Completed, RuntimeError, CompilerCrash, Timeout
    kind: str = ""
    message: str = ""
    trace: List[TraceEvent] = field(default_factory=list)
    output: List[str] = field(default_factory=list)
    phase: str = ""                 # frontend / backend for compiler crashes
    signature: str = ""
    fault: str = ""
    backend: str = ""

    @property
    def crashed(self) -> bool:
        return self.outcome == "CompilerCrash"

    def summary(self) -> str:
        if self.outcome == "Completed":
            return f"Completed ({len(self.trace)} events)"
        if self.outcome == "CompilerCrash":
            return f"CompilerCrash({self.phase}, {self.kind}, {self.signature})"
        return f"{self.outcome}({self.kind})"

    def to_json(self) -> Dict[str, Any]:
        return {
            "outcome": self.outcome, "kind": self.kind, "message": self.message,
            "phase": self.phase, "signature": self.signature, "fault": self.fault,
            "backend": self.backend, "events": len(self.trace), "output": list(self.output),
        }


# -- values ----------------------------------------------------------------


class _Unit:
    def __repr__(self):
        return "Unit"


class _Uninit:
    def __repr__(self):
        return "<uninit>"


class _Missing:
    """Marks a defaulted parameter the caller did not supply."""

    def __repr__(self):
        return "<missing>"


UNIT_VALUE = _Unit()
UNINIT = _Uninit()
MISSING = _Missing()


@dataclass(eq=False)
class Obj:
    cls: str
    fields: Dict[str, Any]


@dataclass(eq=False)
class ListValue:
    items: List[Any]


@dataclass(frozen=True)
class RangeValue:
    first: int
    last: int
    step: int = 1

    def values(self):
        if self.step > 0:
            return range(self.first, self.last + 1, self.step)
        return range(self.first, self.last - 1, self.step)


@dataclass(frozen=True)
class FunValue:
    fun: Any                        # FunInfo

    @property
    def name(self) -> str:
        return self.fun.name


def wrap32(x: int) -> int:
    return (x - INT_MIN) % 2 ** 32 + INT_MIN


def wrap64(x: int) -> int:
    return (x - LONG_MIN) % 2 ** 64 + LONG_MIN


def format_double(v: float) -> str:
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    return repr(v)


def show(v: Any, quoted: bool = False, depth: int = 0) -> str:
    """Canonical printed form of a value."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format_double(v)
    if isinstance(v, str):
        return quote(v) if quoted else v
    if isinstance(v, ListValue):
        if depth >= MAX_SHOW_DEPTH:
            return "[...]"
        return "[" + ", ".join(show(x, quoted, depth + 1) for x in v.items) + "]"
    if isinstance(v, RangeValue):
        if v.step == 1:
            return f"{v.first}..{v.last}"
        return f"{v.first} downTo {v.last} step {abs(v.step)}"
    if isinstance(v, Obj):
        if depth >= MAX_SHOW_DEPTH:
            return v.cls + "{...}"
        inner = ", ".join(f"{k}={show(x, quoted, depth + 1)}" for k, x in v.fields.items())
        return f"{v.cls}{{{inner}}}"
    if isinstance(v, FunValue):
        return "::" + v.name
    return repr(v)


def tl_equals(a: Any, b: Any) -> bool:
    if isinstance(a, Obj) or isinstance(b, Obj):
        return a is b
    if isinstance(a, ListValue) and isinstance(b, ListValue):
        return len(a.items) == len(b.items) and all(tl_equals(x, y) for x, y in zip(a.items, b.items))
    if isinstance(a, bool) != isinstance(b, bool):
        return False
    return a == b


def runtime_class(v: Any, static_owner: Optional[str] = None) -> str:
    if isinstance(v, bool):
        return "Boolean"
    if isinstance(v, int):
        return static_owner if static_owner in ("Int", "Long") else "Int"
    if isinstance(v, float):
        return "Double"
    if isinstance(v, str):
        return "String"
    if isinstance(v, ListValue):
        return "ArrayList"
    if isinstance(v, RangeValue):
        return "IntRange"
    if isinstance(v, Obj):
        return v.cls
    if v is UNIT_VALUE:
        return "Unit"
    return "Any"


# -- natives ---------------------------------------------------------------


class NativeContext:
    """Per-run state natives may touch: the program output."""

    def __init__(self):
        self.output: List[str] = []


NativeFn = Callable[[NativeContext, Any, List[Any]], Any]

METHODS: Dict[Tuple[str, str], NativeFn] = {}
PROPERTIES: Dict[Tuple[str, str], Callable[[Any], Any]] = {}
FUNCTIONS: Dict[str, NativeFn] = {}
CONSTRUCTORS: Dict[str, NativeFn] = {}


def method(owner: str, *names: str):
    def register(fn):
        for name in names:
            METHODS[(owner, name)] = fn
        return fn
    return register


def function(name: str):
    def register(fn):
        FUNCTIONS[name] = fn
        return fn
    return register


def find_native_method(cls: str, name: str) -> Optional[NativeFn]:
    return METHODS.get((cls, name)) or METHODS.get(("Any", name))


def _int_div(a: int, b: int) -> int:
    if b == 0:
        raise TLRuntimeError("DivByZero", "division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _int_rem(a: int, b: int) -> int:
    if b == 0:
        raise TLRuntimeError("DivByZero", "division by zero")
    return a - b * _int_div(a, b)


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def _make_integral(owner: str, wrap: Callable[[int], int]):
    METHODS[(owner, "plus")] = lambda ctx, r, a: wrap(r + a[0])
    METHODS[(owner, "minus")] = lambda ctx, r, a: wrap(r - a[0])
    METHODS[(owner, "times")] = lambda ctx, r, a: wrap(r * a[0])
    METHODS[(owner, "div")] = lambda ctx, r, a: wrap(_int_div(r, a[0]))
    METHODS[(owner, "rem")] = lambda ctx, r, a: wrap(_int_rem(r, a[0]))
    METHODS[(owner, "compareTo")] = lambda ctx, r, a: _sign(r - a[0])
    METHODS[(owner, "toDouble")] = lambda ctx, r, a: float(r)


_make_integral("Int", wrap32)
_make_integral("Long", wrap64)
METHODS[("Int", "toLong")] = lambda ctx, r, a: r
METHODS[("Long", "toInt")] = lambda ctx, r, a: wrap32(r)
METHODS[("Int", "coerceAtLeast")] = lambda ctx, r, a: max(r, a[0])
METHODS[("Int", "coerceAtMost")] = lambda ctx, r, a: min(r, a[0])
METHODS[("Int", "rangeTo")] = lambda ctx, r, a: RangeValue(r, a[0])
METHODS[("Int", "downTo")] = lambda ctx, r, a: RangeValue(r, a[0], -1)


@method("Int", "until")
def _until(ctx, r, a):
    if a[0] == INT_MIN:
        return RangeValue(1, 0)
    return RangeValue(r, a[0] - 1)


def _double_div(x: float, y: float) -> float:
    if y == 0.0:
        if x == 0.0 or math.isnan(x):
            return math.nan
        return math.copysign(math.inf, x) * math.copysign(1.0, y)
    return x / y


def _double_rem(x: float, y: float) -> float:
    if y == 0.0 or math.isinf(x):
        return math.nan
    return math.fmod(x, y)


def _double_compare(x: float, y: float) -> int:
    if math.isnan(x) or math.isnan(y):
        return 0 if math.isnan(x) and math.isnan(y) else (1 if math.isnan(x) else -1)
    if x == y:
        return _sign(math.copysign(1.0, x) - math.copysign(1.0, y))
    return -1 if x < y else 1


def _double_to_integral(x: float, lo: int, hi: int) -> int:
    if math.isnan(x):
        return 0
    if x >= hi:
        return hi
    if x <= lo:
        return lo
    return int(x)


METHODS[("Double", "plus")] = lambda ctx, r, a: r + a[0]
METHODS[("Double", "minus")] = lambda ctx, r, a: r - a[0]
METHODS[("Double", "times")] = lambda ctx, r, a: r * a[0]
METHODS[("Double", "div")] = lambda ctx, r, a: _double_div(r, a[0])
METHODS[("Double", "rem")] = lambda ctx, r, a: _double_rem(r, a[0])
METHODS[("Double", "compareTo")] = lambda ctx, r, a: _double_compare(r, a[0])
METHODS[("Double", "toInt")] = lambda ctx, r, a: _double_to_integral(r, INT_MIN, INT_MAX)
METHODS[("Double", "toLong")] = lambda ctx, r, a: _double_to_integral(r, LONG_MIN, LONG_MAX)

METHODS[("Boolean", "not")] = lambda ctx, r, a: not r


@method("String", "compareTo")
def _string_compare(ctx, r, a):
    other = a[0]
    for x, y in zip(r, other):
        if x != y:
            return ord(x) - ord(y)
    return len(r) - len(other)


METHODS[("String", "plus")] = lambda ctx, r, a: r + a[0]
METHODS[("String", "isEmpty")] = lambda ctx, r, a: len(r) == 0
METHODS[("String", "uppercase")] = lambda ctx, r, a: r.upper()
METHODS[("String", "lowercase")] = lambda ctx, r, a: r.lower()
METHODS[("String", "reversed")] = lambda ctx, r, a: r[::-1]
PROPERTIES[("String", "length")] = len

METHODS[("Any", "toString")] = lambda ctx, r, a: show(r)


def _check_index(items: List[Any], i: int):
    if not 0 <= i < len(items):
        raise TLRuntimeError("IndexOutOfBounds", f"index {i}, size {len(items)}")


def _non_empty(items: List[Any]):
    if not items:
        raise TLRuntimeError("NoSuchElement", "list is empty")


@method("ArrayList", "get")
def _list_get(ctx, r, a):
    _check_index(r.items, a[0])
    return r.items[a[0]]


@method("ArrayList", "set")
def _list_set(ctx, r, a):
    _check_index(r.items, a[0])
    old = r.items[a[0]]
    r.items[a[0]] = a[1]
    return old


@method("ArrayList", "removeAt")
def _list_remove_at(ctx, r, a):
    _check_index(r.items, a[0])
    return r.items.pop(a[0])


@method("ArrayList", "first")
def _list_first(ctx, r, a):
    _non_empty(r.items)
    return r.items[0]


@method("ArrayList", "last")
def _list_last(ctx, r, a):
    _non_empty(r.items)
    return r.items[-1]


@method("ArrayList", "indexOf")
def _list_index_of(ctx, r, a):
    for i, x in enumerate(r.items):
        if tl_equals(x, a[0]):
            return i
    return -1


@method("ArrayList", "add")
def _list_add(ctx, r, a):
    r.items.append(a[0])
    return True


@method("ArrayList", "clear")
def _list_clear(ctx, r, a):
    r.items.clear()
    return UNIT_VALUE


METHODS[("ArrayList", "plus")] = lambda ctx, r, a: ListValue(r.items + a[0].items)
METHODS[("ArrayList", "isEmpty")] = lambda ctx, r, a: not r.items
METHODS[("ArrayList", "contains")] = lambda ctx, r, a: any(tl_equals(x, a[0]) for x in r.items)
METHODS[("ArrayList", "reversed")] = lambda ctx, r, a: ListValue(list(reversed(r.items)))
PROPERTIES[("ArrayList", "size")] = lambda r: len(r.items)

METHODS[("IntRange", "contains")] = lambda ctx, r, a: a[0] in r.values()
METHODS[("IntRange", "isEmpty")] = lambda ctx, r, a: len(r.values()) == 0
METHODS[("IntRange", "count")] = lambda ctx, r, a: wrap32(len(r.values()))
PROPERTIES[("IntRange", "first")] = lambda r: r.first
PROPERTIES[("IntRange", "last")] = lambda r: r.last
PROPERTIES[("IntRange", "step")] = lambda r: r.step

CONSTRUCTORS["ArrayList"] = lambda ctx, r, a: ListValue([])
CONSTRUCTORS["IntRange"] = lambda ctx, r, a: RangeValue(a[0], a[1])

for _name in ("listOf", "mutableListOf", "arrayListOf"):
    FUNCTIONS[_name] = lambda ctx, r, a: ListValue(list(a[0].items))


@function("println")
def _println(ctx, r, a):
    ctx.output.append(show(a[0]))
    return UNIT_VALUE


FUNCTIONS["maxOf"] = lambda ctx, r, a: max(a[0], a[1])
FUNCTIONS["minOf"] = lambda ctx, r, a: min(a[0], a[1])
FUNCTIONS["abs"] = lambda ctx, r, a: wrap32(abs(a[0]))
FUNCTIONS["sqrt"] = lambda ctx, r, a: math.sqrt(a[0]) if a[0] >= 0 else math.nan


def native_property(v: Any, name: str) -> Any:
    getter = PROPERTIES.get((runtime_class(v), name))
    if getter is None:
        raise TLRuntimeError("NoSuchProperty", f"{runtime_class(v)}.{name}")
    return getter(v)


# -- program layout ---------------------------------------------------------


class ProgramLayout:
    """Per-program lookups shared by both backends: field layouts, virtual
    dispatch and the instrumentation plan."""

    def __init__(self, tree: SyntaxTree, result: CheckResult):
        self.tree = tree
        self.result = result
        self.index: ProgramIndex = result.index
        self.block_ids = block_ids(tree)
        self._fields: Dict[str, Tuple[str, ...]] = {}
        self._methods: Dict[Tuple[str, str, int], Optional[FunInfo]] = {}
        self._snapshot_vars: Dict[int, Tuple[VarInfo, ...]] = {}

    def field_layout(self, cls: str) -> Tuple[str, ...]:
        """Field names of instances of `cls`: superclass fields first."""
        cached = self._fields.get(cls)
        if cached is not None:
            return cached
        chain: List[ClassInfo] = []
        info = self.index.classes.get(cls)
        while info is not None:
            chain.append(info)
            info = self.index.classes.get(info.superclass.name) if info.superclass is not None else None
        names: List[str] = []
        for info in reversed(chain):
            for name, prop in info.props.items():
                if name not in names and not prop.node.has("external"):
                    names.append(name)
        self._fields[cls] = tuple(names)
        return self._fields[cls]

    def new_object(self, cls: str) -> Obj:
        return Obj(cls, {name: UNINIT for name in self.field_layout(cls)})

    def resolve_method(self, cls: str, name: str, arity: int) -> Optional[FunInfo]:
        """Most-derived implementation (body or external) of name/arity for class `cls`."""
        key = (cls, name, arity)
        if key in self._methods:
            return self._methods[key]
        found = None
        info = self.index.classes.get(cls)
        if info is not None:
            for t in self.index.supertypes(info.self_type):
                cinfo = self.index.class_of(t)
                if cinfo is None:
                    continue
                for f in cinfo.methods.get(name, []):
                    if len(f.params) == arity and not f.is_abstract:
                        found = f
                        break
                if found is not None:
                    break
        self._methods[key] = found
        return found

    def snapshot_vars(self, node_id: int) -> Tuple[VarInfo, ...]:
        """Variables recorded when entering block `node_id` (properties excluded)."""
        cached = self._snapshot_vars.get(node_id)
        if cached is None:
            if node_id == self.tree.root.id:
                cached = ()
            else:
                scope = self.result.scopes.get(node_id)
                cached = tuple(v for v in scope.variables() if v.kind != "property") if scope else ()
            self._snapshot_vars[node_id] = cached
        return cached


def block_ids(tree: SyntaxTree) -> Dict[int, str]:
    """Pre-order numbering: B<k> at File/Block entry, J<k> after While/For/If."""
    ids: Dict[int, str] = {}
    k = 0
    for n in tree.root.walk():
        if n.kind in ("File", "Block"):
            ids[n.id] = f"B{k}"
            k += 1
        elif n.kind in ("While", "For", "If"):
            ids[n.id] = f"J{k}"
            k += 1
    return ids


class Recorder:
    """Collects trace events and enforces the event, step and wall-clock limits."""

    def __init__(self, limits: Limits):
        self.limits = limits
        self.trace: List[TraceEvent] = []
        self.steps = 0
        self.deadline = time.monotonic() + limits.timeout

    def emit(self, block: str, state: Tuple[Tuple[str, str], ...]):
        if len(self.trace) >= self.limits.max_events:
            raise ExecutionTimeout("EventLimit")
        self.trace.append(TraceEvent(block, state))

    def step(self, n: int = 1):
        self.steps += n
        if self.steps > self.limits.max_steps:
            raise ExecutionTimeout("StepLimit")
        if self.steps & 0x3FF < n and time.monotonic() > self.deadline:
            raise ExecutionTimeout("WallClock")


def state_of(variables: Tuple[VarInfo, ...], read: Callable[[VarInfo], Any]) -> Tuple[Tuple[str, str], ...]:
    return tuple((v.name, show(read(v), quoted=True)) for v in variables)


COMPARE: Dict[str, Callable[[int], bool]] = {
    "<": lambda c: c < 0, ">": lambda c: c > 0, "<=": lambda c: c <= 0, ">=": lambda c: c >= 0,
}


def iterate(value: Any):
    """Elements a `for` loop visits: lazily for ranges, a snapshot for lists."""
    if isinstance(value, RangeValue):
        return value.values()
    if isinstance(value, ListValue):
        return list(value.items)
    raise TLRuntimeError("NotIterable", type(value).__name__)


# -- crash signatures --------------------------------------------------------


def crash_frame(exc: BaseException) -> str:
    """Where a crash happened.

    An injected fault names its own site; anything else is located by the
    `module:function` of the innermost tcefuzz frame of its traceback.
    """
    site = getattr(exc, "site", None)
    if site:
        return site
    for fr in reversed(traceback.extract_tb(exc.__traceback__)):
        path = Path(fr.filename)
        if "tcefuzz" in path.parts:
            return f"{path.stem}:{fr.name}"
    return "?"


def crash_signature(phase: str, kind: str, exc: BaseException) -> str:
    key = "|".join((phase, kind, crash_frame(exc)))
    return hashlib.blake2b(key.encode("utf-8"), digest_size=8).hexdigest()
