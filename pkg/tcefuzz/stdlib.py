"""
The bundled TL standard library as data.

stdlib.tl is parsed once per path into a StdlibRegistry: the declaration
tree, a ProgramIndex over it and the callables it exposes. Every later stage
builds its per-program index on top of the registry's index, so the stdlib is
resolved only once.

Environment variables:
    TCEFUZZ_STDLIB  - path of an alternative stdlib.tl (default: bundled file)
"""

import logging
import os
import random
import string
from dataclasses import replace
from functools import lru_cache
from pathlib import Path
from typing import Callable as Fn, Dict, List, Optional, Set, Tuple

from .errors import NoCandidate
from .index import ClassInfo, ProgramIndex
from .parser import parse
from .syntax import mk
from .tltypes import (
    BOOLEAN, DOUBLE, INT, LONG, STRING, UNIT, Callable, ClassType, FunctionType, Primitive,
    Type, TypedExpr, TypeParam, TypeParamRef, is_ground, substitute, substitute_callable,
)

logger = logging.getLogger(__name__)

BUNDLED_STDLIB = Path(__file__).with_name("stdlib.tl")

# stdlib node ids never collide with ids of user trees
STDLIB_FIRST_ID = 1_000_000_000

INT_BOUNDARY = (-1, 0, 1, -(2 ** 31), 2 ** 31 - 1)
LONG_BOUNDARY = (-1, 0, 1, -(2 ** 63), 2 ** 63 - 1)
DOUBLE_BOUNDARY = (-1.0, 0.0, 1.0, 0.5, 1000000.0)
STRING_ALPHABET = string.ascii_letters + string.digits + " _-+*/.,:;!?'\"\\"

_default_path: Optional[Path] = None


class StdlibRegistry:
    """Immutable view of one parsed stdlib.tl."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.source = self.path.read_text(encoding="utf-8")
        self.tree = parse(self.source, first_id=STDLIB_FIRST_ID)
        self.index = ProgramIndex(None, stdlib=self.tree)
        for nid, msg in self.index.problems:
            logger.error("stdlib %s: node %d: %s", self.path, nid, msg)
        # derived results (checked stdlib bodies, compiled code) keyed by consumer
        self.cache: Dict[object, object] = {}
        self._callables: Optional[Tuple[Callable, ...]] = None
        self._check_implemented_interfaces()

    def _check_implemented_interfaces(self):
        concrete = [info for info in self.index.classes.values() if not info.is_abstract]
        for info in self.index.classes.values():
            if not info.is_abstract:
                continue
            if not any(self.index.find_supertype(c.self_type, info.name) for c in concrete):
                logger.warning("stdlib %s: '%s' has no concrete implementation", self.path, info.name)

    def callables(self) -> List[Callable]:
        if self._callables is None:
            self._callables = tuple(self.index.stdlib_callables())
        return list(self._callables)

    def classes(self) -> List[ClassInfo]:
        return [self.index.classes[n] for n in sorted(self.index.stdlib_names) if n in self.index.classes]

    def __repr__(self) -> str:
        return f"StdlibRegistry({self.path})"


@lru_cache(maxsize=8)
def load_stdlib(path: Optional[Path] = None) -> StdlibRegistry:
    """Parse (once) and return the registry for `path`, the bundled stdlib by default."""
    path = Path(path) if path is not None else BUNDLED_STDLIB
    logger.debug("loading stdlib from %s", path)
    return StdlibRegistry(path)


def set_default_path(path: Optional[Path]):
    """Make `path` the stdlib used wherever no registry is passed explicitly."""
    global _default_path
    _default_path = Path(path) if path is not None else None


def default_registry() -> StdlibRegistry:
    path = _default_path or os.environ.get("TCEFUZZ_STDLIB") or BUNDLED_STDLIB
    return load_stdlib(Path(path))


# -- implementations -------------------------------------------------------


def _match(pattern: Type, actual: Type, owners: Set[str], mapping: Dict[TypeParamRef, Type]) -> bool:
    """Unify `pattern` (mentioning type parameters declared by `owners`) with a ground type."""
    if isinstance(pattern, TypeParamRef) and pattern.owner in owners:
        bound = mapping.get(pattern)
        if bound is None:
            mapping[pattern] = actual
            return True
        return bound == actual
    if isinstance(pattern, ClassType) and isinstance(actual, ClassType):
        if pattern.name != actual.name or len(pattern.args) != len(actual.args):
            return False
        return all(_match(p, a, owners, mapping) for p, a in zip(pattern.args, actual.args))
    if isinstance(pattern, FunctionType) and isinstance(actual, FunctionType):
        if len(pattern.params) != len(actual.params):
            return False
        pairs = list(zip(pattern.params, actual.params)) + [(pattern.ret, actual.ret)]
        return all(_match(p, a, owners, mapping) for p, a in pairs)
    return pattern == actual


def _bound_filler(index: ProgramIndex) -> Fn[[TypeParam, Dict], Optional[Type]]:
    def fill(tp: TypeParam, mapping: Dict) -> Optional[Type]:
        bound = substitute(tp.bound, mapping)
        if is_ground(bound) and index.well_formed(bound):
            return bound
        return None
    return fill


def adapt_arguments(index: ProgramIndex, impl: ClassInfo, abstract_type: ClassType,
                    fill: Optional[Fn[[TypeParam, Dict], Optional[Type]]] = None) -> Optional[Tuple[Type, ...]]:
    """Type arguments for `impl` making it a subtype of `abstract_type`.

    Parameters of `impl` that the abstract type does not determine are chosen
    by `fill(param, mapping)`; the default picks the parameter's bound.
    Returns None when no such arguments exist.
    """
    sup = index.find_supertype(impl.self_type, abstract_type.name)
    if sup is None:
        return None
    mapping: Dict[TypeParamRef, Type] = {}
    if not _match(sup, abstract_type, {impl.name}, mapping):
        return None
    fill = fill or _bound_filler(index)
    for tp in impl.type_params:
        if tp.ref not in mapping:
            chosen = fill(tp, mapping)
            if chosen is None:
                return None
            mapping[tp.ref] = chosen
    args = tuple(mapping[tp.ref] for tp in impl.type_params)
    for tp, arg in zip(impl.type_params, args):
        if not index.is_subtype(arg, substitute(tp.bound, mapping)):
            return None
    if not index.is_subtype(ClassType(impl.name, args), abstract_type):
        return None
    return args


def find_implementations(abstract_type: ClassType, index: ProgramIndex,
                         fill: Optional[Fn[[TypeParam, Dict], Optional[Type]]] = None) -> List[ClassType]:
    """Concrete types implementing `abstract_type`: user classes first, then stdlib ones.

    Args:
        abstract_type: a parameterization of an interface or abstract class
        index: program index (user declarations on top of the stdlib)
        fill: chooses arguments for implementation parameters left open

    Returns:
        Concrete class types, possibly empty.
    """
    found = [info for info in index.implementations(abstract_type.name)
             if not isinstance(info.self_type, Primitive)]
    found.sort(key=lambda info: (info.stdlib, info.node.id if not info.stdlib else 0, info.name))
    out = []
    for info in found:
        args = adapt_arguments(index, info, abstract_type, fill)
        if args is not None:
            out.append(ClassType(info.name, args))
    return out


# -- callables by return type ------------------------------------------------


def type_cost(ty: Type) -> Optional[int]:
    """Nesting levels needed to build a value of `ty` (None when unbuildable)."""
    if isinstance(ty, Primitive):
        return None if ty == UNIT else 0
    if isinstance(ty, ClassType):
        return 1
    return None


def _instantiate(c: Callable, index: ProgramIndex, target: Type) -> Optional[Callable]:
    """Bind `c`'s type parameters (and its owner's) so that it returns a subtype of target."""
    owner_info = index.classes.get(c.declaring) if c.declaring else None
    free = list(c.type_params)
    if owner_info is not None:
        free.extend(owner_info.type_params)
    owners = {tp.owner for tp in free}
    pattern: Optional[Type] = c.ret
    if isinstance(target, ClassType) and not isinstance(c.ret, TypeParamRef):
        pattern = index.find_supertype(c.ret, target.name)
    mapping: Dict[TypeParamRef, Type] = {}
    if pattern is None or not _match(pattern, target, owners, mapping):
        return None
    for tp in free:
        if tp.ref not in mapping:
            bound = substitute(tp.bound, mapping)
            mapping[tp.ref] = INT if index.is_subtype(INT, bound) else bound
        if not is_ground(mapping[tp.ref]) or not index.is_subtype(mapping[tp.ref], substitute(tp.bound, mapping)):
            return None
    if c.kind == "Constructor":
        ty = substitute(owner_info.self_type, mapping)
        inst = substitute_callable(c, mapping, ty)
        inst = replace(inst, ret=ty, type_params=(),
                       type_args=tuple(mapping[tp.ref] for tp in owner_info.type_params))
    else:
        owner = substitute(owner_info.self_type, mapping) if owner_info is not None else None
        inst = substitute_callable(c, mapping, owner)
        if c.type_params:
            inst = replace(inst, type_args=tuple(mapping[tp.ref] for tp in c.type_params))
    if not index.is_subtype(inst.ret, target):
        return None
    return inst


def callable_cost(c: Callable) -> Optional[int]:
    costs = [0]
    if c.kind not in ("Constructor", "TopLevelFunction") and c.owner is not None:
        costs.append(type_cost(c.owner))
    for p in c.params:
        if not p.vararg:
            costs.append(type_cost(p.ty))
    if any(x is None for x in costs):
        return None
    return 1 + max(costs)


def stdlib_callables_returning(target: Type, depth_budget: int,
                               registry: Optional[StdlibRegistry] = None,
                               index: Optional[ProgramIndex] = None) -> List[Callable]:
    """Instantiated stdlib callables whose return type is a subtype of `target`.

    A callable is kept when its receiver and arguments can be built within
    `depth_budget` nesting levels (a literal costs 0, any call costs 1 plus
    its own arguments).
    """
    registry = registry or default_registry()
    index = index or registry.index
    if not isinstance(target, (Primitive, ClassType)):
        return []
    key = ("returning", target, depth_budget)
    cached = registry.cache.get(key) if index is registry.index else None
    if cached is not None:
        return list(cached)
    out = []
    for c in registry.callables():
        inst = _instantiate(c, index, target)
        # a `T` result may instantiate to Unit
        if inst is None or inst.ret == UNIT:
            continue
        cost = callable_cost(inst)
        if cost is not None and cost <= depth_budget:
            out.append(inst)
    if index is registry.index:
        registry.cache[key] = tuple(out)
    return out


# -- literals ----------------------------------------------------------------


def random_primitive_value(target: Type, rng: random.Random) -> TypedExpr:
    """A literal of exactly `target`: 25% boundary values, 75% uniform small values.

    Raises:
        NoCandidate: for Unit and non-primitive targets.
    """
    boundary = rng.random() < 0.25
    if target == INT:
        v = rng.choice(INT_BOUNDARY) if boundary else rng.randint(-1000, 1000)
        node = mk("IntLit", str(v))
    elif target == LONG:
        v = rng.choice(LONG_BOUNDARY) if boundary else rng.randint(-1000, 1000)
        node = mk("LongLit", str(v))
    elif target == DOUBLE:
        v = rng.choice(DOUBLE_BOUNDARY) if boundary else rng.uniform(-1000, 1000)
        node = mk("DoubleLit", f"{v:.2f}")
    elif target == BOOLEAN:
        node = mk("BoolLit", "true" if rng.random() < 0.5 else "false")
    elif target == STRING:
        size = rng.choice((0, 1)) if boundary else rng.randint(0, 16)
        node = mk("StringLit", "".join(rng.choice(STRING_ALPHABET) for _ in range(size)))
    else:
        raise NoCandidate(f"no literal of type {target}")
    return TypedExpr(node, target, 0, "literal")
