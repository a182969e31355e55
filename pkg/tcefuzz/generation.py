"""
Generation phase: build a pool of typed expressions from a seed's callables.

Every class of the seed is instantiated (through an implementation when it
is abstract), every instance member and top-level function is called with
generated arguments, and the results are kept with their types.

Usage:
    pool = generation_phase(seed_tree, GenConfig(), random.Random(1))
    for e in pool.lookup(INT, index):
        print(print_node(e.expr), e.ty)

    pool.to_jsonl(Path("pool.jsonl"))
"""

import json
import logging
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

from .checker import Scope, VarRef, check_program
from .errors import BoundUnsatisfiable, ConfigError, DepthExhausted, NoCandidate, Untypeable
from .index import ClassInfo, ProgramIndex
from .parser import parse_expression, parse_type
from .printer import print_node
from .stdlib import (
    StdlibRegistry, adapt_arguments, default_registry, random_primitive_value,
    stdlib_callables_returning,
)
from .syntax import Node, SyntaxTree, clone, mk
from .tltypes import (
    ANY, BOOLEAN, DOUBLE, INT, LONG, STRING, UNIT, Callable, ClassType, FunctionType,
    ParamSig, Primitive, Type, TypeParam, TypeParamRef, TypedExpr, is_ground, mapping_for,
    substitute, substitute_callable, type_to_node,
)

logger = logging.getLogger(__name__)

STRATEGIES = ("variable", "pool", "literal", "stdlib")
DEFAULT_WEIGHTS = {"variable": 0.35, "pool": 0.25, "literal": 0.25, "stdlib": 0.15}
LEAF_STRATEGIES = ("variable", "pool", "literal")

VALUE_PRIMITIVES = (INT, LONG, DOUBLE, BOOLEAN, STRING)

# member name -> (node kind, operator text) for operator-syntax calls
OPERATOR_SYNTAX = {
    "plus": ("BinaryOp", "+"), "minus": ("BinaryOp", "-"), "times": ("BinaryOp", "*"),
    "div": ("BinaryOp", "/"), "rem": ("BinaryOp", "%"),
    "rangeTo": ("RangeExpr", ".."), "until": ("RangeExpr", "until"), "downTo": ("RangeExpr", "downTo"),
    "get": ("Index", ""),
}
INFIX_NAMES = ("until", "downTo")

RENAMABLE = ("Call", "NameRef", "MemberAccess", "FunRef", "ConstructorCall", "TypeRef")


@dataclass
class GenConfig:
    nest_decay: float = 0.5
    max_type_depth: int = 3
    max_call_depth: int = 3
    weights: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    named_arg_rate: float = 0.1
    operator_syntax_rate: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.nest_decay < 1.0:
            raise ConfigError(f"nest_decay must be in (0, 1), got {self.nest_decay}")
        if self.max_type_depth < 0 or self.max_call_depth < 0:
            raise ConfigError("generation depths must be non-negative")
        unknown = set(self.weights) - set(STRATEGIES)
        if unknown:
            raise ConfigError(f"unknown generation strategies: {', '.join(sorted(unknown))}")
        if any(w < 0 for w in self.weights.values()) or not any(self.weights.values()):
            raise ConfigError("strategy weights must be non-negative and not all zero")
        for name in ("named_arg_rate", "operator_syntax_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")


# -- pool -------------------------------------------------------------------


def rename_type(ty: Type, names: Mapping[str, str]) -> Type:
    if isinstance(ty, ClassType):
        return ClassType(names.get(ty.name, ty.name), tuple(rename_type(a, names) for a in ty.args))
    if isinstance(ty, FunctionType):
        return FunctionType(tuple(rename_type(p, names) for p in ty.params), rename_type(ty.ret, names))
    return ty


class ExprPool:
    """Typed expressions grouped by type, in insertion order, without duplicates."""

    def __init__(self, entries: Sequence[TypedExpr] = ()):
        self.by_type: Dict[Type, List[TypedExpr]] = {}
        self._seen = set()
        for e in entries:
            self.add(e)

    def add(self, e: TypedExpr) -> bool:
        key = (print_node(e.expr), e.ty)
        if key in self._seen:
            return False
        self._seen.add(key)
        self.by_type.setdefault(e.ty, []).append(e)
        return True

    def __len__(self) -> int:
        return len(self._seen)

    def __iter__(self) -> Iterator[TypedExpr]:
        for entries in self.by_type.values():
            yield from entries

    def types(self) -> List[Type]:
        return list(self.by_type)

    def lookup(self, target: Type, index: ProgramIndex) -> List[TypedExpr]:
        """Entries whose type is a subtype of `target`."""
        out = []
        for ty, entries in self.by_type.items():
            if ty != UNIT and index.is_subtype(ty, target):
                out.extend(entries)
        return out

    def merge(self, other: "ExprPool") -> "ExprPool":
        for e in other:
            self.add(e)
        return self

    def renamed(self, names: Mapping[str, str], keep: Sequence[str] = ()) -> "ExprPool":
        """Copy with declarations renamed as anonymize_with_map() renamed them.

        Names in `keep` (stdlib names) are left alone.
        """
        keep = set(keep)
        out = ExprPool()
        for e in self:
            expr = clone(e.expr)
            for n in expr.walk():
                if n.kind in RENAMABLE and n.text in names and n.text not in keep:
                    n.text = names[n.text]
            out.add(TypedExpr(expr, rename_type(e.ty, names), e.depth, e.provenance))
        return out

    def records(self) -> List[Dict[str, object]]:
        return [{"expr_text": print_node(e.expr), "type_text": str(e.ty),
                 "provenance": e.provenance, "depth": e.depth} for e in self]

    def to_jsonl(self, path: Path) -> int:
        records = self.records()
        with open(path, "w", encoding="utf-8") as f:
            for r in records:
                f.write(json.dumps(r) + "\n")
        return len(records)

    @classmethod
    def from_jsonl(cls, path: Path, index: Optional[ProgramIndex] = None) -> "ExprPool":
        """Load a pool written by to_jsonl(); types resolve against `index`."""
        index = index or default_registry().index
        pool = cls()
        with open(path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                r = json.loads(line)
                ty = index.resolve_type(parse_type(r["type_text"]), {}, report=False)
                pool.add(TypedExpr(parse_expression(r["expr_text"]), ty, int(r.get("depth", 0)),
                                   r.get("provenance", "")))
        return pool


# -- generator ----------------------------------------------------------------


class Generator:
    """Builds expressions of requested types against one program index.

    `scope` holds the variables visible where the expressions will be
    spliced; it is None (no variables) during the generation phase.
    """

    def __init__(self, index: ProgramIndex, cfg: Optional[GenConfig] = None,
                 rng: Optional[random.Random] = None, registry: Optional[StdlibRegistry] = None,
                 pool: Optional[ExprPool] = None, scope: Optional[Scope] = None):
        self.index = index
        self.cfg = cfg or GenConfig()
        self.rng = rng or random.Random()
        self.registry = registry or default_registry()
        self.pool = pool if pool is not None else ExprPool()
        self.scope = scope
        self._returning: Dict[Tuple[Type, int], List[Callable]] = {}

    # -- types --------------------------------------------------------------

    def gen_type_params(self, decl, path: Tuple[str, ...] = ()) -> Tuple[Type, ...]:
        """Type arguments for a class, function or generic callable.

        Raises:
            BoundUnsatisfiable: if no known type meets some bound.
        """
        name = getattr(decl, "name", "")
        return self._type_args(decl.type_params, 0, path + (name,))

    def _type_args(self, params: Sequence[TypeParam], level: int, path: Tuple[str, ...]) -> Tuple[Type, ...]:
        mapping: Dict[TypeParamRef, Type] = {}
        for tp in params:
            mapping[tp.ref] = self._pick_type(tp, mapping, level, path)
        return tuple(mapping[tp.ref] for tp in params)

    def _pick_type(self, tp: TypeParam, mapping: Dict, level: int, path: Tuple[str, ...]) -> Type:
        can_nest = level < self.cfg.max_type_depth
        nest_first = can_nest and self.rng.random() < self.cfg.nest_decay ** (level + 1)
        if nest_first:
            t = self._nested_type(tp, mapping, level, path)
            if t is not None:
                return t
        plain = [t for t in self._plain_types() if self._satisfies(t, tp, mapping)]
        if plain:
            return self.rng.choice(plain)
        if can_nest and not nest_first:
            t = self._nested_type(tp, mapping, level, path)
            if t is not None:
                return t
        raise BoundUnsatisfiable(f"no type satisfies {tp.name}: {tp.bound}")

    def _nested_type(self, tp: TypeParam, mapping: Dict, level: int, path: Tuple[str, ...]) -> Optional[Type]:
        generic = [info for info in self.index.classes.values()
                   if info.type_params and info.name not in path]
        self.rng.shuffle(generic)
        for info in generic:
            try:
                args = self._type_args(info.type_params, level + 1, path + (info.name,))
            except BoundUnsatisfiable:
                continue
            t = ClassType(info.name, args)
            if self._satisfies(t, tp, mapping):
                return t
        return None

    def _plain_types(self) -> List[Type]:
        out: List[Type] = list(VALUE_PRIMITIVES)
        for info in self.index.classes.values():
            if info.type_params or isinstance(info.self_type, Primitive) or info.name == "Any":
                continue
            out.append(info.self_type)
        return out

    def _satisfies(self, t: Type, tp: TypeParam, mapping: Dict) -> bool:
        bound = substitute(tp.bound, {**mapping, tp.ref: t})
        return is_ground(bound) and self.index.well_formed(t) and self.index.is_subtype(t, bound)

    def adapt_type_params(self, impl: ClassInfo, abstract_cls: ClassType) -> Optional[Tuple[Type, ...]]:
        """Arguments for `impl` making it a subtype of `abstract_cls`, or None."""
        def fill(tp: TypeParam, mapping: Dict) -> Optional[Type]:
            try:
                return self._pick_type(tp, mapping, 1, (impl.name,))
            except BoundUnsatisfiable:
                return None
        return adapt_arguments(self.index, impl, abstract_cls, fill)

    # -- instances ----------------------------------------------------------

    def gen_class_instance(self, info: ClassInfo, depth: int = 0) -> Optional[TypedExpr]:
        """An instance of class/interface `info`, None when none can be built."""
        try:
            args = self.gen_type_params(info)
            ty = ClassType(info.name, args)
            return self.gen_instance(ty, depth)
        except (BoundUnsatisfiable, DepthExhausted, NoCandidate) as e:
            logger.debug("no instance of %s: %s", info.name, e)
            return None

    def gen_instance(self, ty: ClassType, depth: int = 0) -> TypedExpr:
        info = self.index.class_of(ty)
        if info is None:
            raise NoCandidate(f"unknown class {ty}")
        if info.constructible:
            return self.gen_constructor_call(self.index.ctor_callable(info, ty.args), depth)
        impls = [i for i in self.index.implementations(ty.name) if not isinstance(i.self_type, Primitive)]
        self.rng.shuffle(impls)
        for impl in impls:
            args = self.adapt_type_params(impl, ty)
            if args is None:
                continue
            te = self.gen_instance(ClassType(impl.name, args), depth)
            return TypedExpr(te.expr, ty, te.depth, te.provenance)
        raise NoCandidate(f"no implementation of {ty}")

    def gen_constructor_call(self, ctor: Callable, depth: int = 0) -> TypedExpr:
        if depth >= self.cfg.max_call_depth:
            raise DepthExhausted(f"no depth left to construct {ctor.ret}")
        args, deepest = self._arguments(ctor.params, depth + 1)
        type_refs = [type_to_node(a) for a in getattr(ctor.ret, "args", ())]
        node = mk("ConstructorCall", ctor.name, type_refs + args)
        return TypedExpr(node, ctor.ret, deepest + 1, ctor.qualified)

    # -- calls --------------------------------------------------------------

    def gen_call(self, callee: Callable, receiver: Optional[TypedExpr] = None, depth: int = 0) -> TypedExpr:
        """A full call of `callee`; the receiver is generated when not given.

        Raises:
            DepthExhausted: if an argument cannot be built within the depth budget.
        """
        if callee.kind == "Constructor":
            return self.gen_constructor_call(callee, depth)
        if depth >= self.cfg.max_call_depth:
            raise DepthExhausted(f"no depth left to call {callee.qualified}")
        if callee.type_params and not callee.type_args:
            args = self._type_args(callee.type_params, 0, (callee.name,))
            callee = replace(substitute_callable(callee, mapping_for(callee.type_params, args)),
                             type_params=(), type_args=args)
        deepest = 0
        recv = None
        if callee.kind != "TopLevelFunction" and callee.owner is not None:
            if receiver is None:
                receiver = self.gen_value_of_type(callee.owner, depth + 1)
            recv = clone(receiver.expr)
            deepest = receiver.depth
        if callee.kind == "PropertyAccessor":
            return TypedExpr(mk("MemberAccess", callee.name, [recv]), callee.ret, deepest + 1, callee.qualified)

        args, arg_depth = self._arguments(callee.params, depth + 1)
        deepest = max(deepest, arg_depth)
        node = None
        if recv is not None and self._operator_syntax(callee, args):
            kind, op = OPERATOR_SYNTAX[callee.name]
            node = mk(kind, op, [recv, args[0]])
        if node is None:
            children = ([recv] if recv is not None else []) + [type_to_node(t) for t in callee.type_args] + args
            node = mk("Call", callee.name, children, flags=("recv",) if recv is not None else ())
        return TypedExpr(node, callee.ret, deepest + 1, callee.qualified)

    def _operator_syntax(self, callee: Callable, args: List[Node]) -> bool:
        if callee.name not in OPERATOR_SYNTAX or callee.type_args:
            return False
        if callee.kind != "Operator" and not (callee.stdlib and callee.name in INFIX_NAMES):
            return False
        if len(args) != 1 or args[0].kind == "NamedArg" or callee.params[0].vararg:
            return False
        return self.rng.random() < self.cfg.operator_syntax_rate

    def _arguments(self, params: Sequence[ParamSig], depth: int) -> Tuple[List[Node], int]:
        """Argument nodes for `params`; defaulted parameters are sometimes left out."""
        named = (len(params) >= 2 and not any(p.vararg for p in params)
                 and self.rng.random() < self.cfg.named_arg_rate)
        omit = set()
        if named:
            omit = {i for i, p in enumerate(params) if p.has_default and self.rng.random() < 0.5}
        else:
            i = len(params)
            while i > 0 and params[i - 1].has_default and self.rng.random() < 0.5:
                i -= 1
                omit.add(i)
        nodes: List[Node] = []
        deepest = 0
        for i, p in enumerate(params):
            if i in omit:
                continue
            if p.vararg:
                for _ in range(self.rng.randint(0, 3)):
                    te = self.gen_value_of_type(p.ty, depth)
                    nodes.append(te.expr)
                    deepest = max(deepest, te.depth)
                continue
            te = self.gen_value_of_type(p.ty, depth)
            deepest = max(deepest, te.depth)
            nodes.append(mk("NamedArg", p.name, [te.expr]) if named else te.expr)
        if named:
            self.rng.shuffle(nodes)
        return nodes, deepest

    # -- values -------------------------------------------------------------

    def gen_value_of_type(self, target: Type, depth: int = 0) -> TypedExpr:
        """An expression whose type is a subtype of `target`.

        Strategies are tried in an order drawn from the configured weights;
        at the depth limit only variables, pool entries and literals apply.

        Raises:
            DepthExhausted: at the depth limit with no leaf candidate.
            NoCandidate: when no strategy can produce `target`.
        """
        at_limit = depth >= self.cfg.max_call_depth
        concrete = self.rng.choice(VALUE_PRIMITIVES) if target == ANY else target
        names = [n for n in STRATEGIES if self.cfg.weights.get(n, 0) > 0]
        if at_limit:
            names = [n for n in names if n in LEAF_STRATEGIES]
        for name in self._weighted_order(names):
            te = getattr(self, f"_by_{name}")(target if name == "variable" else concrete, depth)
            if te is not None:
                return te
        if not at_limit:
            te = self._by_construction(concrete, depth)
            if te is not None:
                return te
        if at_limit:
            raise DepthExhausted(f"no leaf expression of type {target} at depth {depth}")
        raise NoCandidate(f"no expression of type {target}")

    def _weighted_order(self, names: List[str]) -> List[str]:
        names = list(names)
        out = []
        while names:
            pick = self.rng.choices(names, weights=[self.cfg.weights[n] for n in names])[0]
            names.remove(pick)
            out.append(pick)
        return out

    def _by_variable(self, target: Type, depth: int) -> Optional[TypedExpr]:
        if self.scope is None:
            return None
        found = [v for v in self.scope.variables() if self.index.is_subtype(v.ty, target)]
        if not found:
            return None
        v = self.rng.choice(found)
        return TypedExpr(mk("NameRef", v.name), v.ty, 0, "variable")

    def _by_pool(self, target: Type, depth: int) -> Optional[TypedExpr]:
        found = self.pool.lookup(target, self.index)
        if not found:
            return None
        e = self.rng.choice(found)
        return TypedExpr(clone(e.expr), e.ty, e.depth, e.provenance or "pool")

    def _by_literal(self, target: Type, depth: int) -> Optional[TypedExpr]:
        prims = [p for p in VALUE_PRIMITIVES if self.index.is_subtype(p, target)]
        if not prims:
            return None
        return random_primitive_value(target if target in prims else self.rng.choice(prims), self.rng)

    def _by_stdlib(self, target: Type, depth: int) -> Optional[TypedExpr]:
        budget = self.cfg.max_call_depth - depth
        candidates = self.stdlib_returning(target, budget)
        self.rng.shuffle(candidates)
        for callee in candidates[:3]:
            try:
                return self.gen_call(callee, depth=depth)
            except (DepthExhausted, NoCandidate, BoundUnsatisfiable) as e:
                logger.debug("stdlib %s failed: %s", callee.qualified, e)
        return None

    def _by_construction(self, target: Type, depth: int) -> Optional[TypedExpr]:
        try:
            if isinstance(target, ClassType) and target != ANY and self.index.class_of(target) is not None:
                return self.gen_instance(target, depth)
            if isinstance(target, FunctionType):
                return self._fun_ref(target)
        except (DepthExhausted, NoCandidate, BoundUnsatisfiable) as e:
            logger.debug("cannot construct %s: %s", target, e)
        return None

    def _fun_ref(self, target: FunctionType) -> Optional[TypedExpr]:
        found = []
        for name, funs in self.index.functions.items():
            if len(funs) != 1 or funs[0].stdlib or funs[0].type_params:
                continue
            f = funs[0]
            ty = FunctionType(tuple(p.ty for p in f.params), f.ret)
            if not any(p.has_default or p.vararg for p in f.params) and ty == target:
                found.append(name)
        if not found:
            return None
        return TypedExpr(mk("FunRef", self.rng.choice(found)), target, 0, "funref")

    def stdlib_returning(self, target: Type, budget: int) -> List[Callable]:
        key = (target, budget)
        if key not in self._returning:
            index = self.index if self._mentions_user(target) else self.registry.index
            self._returning[key] = stdlib_callables_returning(target, budget, self.registry, index)
        return list(self._returning[key])

    def _mentions_user(self, ty: Type) -> bool:
        if isinstance(ty, ClassType):
            return self.index.is_user_class(ty.name) or any(self._mentions_user(a) for a in ty.args)
        return False


# -- phase --------------------------------------------------------------------


def generation_phase(seed: SyntaxTree, cfg: Optional[GenConfig] = None, rng: Optional[random.Random] = None,
                     registry: Optional[StdlibRegistry] = None) -> ExprPool:
    """Derive the expression pool of a seed program.

    Args:
        seed: a typechecking program
        cfg: generation settings, defaults when None
        rng: the only source of randomness

    Returns:
        The pool; callables that cannot be called are skipped.

    Raises:
        Untypeable: when the seed does not typecheck.
    """
    result = check_program(seed, registry)
    if not result.ok:
        raise Untypeable(f"seed does not typecheck: {result.errors[0].message}")
    index = result.index
    gen = Generator(index, cfg, rng or random.Random(0), registry)
    pool = gen.pool
    skipped = 0

    for name in index.user_class_order:
        info = index.classes[name]
        inst = gen.gen_class_instance(info)
        if inst is None:
            skipped += 1
            continue
        pool.add(inst)
        for c in index.instance_callables(inst.ty):
            if c.stdlib or c.ret == UNIT:
                continue
            try:
                pool.add(gen.gen_call(c, receiver=inst))
            except (DepthExhausted, NoCandidate, BoundUnsatisfiable) as e:
                logger.debug("skipping %s: %s", c.qualified, e)
                skipped += 1

    for f in index.user_function_order:
        c = index.fun_callable(f)
        if c.ret == UNIT:
            continue
        try:
            pool.add(gen.gen_call(c))
        except (DepthExhausted, NoCandidate, BoundUnsatisfiable) as e:
            logger.debug("skipping %s: %s", c.qualified, e)
            skipped += 1

    for n in seed.root.children:
        ref = result.refs.get(n.id) if n.kind == "VarDecl" else None
        if isinstance(ref, VarRef):
            pool.add(TypedExpr(mk("NameRef", n.text), ref.var.ty, 0, "global"))

    for ty in VALUE_PRIMITIVES:
        try:
            pool.add(gen.gen_value_of_type(ty))
        except (DepthExhausted, NoCandidate) as e:
            logger.debug("no sample of %s: %s", ty, e)

    logger.info("generation phase: %d expressions over %d types, %d callables skipped",
                len(pool), len(pool.types()), skipped)
    return pool
