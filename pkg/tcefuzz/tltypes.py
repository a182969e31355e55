"""Semantic types of TL and the signatures of callables."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

from .syntax import mk

PRIMITIVE_NAMES = ("Int", "Long", "Double", "Boolean", "String", "Unit")


class Type:
    """Base class of TL types. Instances are immutable and hashable."""

    def free_params(self) -> Tuple["TypeParamRef", ...]:
        return ()


@dataclass(frozen=True)
class Primitive(Type):
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class ClassType(Type):
    name: str
    args: Tuple[Type, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}<{', '.join(str(a) for a in self.args)}>"

    def free_params(self):
        out = []
        for a in self.args:
            out.extend(a.free_params())
        return tuple(out)


@dataclass(frozen=True)
class TypeParamRef(Type):
    """Reference to a type parameter; `owner` names the declaring class or
    callable (e.g. "Box" or "Box.map")."""

    owner: str
    name: str

    def __str__(self) -> str:
        return self.name

    def free_params(self):
        return (self,)


@dataclass(frozen=True)
class FunctionType(Type):
    params: Tuple[Type, ...]
    ret: Type

    def __str__(self) -> str:
        return f"({', '.join(str(p) for p in self.params)}) -> {self.ret}"

    def free_params(self):
        out = []
        for p in self.params + (self.ret,):
            out.extend(p.free_params())
        return tuple(out)


@dataclass(frozen=True)
class ErrorType(Type):
    """Type of an expression that failed to check; compatible with anything."""

    def __str__(self) -> str:
        return "<error>"


INT = Primitive("Int")
LONG = Primitive("Long")
DOUBLE = Primitive("Double")
BOOLEAN = Primitive("Boolean")
STRING = Primitive("String")
UNIT = Primitive("Unit")
ANY = ClassType("Any")
ERROR = ErrorType()
INT_RANGE = ClassType("IntRange")

PRIMITIVES = {p.name: p for p in (INT, LONG, DOUBLE, BOOLEAN, STRING, UNIT)}
NUMERIC = (INT, LONG, DOUBLE)


@dataclass(frozen=True)
class TypeParam:
    owner: str
    name: str
    bound: Type = ANY

    @property
    def ref(self) -> TypeParamRef:
        return TypeParamRef(self.owner, self.name)


@dataclass(frozen=True)
class ParamSig:
    name: str
    ty: Type
    has_default: bool = False
    vararg: bool = False


@dataclass(frozen=True)
class Callable:
    """A constructor, function, method, accessor or operator with its signature.

    For methods and accessors `owner` is the declaring class parameterized by
    its own type parameters, or the concrete receiver type once substituted.
    """

    kind: str          # Constructor, TopLevelFunction, Method, PropertyAccessor, Operator
    name: str
    ret: Type
    owner: Optional[Type] = None
    type_params: Tuple[TypeParam, ...] = ()
    params: Tuple[ParamSig, ...] = ()
    stdlib: bool = False
    writable: bool = False
    decl_id: Optional[int] = field(default=None, compare=False)
    declaring: Optional[str] = None
    type_args: Tuple["Type", ...] = ()      # set once a generic callable is instantiated

    @property
    def qualified(self) -> str:
        if self.kind == "Constructor":
            return self.name
        if self.owner is not None:
            return f"{getattr(self.owner, 'name', self.owner)}::{self.name}"
        return self.name

    def __str__(self) -> str:
        params = ", ".join(f"{p.name}: {p.ty}" + (" = ..." if p.has_default else "") for p in self.params)
        tps = "<" + ", ".join(tp.name for tp in self.type_params) + ">" if self.type_params else ""
        if self.kind == "PropertyAccessor":
            return f"{self.qualified}: {self.ret}"
        return f"{self.qualified}{tps}({params}): {self.ret}"


def substitute(ty: Type, mapping: Mapping[TypeParamRef, Type]) -> Type:
    if not mapping:
        return ty
    if isinstance(ty, TypeParamRef):
        return mapping.get(ty, ty)
    if isinstance(ty, ClassType):
        if not ty.args:
            return ty
        return ClassType(ty.name, tuple(substitute(a, mapping) for a in ty.args))
    if isinstance(ty, FunctionType):
        return FunctionType(tuple(substitute(p, mapping) for p in ty.params), substitute(ty.ret, mapping))
    return ty


def substitute_callable(c: Callable, mapping: Mapping[TypeParamRef, Type], owner: Optional[Type] = None) -> Callable:
    params = tuple(ParamSig(p.name, substitute(p.ty, mapping), p.has_default, p.vararg) for p in c.params)
    tps = tuple(TypeParam(tp.owner, tp.name, substitute(tp.bound, mapping)) for tp in c.type_params)
    return Callable(
        kind=c.kind, name=c.name, ret=substitute(c.ret, mapping),
        owner=owner if owner is not None else (substitute(c.owner, mapping) if c.owner is not None else None),
        type_params=tps, params=params, stdlib=c.stdlib, writable=c.writable,
        decl_id=c.decl_id, declaring=c.declaring, type_args=c.type_args,
    )


def type_depth(ty: Type) -> int:
    if isinstance(ty, ClassType) and ty.args:
        return 1 + max(type_depth(a) for a in ty.args)
    if isinstance(ty, FunctionType):
        return 1 + max([type_depth(p) for p in ty.params + (ty.ret,)])
    return 0


def mentions(ty: Type, name: str) -> int:
    """How many times class `name` occurs inside `ty`."""
    if isinstance(ty, ClassType):
        return (ty.name == name) + sum(mentions(a, name) for a in ty.args)
    if isinstance(ty, FunctionType):
        return sum(mentions(p, name) for p in ty.params + (ty.ret,))
    return 0


def is_ground(ty: Type) -> bool:
    return not ty.free_params()


def type_to_node(ty: Type):
    """Build a detached TypeRef node spelling `ty`."""
    if isinstance(ty, FunctionType):
        return mk("TypeRef", "->", [type_to_node(p) for p in ty.params] + [type_to_node(ty.ret)])
    if isinstance(ty, ClassType):
        return mk("TypeRef", ty.name, [type_to_node(a) for a in ty.args])
    if isinstance(ty, (Primitive, TypeParamRef)):
        return mk("TypeRef", ty.name)
    raise ValueError(f"cannot spell type {ty}")


def mapping_for(params: Tuple[TypeParam, ...], args: Tuple[Type, ...]) -> Dict[TypeParamRef, Type]:
    return {tp.ref: a for tp, a in zip(params, args)}


@dataclass
class TypedExpr:
    """A self-contained expression subtree together with its type."""

    expr: object        # syntax.Node
    ty: Type
    depth: int = 0
    provenance: str = ""

    def __repr__(self) -> str:
        return f"TypedExpr({self.provenance or self.expr.kind} -> {self.ty})"
