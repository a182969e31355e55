"""
Declaration tables for a TL program plus the ambient standard library.

ProgramIndex answers the questions every later stage asks: which classes and
functions exist, what their signatures are, how types relate (is_subtype) and
which callables a type or a whole program exposes.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Set, Tuple

from .syntax import Node, SyntaxTree, mk
from .tltypes import (
    ANY, ERROR, PRIMITIVES, Callable, ClassType, ErrorType, FunctionType, ParamSig,
    Primitive, Type, TypeParam, TypeParamRef, mapping_for, substitute, substitute_callable,
)

logger = logging.getLogger(__name__)

OPERATOR_NAMES = frozenset({
    "plus", "minus", "times", "div", "rem", "compareTo", "rangeTo", "get", "set",
})


@dataclass
class FunInfo:
    name: str
    node: Node
    owner: Optional[str]             # declaring class name, None for top-level
    type_params: Tuple[TypeParam, ...] = ()
    params: Tuple[ParamSig, ...] = ()
    param_nodes: Tuple[Node, ...] = ()
    ret: Type = PRIMITIVES["Unit"]
    stdlib: bool = False

    @property
    def key(self) -> str:
        return f"{self.owner}.{self.name}" if self.owner else self.name

    def flag(self, f: str) -> bool:
        return self.node.has(f)

    @property
    def is_abstract(self) -> bool:
        return self.node.body() is None and not self.node.has("external")

    @property
    def overridable(self) -> bool:
        return self.node.has("open") or self.node.has("abstract") or self.node.has("override") or self.is_abstract


@dataclass
class PropInfo:
    name: str
    ty: Type
    mutable: bool
    owner: str
    node: Node                      # PropertyDecl or ctor Param
    abstract: bool = False
    stdlib: bool = False


@dataclass
class ClassInfo:
    name: str
    node: Node
    is_interface: bool
    type_params: Tuple[TypeParam, ...] = ()
    superclass: Optional[ClassType] = None
    super_args_node: Optional[Node] = None
    interfaces: List[ClassType] = field(default_factory=list)
    ctor_params: Tuple[ParamSig, ...] = ()
    ctor_nodes: Tuple[Node, ...] = ()
    props: Dict[str, PropInfo] = field(default_factory=dict)
    methods: Dict[str, List[FunInfo]] = field(default_factory=dict)
    stdlib: bool = False

    @property
    def is_abstract(self) -> bool:
        return self.is_interface or self.node.has("abstract")

    @property
    def is_open(self) -> bool:
        return self.node.has("open") or self.node.has("abstract") or self.is_interface

    @property
    def constructible(self) -> bool:
        return not self.is_abstract and self.name not in PRIMITIVES and self.name != "Any"

    @property
    def self_type(self) -> Type:
        if self.name in PRIMITIVES:
            return PRIMITIVES[self.name]
        return ClassType(self.name, tuple(tp.ref for tp in self.type_params))

    def direct_supertypes(self) -> List[ClassType]:
        out = []
        if self.superclass is not None:
            out.append(self.superclass)
        out.extend(self.interfaces)
        if not out and self.name != "Any":
            out.append(ANY)
        return out

    def private(self, member: Node) -> bool:
        return member.has("private")


class ProgramIndex:
    """Class and function tables of stdlib + one user program.

    Construction never raises on malformed programs: resolution problems are
    collected in `problems` as (node id, message) pairs for the checker.
    """

    def __init__(self, user: Optional[SyntaxTree], stdlib: Optional[SyntaxTree] = None,
                 base: Optional["ProgramIndex"] = None):
        self.classes: Dict[str, ClassInfo] = {}
        self.functions: Dict[str, List[FunInfo]] = {}
        self.globals: Dict[str, Node] = {}
        self.problems: List[Tuple[int, str]] = []
        self.stdlib_names: Set[str] = set()
        self.user_class_order: List[str] = []
        self.user_function_order: List[FunInfo] = []
        self._member_cache: Dict = {}
        self._supertypes_cache: Dict[Type, Tuple[Type, ...]] = {}
        if base is not None:
            # stdlib tables are never mutated by user declarations
            self.classes.update(base.classes)
            self.functions.update({k: list(v) for k, v in base.functions.items()})
            self.stdlib_names = set(base.stdlib_names)
            self._member_cache.update(base._member_cache)
            self._supertypes_cache.update(base._supertypes_cache)
        elif stdlib is not None:
            self._register(stdlib.root, stdlib=True)
        if user is not None:
            self._register(user.root, stdlib=False)
        for info in list(self.classes.values()):
            if base is None or not info.stdlib:
                self._resolve_class(info)
        for funs in self.functions.values():
            for f in funs:
                if base is None or not f.stdlib:
                    self._resolve_fun(f, {})
        self._check_hierarchy()

    # -- registration ----------------------------------------------------

    def problem(self, node: Node, message: str):
        self.problems.append((node.id, message))

    def _register(self, root: Node, stdlib: bool):
        for item in root.children:
            if item.kind in ("ClassDecl", "InterfaceDecl"):
                if item.text in self.classes or item.text in self.functions:
                    self.problem(item, f"redeclaration of '{item.text}'")
                    continue
                info = ClassInfo(item.text, item, item.kind == "InterfaceDecl", stdlib=stdlib)
                info.type_params = tuple(
                    TypeParam(item.text, tp.text) for tp in item.kids("TypeParamDecl")
                )
                self.classes[item.text] = info
                if stdlib:
                    self.stdlib_names.add(item.text)
                else:
                    self.user_class_order.append(item.text)
            elif item.kind == "FunDecl":
                if item.text in self.classes:
                    self.problem(item, f"redeclaration of '{item.text}'")
                    continue
                if not stdlib and item.text in self.stdlib_names:
                    self.problem(item, f"'{item.text}' clashes with a standard library function")
                    continue
                info = FunInfo(item.text, item, None, stdlib=stdlib)
                info.type_params = tuple(TypeParam(item.text, tp.text) for tp in item.kids("TypeParamDecl"))
                self.functions.setdefault(item.text, []).append(info)
                if stdlib:
                    self.stdlib_names.add(item.text)
                else:
                    self.user_function_order.append(info)
            elif item.kind == "VarDecl" and not stdlib:
                if item.text in self.globals:
                    self.problem(item, f"redeclaration of global '{item.text}'")
                    continue
                self.globals[item.text] = item

    # -- type resolution -------------------------------------------------

    def resolve_type(self, ref: Optional[Node], env: Dict[str, TypeParamRef], report: bool = True) -> Type:
        if ref is None:
            return PRIMITIVES["Unit"]
        if ref.text == "->":
            parts = [self.resolve_type(c, env, report) for c in ref.children]
            return FunctionType(tuple(parts[:-1]), parts[-1])
        name = ref.text
        if name in env and not ref.children:
            return env[name]
        if name in PRIMITIVES and not ref.children:
            return PRIMITIVES[name]
        info = self.classes.get(name)
        if info is None:
            if report:
                self.problem(ref, f"unresolved type '{name}'")
            return ERROR
        args = tuple(self.resolve_type(c, env, report) for c in ref.children)
        if len(args) != len(info.type_params):
            if report:
                self.problem(ref, f"type '{name}' expects {len(info.type_params)} type argument(s), got {len(args)}")
            return ERROR
        return ClassType(name, args)

    def _tp_env(self, params: Tuple[TypeParam, ...], outer: Dict[str, TypeParamRef]) -> Dict[str, TypeParamRef]:
        env = dict(outer)
        for tp in params:
            env[tp.name] = tp.ref
        return env

    def _resolve_bounds(self, params: Tuple[TypeParam, ...], nodes: List[Node], env) -> Tuple[TypeParam, ...]:
        out = []
        for tp, node in zip(params, nodes):
            bound_ref = node.type_ref()
            bound = self.resolve_type(bound_ref, env) if bound_ref is not None else ANY
            if isinstance(bound, FunctionType):
                self.problem(node, "type parameter bound cannot be a function type")
                bound = ANY
            out.append(TypeParam(tp.owner, tp.name, bound))
        return tuple(out)

    def _params(self, nodes: List[Node], env) -> Tuple[ParamSig, ...]:
        out = []
        for p in nodes:
            ty = self.resolve_type(p.type_ref(), env)
            out.append(ParamSig(p.text, ty, p.initializer() is not None, p.has("vararg")))
        return tuple(out)

    def _resolve_class(self, info: ClassInfo):
        node = info.node
        env = self._tp_env(info.type_params, {})
        info.type_params = self._resolve_bounds(info.type_params, node.kids("TypeParamDecl"), env)
        env = self._tp_env(info.type_params, {})
        params = node.kids("Param")
        info.ctor_nodes = tuple(params)
        info.ctor_params = self._params(params, env)
        for p, sig in zip(params, info.ctor_params):
            if p.has("val") or p.has("var"):
                info.props[p.text] = PropInfo(p.text, sig.ty, p.has("var"), info.name, p, stdlib=info.stdlib)
        for sup in node.children:
            if sup.kind == "ConstructorCall" and node.kind == "ClassDecl":
                ty = self.resolve_type(_as_type_ref(sup), env)
                if info.superclass is not None:
                    self.problem(sup, "a class can have only one superclass")
                elif isinstance(ty, ClassType):
                    target = self.classes.get(ty.name)
                    if target is None or target.is_interface:
                        self.problem(sup, f"'{ty.name}' is not a class")
                    elif not target.is_open:
                        self.problem(sup, f"class '{ty.name}' is final and cannot be extended")
                    else:
                        info.superclass = ty
                        info.super_args_node = sup
            elif sup.kind == "TypeRef":
                ty = self.resolve_type(sup, env)
                if isinstance(ty, ClassType):
                    target = self.classes.get(ty.name)
                    if target is None or not target.is_interface:
                        self.problem(sup, f"'{ty.name}' is not an interface")
                    else:
                        info.interfaces.append(ty)
        for member in node.kids("PropertyDecl", "FunDecl"):
            if member.kind == "PropertyDecl":
                if member.text in info.props:
                    self.problem(member, f"redeclaration of property '{member.text}'")
                    continue
                ty_ref = member.type_ref()
                ty = self.resolve_type(ty_ref, env) if ty_ref is not None else None
                abstract = member.initializer() is None and not member.has("external")
                info.props[member.text] = PropInfo(
                    member.text, ty if ty is not None else ERROR, member.has("var"), info.name, member,
                    abstract=abstract, stdlib=info.stdlib,
                )
            else:
                f = FunInfo(member.text, member, info.name, stdlib=info.stdlib)
                f.type_params = tuple(
                    TypeParam(f"{info.name}.{member.text}", tp.text) for tp in member.kids("TypeParamDecl")
                )
                self._resolve_fun(f, env)
                same = [g for g in info.methods.get(member.text, []) if len(g.params) == len(f.params)]
                if same:
                    self.problem(member, f"conflicting overloads of '{member.text}'")
                    continue
                if member.text in info.props:
                    self.problem(member, f"'{member.text}' is already a property")
                    continue
                info.methods.setdefault(member.text, []).append(f)

    def _resolve_fun(self, f: FunInfo, outer_env):
        node = f.node
        env = self._tp_env(f.type_params, outer_env)
        f.type_params = self._resolve_bounds(f.type_params, node.kids("TypeParamDecl"), env)
        env = self._tp_env(f.type_params, outer_env)
        params = node.kids("Param")
        f.param_nodes = tuple(params)
        f.params = self._params(params, env)
        f.ret = self.resolve_type(node.type_ref(), env)
        for i, p in enumerate(params):
            if p.has("vararg") and i != len(params) - 1:
                self.problem(p, "vararg parameter must be last")

    def _check_hierarchy(self):
        for info in self.classes.values():
            seen = {info.name}
            stack = [t.name for t in info.direct_supertypes()]
            while stack:
                name = stack.pop()
                if name == info.name:
                    self.problem(info.node, f"cyclic inheritance involving '{info.name}'")
                    info.superclass = None
                    info.interfaces = []
                    break
                if name in seen:
                    continue
                seen.add(name)
                sup = self.classes.get(name)
                if sup is not None:
                    stack.extend(t.name for t in sup.direct_supertypes())

    # -- queries ---------------------------------------------------------

    def class_of(self, ty: Type) -> Optional[ClassInfo]:
        if isinstance(ty, (ClassType, Primitive)):
            return self.classes.get(ty.name)
        return None

    def type_params_of(self, owner: str) -> Tuple[TypeParam, ...]:
        if "." in owner:
            cls, fun = owner.split(".", 1)
            info = self.classes.get(cls)
            if info is not None:
                for f in info.methods.get(fun, []):
                    return f.type_params
            return ()
        if owner in self.classes:
            return self.classes[owner].type_params
        for f in self.functions.get(owner, []):
            return f.type_params
        return ()

    def bound_of(self, ref: TypeParamRef) -> Type:
        for tp in self.type_params_of(ref.owner):
            if tp.name == ref.name:
                return tp.bound
        return ANY

    def supertypes(self, ty: Type) -> Tuple[Type, ...]:
        """All supertypes of a class type (itself included), substituted."""
        cached = self._supertypes_cache.get(ty)
        if cached is not None:
            return cached
        out: List[Type] = []
        seen: Set[Type] = set()
        stack = [ty]
        while stack:
            t = stack.pop(0)
            if t in seen:
                continue
            seen.add(t)
            out.append(t)
            info = self.class_of(t)
            if info is None:
                continue
            mapping = mapping_for(info.type_params, t.args) if isinstance(t, ClassType) else {}
            for sup in info.direct_supertypes():
                stack.append(substitute(sup, mapping))
        if ANY not in seen:
            out.append(ANY)
        result = tuple(out)
        self._supertypes_cache[ty] = result
        return result

    def is_subtype(self, sub: Type, sup: Type) -> bool:
        """Nominal subtyping with invariant generics; Any is the top type."""
        if isinstance(sub, ErrorType) or isinstance(sup, ErrorType):
            return True
        if sub == sup or sup == ANY:
            return True
        if isinstance(sub, TypeParamRef):
            bound = self.bound_of(sub)
            return bound != sub and self.is_subtype(bound, sup)
        if isinstance(sub, FunctionType) or isinstance(sup, FunctionType):
            return False
        if isinstance(sup, TypeParamRef):
            return False
        return sup in self.supertypes(sub)

    def find_supertype(self, ty: Type, name: str) -> Optional[ClassType]:
        """The parameterization of class `name` among ty's supertypes."""
        if isinstance(ty, TypeParamRef):
            return self.find_supertype(self.bound_of(ty), name)
        for t in self.supertypes(ty):
            if isinstance(t, ClassType) and t.name == name:
                return t
        return None

    def element_type(self, ty: Type) -> Optional[Type]:
        it = self.find_supertype(ty, "Iterable")
        return it.args[0] if it is not None and it.args else None

    def well_formed(self, ty: Type) -> bool:
        if isinstance(ty, ClassType):
            info = self.classes.get(ty.name)
            if info is None or len(info.type_params) != len(ty.args):
                return False
            mapping = mapping_for(info.type_params, ty.args)
            for tp, arg in zip(info.type_params, ty.args):
                if not self.well_formed(arg) or not self.is_subtype(arg, substitute(tp.bound, mapping)):
                    return False
            return True
        if isinstance(ty, FunctionType):
            return all(self.well_formed(t) for t in ty.params + (ty.ret,))
        return not isinstance(ty, ErrorType)

    # -- members ---------------------------------------------------------

    def lookup_member(self, ty: Type, name: str) -> Tuple[Optional[PropInfo], List[FunInfo], Dict]:
        """Find property or methods `name` visible on `ty`, most derived first.

        Returns (property, methods, substitution mapping for the declaring class).
        """
        if isinstance(ty, TypeParamRef):
            return self.lookup_member(self.bound_of(ty), name)
        for t in self.supertypes(ty):
            info = self.class_of(t)
            if info is None:
                continue
            mapping = mapping_for(info.type_params, t.args) if isinstance(t, ClassType) else {}
            if name in info.props:
                return info.props[name], [], mapping
            if name in info.methods:
                return None, info.methods[name], mapping
        return None, [], {}

    def fun_callable(self, f: FunInfo, owner: Optional[Type] = None, mapping=None) -> Callable:
        if f.owner is None:
            kind = "TopLevelFunction"
        elif f.node.has("operator"):
            kind = "Operator"
        else:
            kind = "Method"
        c = Callable(
            kind=kind, name=f.name, ret=f.ret,
            owner=owner if owner is not None else (self.classes[f.owner].self_type if f.owner else None),
            type_params=f.type_params, params=f.params, stdlib=f.stdlib,
            decl_id=f.node.id, declaring=f.owner,
        )
        return substitute_callable(c, mapping or {}, owner) if mapping else c

    def prop_callable(self, p: PropInfo, owner: Optional[Type] = None, mapping=None) -> Callable:
        c = Callable(
            kind="PropertyAccessor", name=p.name, ret=p.ty,
            owner=owner if owner is not None else self.classes[p.owner].self_type,
            stdlib=p.stdlib, writable=p.mutable, decl_id=p.node.id, declaring=p.owner,
        )
        return substitute_callable(c, mapping or {}, owner) if mapping else c

    def ctor_callable(self, info: ClassInfo, args: Optional[Tuple[Type, ...]] = None) -> Callable:
        c = Callable(
            kind="Constructor", name=info.name, ret=info.self_type, owner=info.self_type,
            type_params=info.type_params, params=info.ctor_params, stdlib=info.stdlib,
            decl_id=info.node.id, declaring=info.name,
        )
        if args is None:
            return c
        ty = ClassType(info.name, tuple(args))
        sub = substitute_callable(c, mapping_for(info.type_params, tuple(args)), ty)
        return Callable(
            kind="Constructor", name=sub.name, ret=ty, owner=ty, type_params=(),
            params=sub.params, stdlib=sub.stdlib, decl_id=sub.decl_id, declaring=sub.declaring,
        )

    def instance_callables(self, ty: Type, include_private: bool = False) -> List[Callable]:
        """Members of `ty` and all its supertypes, substituted by ty's arguments.

        Each member name appears once: overriding declarations hide the
        inherited ones.
        """
        key = (ty, include_private)
        cached = self._member_cache.get(key)
        if cached is not None:
            return list(cached)
        base = self.bound_of(ty) if isinstance(ty, TypeParamRef) else ty
        out: List[Callable] = []
        seen: Set[Tuple[str, int]] = set()
        for t in self.supertypes(base):
            info = self.class_of(t)
            if info is None:
                continue
            mapping = mapping_for(info.type_params, t.args) if isinstance(t, ClassType) else {}
            for name, prop in info.props.items():
                if (name, -1) in seen or (prop.node.has("private") and not include_private):
                    continue
                seen.add((name, -1))
                out.append(self.prop_callable(prop, ty, mapping))
            for name, funs in info.methods.items():
                for f in funs:
                    k = (name, len(f.params))
                    if k in seen or (f.node.has("private") and not include_private):
                        continue
                    seen.add(k)
                    out.append(self.fun_callable(f, ty, mapping))
        self._member_cache[key] = tuple(out)
        return out

    def user_callables(self) -> List[Callable]:
        """Callables declared by the user program, in declaration order."""
        out: List[Callable] = []
        user_items = [self.classes[n].node for n in self.user_class_order] + [f.node for f in self.user_function_order]
        user_items.sort(key=lambda n: n.id)
        for node in user_items:
            if node.kind in ("ClassDecl", "InterfaceDecl"):
                info = self.classes[node.text]
                if info.constructible:
                    out.append(self.ctor_callable(info))
                for prop in info.props.values():
                    if not prop.node.has("private"):
                        out.append(self.prop_callable(prop))
                for funs in info.methods.values():
                    for f in funs:
                        if not f.node.has("private"):
                            out.append(self.fun_callable(f))
            else:
                for f in self.functions.get(node.text, []):
                    if f.node is node:
                        out.append(self.fun_callable(f))
        return out

    def stdlib_callables(self) -> List[Callable]:
        out: List[Callable] = []
        for name in sorted(self.stdlib_names):
            info = self.classes.get(name)
            if info is not None:
                if info.constructible:
                    out.append(self.ctor_callable(info))
                for prop in info.props.values():
                    out.append(self.prop_callable(prop))
                for funs in info.methods.values():
                    out.extend(self.fun_callable(f) for f in funs)
            for f in self.functions.get(name, []):
                if f.stdlib:
                    out.append(self.fun_callable(f))
        return out

    def implementations(self, name: str) -> Iterator[ClassInfo]:
        """Concrete classes having class/interface `name` among their supertypes."""
        for info in self.classes.values():
            if not info.constructible or info.name == name:
                continue
            if any(isinstance(t, ClassType) and t.name == name for t in self.supertypes(info.self_type)):
                yield info

    def is_user_class(self, name: str) -> bool:
        info = self.classes.get(name)
        return info is not None and not info.stdlib


def _as_type_ref(call: Node) -> Node:
    """View a superclass ConstructorCall as the TypeRef it names."""
    ref = mk("TypeRef", call.text, [c for c in call.children if c.kind == "TypeRef"])
    ref.id = call.id
    return ref
