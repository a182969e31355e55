"""
Whole-program static checking of TL.

check_program() resolves every name, types every expression and validates
declarations (overrides, abstract members, returns). Type errors are values:
the result carries a list of CheckError and never raises for bad programs.
The only exception that can escape is CompilerFault, when an injected
frontend fault is enabled and triggered.

Besides errors the result records, per node id:
    types   the type of every expression node
    scopes  the variables visible at every statement and expression
    refs    what a name, call, member access or assignment resolved to
"""

import logging
from collections import ChainMap
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import CompilerFault, UnknownNode, Untypeable
from .faults import CATALOG, unnamed
from .index import ClassInfo, FunInfo, ProgramIndex, PropInfo
from .stdlib import StdlibRegistry, default_registry
from .syntax import EXPRESSION_KINDS, Node, SyntaxTree
from .tltypes import (
    BOOLEAN, DOUBLE, ERROR, INT, LONG, NUMERIC, STRING, UNIT, Callable, ClassType, ErrorType,
    FunctionType, ParamSig, Type, TypeParamRef, mapping_for, substitute,
)

logger = logging.getLogger(__name__)

ARITH_OPS = {"+": "plus", "-": "minus", "*": "times", "/": "div", "%": "rem"}
COMPOUND_OPS = {"+=": "plus", "-=": "minus", "*=": "times"}
RANGE_OPS = {"..": "rangeTo", "until": "until", "downTo": "downTo"}

Slots = Tuple[Tuple[str, Tuple[int, ...]], ...]


@dataclass(frozen=True)
class VarInfo:
    name: str
    ty: Type
    mutable: bool
    decl_id: int
    kind: str           # local, param, loop, global, property


class Scope:
    """Ordered frames of visible variables; inner frames shadow outer ones."""

    def __init__(self, frames: Tuple[Tuple[VarInfo, ...], ...] = ()):
        self.frames = frames

    def lookup(self, name: str) -> Optional[VarInfo]:
        for frame in reversed(self.frames):
            for v in reversed(frame):
                if v.name == name:
                    return v
        return None

    def variables(self) -> List[VarInfo]:
        """Visible variables in declaration order, shadowed ones removed."""
        out: Dict[str, VarInfo] = {}
        for frame in self.frames:
            for v in frame:
                out.pop(v.name, None)
                out[v.name] = v
        return list(out.values())

    def names(self) -> List[str]:
        return [v.name for v in self.variables()]

    def __contains__(self, name: str) -> bool:
        return self.lookup(name) is not None

    def __repr__(self) -> str:
        return f"Scope({', '.join(f'{v.name}: {v.ty}' for v in self.variables())})"


@dataclass(frozen=True)
class CheckError:
    node_id: int
    message: str


TypeErrorList = List[CheckError]


@dataclass
class CallRef:
    """Resolved call. `slots` binds each parameter to argument node ids:
    ("arg", (id,)), ("vararg", ids) or ("default", ())."""

    kind: str                      # function, method, ctor, funvar
    target: Any                    # FunInfo, ClassInfo or VarInfo
    slots: Slots = ()
    ret: Type = UNIT
    implicit_this: bool = False
    receiver_type: Optional[Type] = None
    type_args: Tuple[Type, ...] = ()
    operator_syntax: bool = False
    overloaded: bool = False


@dataclass
class VarRef:
    var: VarInfo


@dataclass
class PropRef:
    prop: PropInfo
    implicit_this: bool = False


@dataclass
class AssignRef:
    target: Any = None             # VarRef or PropRef for names and members
    op: Optional[CallRef] = None   # compound operator
    get: Optional[CallRef] = None  # index read of a compound index assignment
    set: Optional[CallRef] = None  # index write


@dataclass
class CheckResult:
    tree: SyntaxTree
    index: ProgramIndex
    errors: TypeErrorList = field(default_factory=list)
    types: Mapping[int, Type] = field(default_factory=dict)
    scopes: Mapping[int, Scope] = field(default_factory=dict)
    refs: Mapping[int, Any] = field(default_factory=dict)
    _parents: Optional[Dict[int, Node]] = None

    @property
    def ok(self) -> bool:
        return not self.errors

    def type_of(self, node_id: int) -> Type:
        ty = self.types.get(node_id)
        if ty is None:
            raise Untypeable(f"node {node_id} is not a typed expression")
        return ty

    def scope_at(self, node_id: int) -> Scope:
        if self._parents is None:
            self._parents = self.tree.parents()
        if node_id not in self._parents and node_id != self.tree.root.id:
            raise UnknownNode(node_id)
        nid: Optional[int] = node_id
        while nid is not None:
            scope = self.scopes.get(nid)
            if scope is not None:
                return scope
            parent = self._parents.get(nid)
            nid = parent.id if parent is not None else None
        return Scope()

    def format_errors(self, source: Optional[str] = None) -> List[str]:
        lines = []
        nodes = self.tree.index()
        for e in self.errors:
            node = nodes.get(e.node_id)
            if source is not None and node is not None and node.span is not None:
                line, col = node.span.line_col(source)
                lines.append(f"{line}:{col}: {e.message}")
            else:
                lines.append(f"node {e.node_id}: {e.message}")
        return lines


class _Context:
    """Per-body checking state: scope frames plus the enclosing declarations."""

    def __init__(self, frames: List[List[VarInfo]], this_class: Optional[ClassInfo] = None,
                 ret: Optional[Type] = None, in_function: bool = False, has_this: bool = True):
        self.frames = frames
        self.this_class = this_class
        self.this_type = this_class.self_type if this_class is not None and has_this else None
        self.ret = ret
        self.in_function = in_function
        self.tp_env: Optional[Dict[str, TypeParamRef]] = None
        self._snapshot: Optional[Scope] = None

    def snapshot(self) -> Scope:
        if self._snapshot is None:
            self._snapshot = Scope(tuple(tuple(f) for f in self.frames))
        return self._snapshot

    def push(self):
        self.frames.append([])
        self._snapshot = None

    def pop(self):
        self.frames.pop()
        self._snapshot = None

    def declare(self, v: VarInfo, frame: int = -1):
        self.frames[frame].append(v)
        self._snapshot = None

    def lookup(self, name: str) -> Optional[VarInfo]:
        for frame in reversed(self.frames):
            for v in reversed(frame):
                if v.name == name:
                    return v
        return None


class Checker:
    def __init__(self, tree: SyntaxTree, index: ProgramIndex, faults: FrozenSet[str] = frozenset()):
        self.tree = tree
        self.index = index
        self.faults = faults
        self.result = CheckResult(tree, index)
        self.types: Dict[int, Type] = {}
        self.scopes: Dict[int, Scope] = {}
        self.refs: Dict[int, Any] = {}
        self.result.types, self.result.scopes, self.result.refs = self.types, self.scopes, self.refs
        self.user_ids = {n.id for n in tree.nodes()}
        self.global_vars: List[VarInfo] = []

    def error(self, node: Node, message: str):
        self.result.errors.append(CheckError(node.id, message))

    # -- entry -----------------------------------------------------------

    def run(self) -> CheckResult:
        for nid, msg in self.index.problems:
            if nid in self.user_ids:
                self.result.errors.append(CheckError(nid, msg))
        root = self.tree.root
        top = _Context([[]])
        for item in root.children:
            if item.kind not in ("ClassDecl", "InterfaceDecl", "FunDecl"):
                self.statement(item, top)
        self.global_vars = list(top.frames[0])
        for item in root.children:
            if item.kind in ("ClassDecl", "InterfaceDecl"):
                info = self.index.classes.get(item.text)
                if info is not None and info.node is item:
                    self.check_class(info)
            elif item.kind == "FunDecl":
                for f in self.index.functions.get(item.text, []):
                    if f.node is item:
                        self.check_function(f, None)
        main = [f for f in self.index.functions.get("main", []) if not f.stdlib]
        if main and not any(not f.params for f in main):
            self.error(main[0].node, "'main' must not take parameters")
        return self.result

    def check_stdlib_bodies(self) -> CheckResult:
        """Resolve the TL-implemented stdlib functions; user globals are not visible."""
        for funs in self.index.functions.values():
            for f in funs:
                if f.stdlib and f.node.body() is not None:
                    self.check_function(f, None)
        return self.result

    # -- declarations ----------------------------------------------------

    def check_class(self, info: ClassInfo):
        node = info.node
        ctor_frame = [
            VarInfo(p.text, sig.ty, False, p.id, "param") for p, sig in zip(info.ctor_nodes, info.ctor_params)
        ]
        for tp_node, tp in zip(node.kids("TypeParamDecl"), info.type_params):
            self.check_type_wf(tp_node.type_ref(), tp.bound)
        default_ctx = _Context([list(self.global_vars), []], has_this=False)
        for p, sig in zip(info.ctor_nodes, info.ctor_params):
            self.check_type_wf(p.type_ref(), sig.ty)
            default = p.initializer()
            if default is not None:
                self.expect_type(default, sig.ty, default_ctx)
            default_ctx.declare(VarInfo(p.text, sig.ty, False, p.id, "param"))
        if info.super_args_node is not None and info.superclass is not None:
            sup_info = self.index.classes[info.superclass.name]
            ctx = _Context([list(self.global_vars), ctor_frame], this_class=info, has_this=False)
            call = info.super_args_node
            self.scopes[call.id] = ctx.snapshot()
            args = call.args()
            self.type_args_of_call(args, ctx)
            mapping = mapping_for(sup_info.type_params, info.superclass.args)
            params = _subst_params(sup_info.ctor_params, mapping)
            slots = self.bind(call, params, args)
            if slots is not None:
                self.refs[call.id] = CallRef("ctor", sup_info, slots, ret=info.superclass,
                                             receiver_type=info.superclass)
        # property initializers see ctor params and the properties declared before them
        init_ctx = _Context([list(self.global_vars), self.property_frame(info, own=False), ctor_frame],
                            this_class=info)
        for member in node.kids("PropertyDecl"):
            prop = info.props.get(member.text)
            if prop is None or prop.node is not member:
                continue
            if member.type_ref() is None:
                self.error(member, f"property '{member.text}' must declare its type")
            else:
                self.check_type_wf(member.type_ref(), prop.ty)
            init = member.initializer()
            if init is not None:
                if info.is_interface:
                    self.error(member, "interface properties cannot have initializers")
                self.scopes[member.id] = init_ctx.snapshot()
                self.expect_type(init, prop.ty, init_ctx)
            elif not (info.is_abstract or member.has("external")):
                self.error(member, f"property '{member.text}' must be initialized")
            if member.has("abstract") and not node.has("abstract"):
                self.error(member, f"abstract property '{member.text}' in non-abstract class")
            init_ctx.declare(VarInfo(member.text, prop.ty, prop.mutable, member.id, "property"), frame=1)
        for funs in info.methods.values():
            for f in funs:
                self.check_function(f, info)
        if not info.stdlib:
            self.check_overrides(info)
            if not info.is_abstract:
                self.check_implemented(info)

    def property_frame(self, info: ClassInfo, own: bool = True) -> List[VarInfo]:
        """Properties reachable through implicit `this` inside `info`, most derived last."""
        out: List[VarInfo] = []
        for t in reversed(self.index.supertypes(info.self_type)):
            cinfo = self.index.class_of(t)
            if cinfo is None or (cinfo is info and not own):
                continue
            mapping = mapping_for(cinfo.type_params, t.args) if isinstance(t, ClassType) else {}
            for prop in cinfo.props.values():
                if prop.node.has("private") and cinfo is not info:
                    continue
                out = [v for v in out if v.name != prop.name]
                out.append(VarInfo(prop.name, substitute(prop.ty, mapping), prop.mutable, prop.node.id, "property"))
        return out

    def check_function(self, f: FunInfo, owner: Optional[ClassInfo]):
        node = f.node
        for tp_node, tp in zip(node.kids("TypeParamDecl"), f.type_params):
            self.check_type_wf(tp_node.type_ref(), tp.bound)
        for p, sig in zip(f.param_nodes, f.params):
            self.check_type_wf(p.type_ref(), sig.ty)
        self.check_type_wf(node.type_ref(), f.ret)
        if any(sig.has_default for sig in f.params) and owner is not None and (f.overridable or owner.is_interface):
            self.error(node, "default values are not allowed on overridable functions")
        if owner is None and (node.has("override") or node.has("open") or node.has("abstract")):
            self.error(node, "top-level functions cannot be open, abstract or override")
        if owner is not None and node.has("abstract") and not owner.node.has("abstract"):
            self.error(node, f"abstract function '{f.name}' in non-abstract class")
        frames: List[List[VarInfo]] = [[] if f.stdlib else list(self.global_vars)]
        if owner is not None:
            frames.append(self.property_frame(owner))
        seen = set()
        for p in f.param_nodes:
            if p.text in seen:
                self.error(p, f"duplicate parameter '{p.text}'")
            seen.add(p.text)
        default_ctx = _Context([list(fr) for fr in frames] + [[]], this_class=owner)
        tp_env = self.fun_tp_env(f, owner)
        default_ctx.tp_env = tp_env
        for p, sig in zip(f.param_nodes, f.params):
            default = p.initializer()
            if default is not None:
                self.expect_type(default, sig.ty, default_ctx)
            default_ctx.declare(VarInfo(p.text, sig.ty, False, p.id, "param"))
        body = node.body()
        if body is None:
            if not (node.has("external") or (owner is not None and owner.is_abstract)):
                self.error(node, f"function '{f.name}' must have a body")
            return
        if node.has("external"):
            self.error(node, "external functions cannot have a body")
        frames.append([VarInfo(p.text, sig.ty, False, p.id, "param") for p, sig in zip(f.param_nodes, f.params)])
        ctx = _Context(frames, this_class=owner, ret=f.ret, in_function=True)
        ctx.tp_env = tp_env
        self.block(body, ctx)
        if f.ret != UNIT and not isinstance(f.ret, ErrorType) and not definitely_returns(body):
            self.error(node, f"function '{f.name}' must return a value of type {f.ret} on every path")

    def fun_tp_env(self, f: FunInfo, owner: Optional[ClassInfo]) -> Dict[str, TypeParamRef]:
        env = {}
        if owner is not None:
            env.update({tp.name: tp.ref for tp in owner.type_params})
        env.update({tp.name: tp.ref for tp in f.type_params})
        return env

    def check_overrides(self, info: ClassInfo):
        parents = list(self.index.supertypes(info.self_type)[1:])
        for name, prop in info.props.items():
            inherited = self.find_inherited(parents, name, None)
            is_override = prop.node.has("override")
            if inherited is None:
                if is_override:
                    self.error(prop.node, f"'{name}' overrides nothing")
                continue
            base, mapping, base_info = inherited
            if not isinstance(base, PropInfo):
                self.error(prop.node, f"'{name}' hides a member function")
            elif not is_override:
                self.error(prop.node, f"'{name}' hides a member of a supertype and needs 'override'")
            elif not (base_info.is_interface or base.abstract or base.node.has("open") or base.node.has("override")):
                self.error(prop.node, f"'{name}' in '{base_info.name}' is final")
            elif base.mutable and (not prop.mutable or prop.ty != substitute(base.ty, mapping)):
                self.error(prop.node, f"var property '{name}' must be overridden by a var of the same type")
            elif not self.index.is_subtype(prop.ty, substitute(base.ty, mapping)):
                self.error(prop.node, f"type of '{name}' is not a subtype of the overridden property")
        for name, funs in info.methods.items():
            for f in funs:
                inherited = self.find_inherited(parents, name, len(f.params))
                is_override = f.node.has("override")
                if inherited is None:
                    if is_override:
                        self.error(f.node, f"'{name}' overrides nothing")
                    continue
                base, mapping, base_info = inherited
                if isinstance(base, PropInfo):
                    self.error(f.node, f"'{name}' hides a property")
                    continue
                if not is_override:
                    self.error(f.node, f"'{name}' hides a member of a supertype and needs 'override'")
                    continue
                if not (base_info.is_interface or base.overridable):
                    self.error(f.node, f"'{name}' in '{base_info.name}' is final")
                if len(base.type_params) != len(f.type_params):
                    self.error(f.node, f"'{name}' type parameters do not match the overridden function")
                    continue
                mapping = dict(mapping)
                for btp, ftp in zip(base.type_params, f.type_params):
                    mapping[btp.ref] = ftp.ref
                if [p.ty for p in f.params] != [substitute(p.ty, mapping) for p in base.params]:
                    self.error(f.node, f"'{name}' parameter types do not match the overridden function")
                elif not self.index.is_subtype(f.ret, substitute(base.ret, mapping)):
                    self.error(f.node, f"return type of '{name}' is not a subtype of the overridden function's")

    def find_inherited(self, parents: Sequence[Type], name: str, arity: Optional[int]):
        for t in parents:
            cinfo = self.index.class_of(t)
            if cinfo is None:
                continue
            mapping = mapping_for(cinfo.type_params, t.args) if isinstance(t, ClassType) else {}
            prop = cinfo.props.get(name)
            if prop is not None and not prop.node.has("private"):
                return prop, mapping, cinfo
            for g in cinfo.methods.get(name, []):
                if not g.node.has("private") and (arity is None or len(g.params) == arity):
                    return g, mapping, cinfo
        return None

    def check_implemented(self, info: ClassInfo):
        resolved: Dict[Tuple[str, int], bool] = {}
        for t in self.index.supertypes(info.self_type):
            cinfo = self.index.class_of(t)
            if cinfo is None:
                continue
            for name, prop in cinfo.props.items():
                resolved.setdefault((name, -1), not prop.abstract)
            for name, funs in cinfo.methods.items():
                for g in funs:
                    resolved.setdefault((name, len(g.params)), not g.is_abstract)
        for name in sorted({name for (name, _), done in resolved.items() if not done}):
            self.error(info.node, f"class '{info.name}' must implement abstract member '{name}'")

    def check_type_wf(self, ref: Optional[Node], ty: Type):
        if ref is None or any(isinstance(t, ErrorType) for t in _all_types(ty)):
            return
        if not self.index.well_formed(ty):
            self.error(ref, f"type {ty} violates a type parameter bound")

    # -- statements ------------------------------------------------------

    def block(self, node: Node, ctx: _Context):
        ctx.push()
        self.scopes[node.id] = ctx.snapshot()
        for s in node.children:
            self.statement(s, ctx)
        ctx.pop()

    def statement(self, node: Node, ctx: _Context):
        self.scopes[node.id] = ctx.snapshot()
        k = node.kind
        if k == "VarDecl":
            self.var_decl(node, ctx)
        elif k == "Assign":
            self.assign(node, ctx)
        elif k == "While":
            cond, body = node.children
            self.expect_type(cond, BOOLEAN, ctx)
            self.block(body, ctx)
        elif k == "For":
            it, body = node.children
            ty = self.expr(it, ctx)
            elem = self.index.element_type(ty)
            if elem is None:
                if not isinstance(ty, ErrorType):
                    self.error(it, f"for-loop range must be Iterable, found {ty}")
                elem = ERROR
            ctx.push()
            var = VarInfo(node.text, elem, False, node.id, "loop")
            ctx.declare(var)
            self.refs[node.id] = VarRef(var)
            self.block(body, ctx)
            ctx.pop()
        elif k == "If":
            self.expect_type(node.children[0], BOOLEAN, ctx)
            self.block(node.children[1], ctx)
            if len(node.children) > 2:
                other = node.children[2]
                if other.kind == "If":
                    self.statement(other, ctx)
                else:
                    self.block(other, ctx)
        elif k == "Return":
            if not ctx.in_function:
                self.error(node, "return is only allowed inside a function")
                for c in node.children:
                    self.expr(c, ctx)
            elif node.children:
                self.expect_type(node.children[0], ctx.ret, ctx)
            elif ctx.ret != UNIT:
                self.error(node, f"missing return value of type {ctx.ret}")
        elif k in EXPRESSION_KINDS:
            self.expr(node, ctx)
        else:
            self.error(node, f"{k} is not allowed here")

    def var_decl(self, node: Node, ctx: _Context):
        declared = None
        ref = node.type_ref()
        if ref is not None:
            declared = self.index.resolve_type(ref, self.tp_env(ctx), report=False)
            if isinstance(declared, ErrorType):
                self.error(ref, f"unresolved type '{ref.text}'")
            else:
                self.check_type_wf(ref, declared)
        init = node.initializer()
        if init is None:
            self.error(node, "variable must be initialized")
            ty = declared or ERROR
        elif declared is not None:
            self.expect_type(init, declared, ctx)
            ty = declared
        else:
            ty = self.expr(init, ctx)
        if any(v.name == node.text for v in ctx.frames[-1]):
            self.error(node, f"conflicting declarations of '{node.text}'")
        top_level = not ctx.in_function and len(ctx.frames) == 1 and ctx.this_class is None
        var = VarInfo(node.text, ty, node.has("var"), node.id, "global" if top_level else "local")
        ctx.declare(var)
        self.refs[node.id] = VarRef(var)

    def assign(self, node: Node, ctx: _Context):
        target, value = node.children
        op = node.text
        self.scopes[target.id] = ctx.snapshot()
        aref = AssignRef()
        if target.kind == "Index":
            recv_ty = self.expr(target.children[0], ctx)
            idx = target.children[1:]
            for i in idx:
                self.expr(i, ctx)
            self.expr(value, ctx)
            if op != "=":
                aref.get = self.operator_call(target, recv_ty, "get", idx)
                if aref.get is None:
                    self.types[target.id] = ERROR
                    return
                elem_ty = aref.get.ret
                self.types[target.id] = elem_ty
                self.refs[target.id] = aref.get
                aref.op = self.operator_call(node, elem_ty, COMPOUND_OPS[op], [value], expect=elem_ty)
            else:
                self.types[target.id] = self.types.get(value.id, ERROR)
            aref.set = self.operator_call(target, recv_ty, "set", list(idx) + [value], value_last=True)
            self.refs[node.id] = aref
            return
        if target.kind not in ("NameRef", "MemberAccess"):
            self.error(node, "invalid assignment target")
            self.expr(value, ctx)
            return
        tgt_ty = self.expr(target, ctx)
        r = self.refs.get(target.id)
        if isinstance(r, VarRef) and not r.var.mutable:
            self.error(node, f"'{target.text}' cannot be reassigned")
        elif isinstance(r, PropRef) and not r.prop.mutable:
            self.error(node, f"property '{target.text}' is read-only")
        aref.target = r
        if op == "=":
            self.expect_type(value, tgt_ty, ctx)
        else:
            self.expr(value, ctx)
            aref.op = self.operator_call(node, tgt_ty, COMPOUND_OPS[op], [value], expect=tgt_ty)
        self.refs[node.id] = aref

    # -- expressions -----------------------------------------------------

    def tp_env(self, ctx: _Context) -> Dict[str, TypeParamRef]:
        if ctx.tp_env is not None:
            return ctx.tp_env
        if ctx.this_class is not None:
            return {tp.name: tp.ref for tp in ctx.this_class.type_params}
        return {}

    def expect_type(self, node: Node, expected: Type, ctx: _Context) -> Type:
        ty = self.expr(node, ctx)
        if not self.index.is_subtype(ty, expected):
            self.error(node, f"type mismatch: expected {expected}, found {ty}")
        return ty

    def expr(self, node: Node, ctx: _Context) -> Type:
        self.scopes.setdefault(node.id, ctx.snapshot())
        try:
            ty = self._expr(node, ctx)
        except RecursionError:
            self.error(node, "expression nesting too deep")
            ty = ERROR
        self.types[node.id] = ty
        return ty

    def _expr(self, node: Node, ctx: _Context) -> Type:
        k = node.kind
        if k == "IntLit":
            return INT
        if k == "LongLit":
            return LONG
        if k == "DoubleLit":
            return DOUBLE
        if k == "BoolLit":
            return BOOLEAN
        if k == "StringLit":
            return STRING
        if k == "Placeholder":
            return node.ty if isinstance(node.ty, Type) else ERROR
        if k == "This":
            if ctx.this_type is None:
                self.error(node, "'this' is not available here")
                return ERROR
            return ctx.this_type
        if k == "NameRef":
            return self.name_ref(node, ctx)
        if k == "FunRef":
            funs = self.index.functions.get(node.text, [])
            if len(funs) != 1 or funs[0].type_params:
                self.error(node, f"cannot reference function '{node.text}'")
                return ERROR
            f = funs[0]
            ty = FunctionType(tuple(p.ty for p in f.params), f.ret)
            self.refs[node.id] = CallRef("function", f, ret=ty)
            return ty
        if k == "MemberAccess":
            return self.member_access(node, ctx)
        if k in ("Call", "ConstructorCall"):
            return self.call(node, ctx)
        if k == "Index":
            recv_ty = self.expr(node.children[0], ctx)
            for a in node.children[1:]:
                self.expr(a, ctx)
            ref = self.operator_call(node, recv_ty, "get", node.children[1:])
            if ref is None:
                return ERROR
            self.refs[node.id] = ref
            return ref.ret
        if k == "BinaryOp":
            return self.binary(node, ctx)
        if k == "RangeExpr":
            left, right = node.children
            lt = self.expr(left, ctx)
            self.expr(right, ctx)
            ref = self.operator_call(node, lt, RANGE_OPS[node.text], [right])
            if ref is None:
                return ERROR
            self.refs[node.id] = ref
            return ref.ret
        if k == "UnaryOp":
            ty = self.expr(node.children[0], ctx)
            if node.text == "!":
                if not self.index.is_subtype(ty, BOOLEAN):
                    self.error(node, f"'!' needs Boolean, found {ty}")
                return BOOLEAN
            if ty in NUMERIC or isinstance(ty, ErrorType):
                return ty
            self.error(node, f"unary '-' needs a number, found {ty}")
            return ERROR
        self.error(node, f"{k} is not an expression")
        return ERROR

    def name_ref(self, node: Node, ctx: _Context) -> Type:
        v = ctx.lookup(node.text)
        if v is None:
            self.error(node, f"unresolved reference '{node.text}'")
            return ERROR
        if v.kind == "property":
            prop, _, _ = self.index.lookup_member(ctx.this_class.self_type, v.name)
            self.refs[node.id] = PropRef(prop, implicit_this=True)
            return v.ty
        self.refs[node.id] = VarRef(v)
        return v.ty

    def member_access(self, node: Node, ctx: _Context) -> Type:
        recv_ty = self.expr(node.children[0], ctx)
        if isinstance(recv_ty, ErrorType):
            return ERROR
        prop, _, mapping = self.index.lookup_member(recv_ty, node.text)
        if prop is None:
            self.error(node, f"unresolved property '{node.text}' on {recv_ty}")
            return ERROR
        if prop.node.has("private") and (ctx.this_class is None or ctx.this_class.name != prop.owner):
            self.error(node, f"property '{node.text}' is private")
        self.refs[node.id] = PropRef(prop)
        return substitute(prop.ty, mapping)

    def binary(self, node: Node, ctx: _Context) -> Type:
        op = node.text
        left, right = node.children
        if op in ("&&", "||"):
            self.expect_type(left, BOOLEAN, ctx)
            self.expect_type(right, BOOLEAN, ctx)
            return BOOLEAN
        lt = self.expr(left, ctx)
        rt = self.expr(right, ctx)
        if op in ("==", "!="):
            if not (self.index.is_subtype(lt, rt) or self.index.is_subtype(rt, lt)):
                self.error(node, f"operator '{op}' cannot be applied to {lt} and {rt}")
            return BOOLEAN
        name = ARITH_OPS.get(op, "compareTo")
        ref = self.operator_call(node, lt, name, [right])
        if ref is None:
            return ERROR
        self.refs[node.id] = ref
        if name == "compareTo":
            if ref.ret != INT:
                self.error(node, "compareTo must return Int")
            return BOOLEAN
        return ref.ret

    def operator_call(self, node: Node, recv_ty: Type, name: str, args: Sequence[Node],
                      expect: Optional[Type] = None, value_last: bool = False) -> Optional[CallRef]:
        """Resolve operator syntax `recv <op> args` against operator/infix members."""
        if isinstance(recv_ty, ErrorType):
            return None
        _, funs, mapping = self.index.lookup_member(recv_ty, name)
        funs = [f for f in funs if f.node.has("operator") or f.node.has("infix")]
        if not funs:
            self.error(node, f"no operator '{name}' on {recv_ty}")
            return None
        ref = self.resolve_among(node, [(f, mapping) for f in funs], list(args), None, (), "method",
                                 receiver_type=recv_ty, value_last=value_last)
        if ref is None:
            return None
        ref.operator_syntax = True
        if expect is not None and not self.index.is_subtype(ref.ret, expect):
            self.error(node, f"operator '{name}' result {ref.ret} does not fit {expect}")
        return ref

    def type_args_of_call(self, args: Sequence[Node], ctx: _Context):
        for a in args:
            if a.kind == "NamedArg":
                self.types[a.id] = self.expr(a.children[0], ctx)
                self.scopes.setdefault(a.id, ctx.snapshot())
            else:
                self.expr(a, ctx)

    def call(self, node: Node, ctx: _Context) -> Type:
        args = node.args()
        type_args = tuple(self.index.resolve_type(t, self.tp_env(ctx), report=False) for t in node.type_args())
        for t, ty in zip(node.type_args(), type_args):
            if isinstance(ty, ErrorType):
                self.error(t, f"unresolved type '{t.text}'")
                return ERROR
        recv = node.receiver()
        recv_ty = self.expr(recv, ctx) if recv is not None else None
        self.type_args_of_call(args, ctx)
        if node.kind == "ConstructorCall":
            return self.constructor_call(node, args, type_args)
        if recv is not None:
            if isinstance(recv_ty, ErrorType):
                return ERROR
            _, funs, mapping = self.index.lookup_member(recv_ty, node.text)
            if not funs:
                self.error(node, f"unresolved method '{node.text}' on {recv_ty}")
                return ERROR
            ref = self.resolve_among(node, [(f, mapping) for f in funs], args, ctx, type_args, "method",
                                     receiver_type=recv_ty)
        else:
            ref = self.unqualified_call(node, args, ctx, type_args)
        if ref is None:
            return ERROR
        self.refs[node.id] = ref
        return ref.ret

    def unqualified_call(self, node: Node, args: Sequence[Node], ctx: _Context,
                         type_args: Tuple[Type, ...]) -> Optional[CallRef]:
        # function-typed variable, then member of `this`, then top-level function
        v = ctx.lookup(node.text)
        if v is not None and isinstance(v.ty, FunctionType):
            if type_args:
                self.error(node, "function values take no type arguments")
                return None
            params = tuple(ParamSig(f"p{i}", t) for i, t in enumerate(v.ty.params))
            slots = self.bind(node, params, args)
            if slots is None:
                return None
            return CallRef("funvar", v, slots, ret=v.ty.ret)
        if ctx.this_class is not None:
            _, funs, mapping = self.index.lookup_member(ctx.this_class.self_type, node.text)
            if funs:
                if ctx.this_type is None:
                    self.error(node, f"'{node.text}' needs an instance")
                    return None
                return self.resolve_among(node, [(f, mapping) for f in funs], args, ctx, type_args, "method",
                                          receiver_type=ctx.this_type, implicit_this=True)
        funs = self.index.functions.get(node.text, [])
        if not funs:
            self.error(node, f"unresolved function '{node.text}'")
            return None
        return self.resolve_among(node, [(f, {}) for f in funs], args, ctx, type_args, "function")

    def constructor_call(self, node: Node, args: Sequence[Node], type_args: Tuple[Type, ...]) -> Type:
        info = self.index.classes.get(node.text)
        if info is None:
            self.error(node, f"unresolved class '{node.text}'")
            return ERROR
        if not info.constructible:
            self.error(node, f"cannot create an instance of '{node.text}'")
            return ERROR
        if len(type_args) != len(info.type_params):
            self.error(node, f"'{node.text}' expects {len(info.type_params)} type argument(s)")
            return ERROR
        ty = ClassType(info.name, type_args)
        if not self.index.well_formed(ty):
            self.error(node, f"type arguments of {ty} violate bounds")
        params = _subst_params(info.ctor_params, mapping_for(info.type_params, type_args))
        slots = self.bind(node, params, args)
        if slots is None:
            return ERROR
        self.refs[node.id] = CallRef("ctor", info, slots, ret=ty, receiver_type=ty, type_args=type_args)
        return ty

    def resolve_among(self, node: Node, candidates: List[Tuple[FunInfo, Mapping]], args: Sequence[Node],
                      ctx: Optional[_Context], type_args: Tuple[Type, ...], kind: str,
                      receiver_type: Optional[Type] = None, implicit_this: bool = False,
                      value_last: bool = False) -> Optional[CallRef]:
        """Overload resolution: exact arity, then the most specific applicable candidate."""
        if len(candidates) > 1 and "OVERLOAD_RANGE_ARG" in self.faults:
            if any(unnamed(a).kind == "RangeExpr" for a in args):
                _overload_range_crash(node)
        this_name = ctx.this_class.name if ctx is not None and ctx.this_class is not None else None
        applicable = []
        failure: List[CheckError] = []
        for f, mapping in candidates:
            if f.node.has("private") and f.owner is not None and this_name != f.owner:
                failure = [CheckError(node.id, f"'{f.name}' is private")]
                continue
            if len(type_args) != len(f.type_params):
                failure = [CheckError(node.id, f"'{f.name}' expects {len(f.type_params)} type argument(s), "
                                               f"got {len(type_args)}")]
                continue
            full = dict(mapping)
            full.update(mapping_for(f.type_params, type_args))
            violated = [tp for tp, ta in zip(f.type_params, type_args)
                        if not self.index.is_subtype(ta, substitute(tp.bound, full))]
            if violated:
                failure = [CheckError(node.id, f"type argument violates bound of '{violated[0].name}'")]
                continue
            params = _subst_params(f.params, full)
            saved = len(self.result.errors)
            slots = self.bind(node, params, args, value_last=value_last)
            if slots is None:
                failure = self.result.errors[saved:]
                del self.result.errors[saved:]
                continue
            applicable.append((f, full, params, slots))
        if not applicable:
            self.result.errors.extend(failure or [CheckError(node.id, f"no applicable '{node.text}'")])
            return None
        if len(applicable) > 1:
            best = [a for a in applicable
                    if all(self._more_specific(a[2], b[2]) for b in applicable if b is not a)]
            if len(best) != 1:
                self.error(node, f"ambiguous call to '{node.text}'")
                return None
            applicable = best
        f, full, _, slots = applicable[0]
        return CallRef(kind, f, slots, ret=substitute(f.ret, full), implicit_this=implicit_this,
                       receiver_type=receiver_type, type_args=type_args, overloaded=len(candidates) > 1)

    def _more_specific(self, a: Tuple[ParamSig, ...], b: Tuple[ParamSig, ...]) -> bool:
        if len(a) != len(b):
            return len(a) < len(b)
        return all(self.index.is_subtype(x.ty, y.ty) for x, y in zip(a, b))

    def bind(self, node: Node, params: Tuple[ParamSig, ...], args: Sequence[Node],
             value_last: bool = False) -> Optional[Slots]:
        """Bind typed argument nodes to parameters; None (with errors) on failure.

        With value_last (indexed assignment) the final argument binds to the
        last parameter and the index arguments fill the leading ones.
        """
        slots: List[Optional[Tuple[str, Tuple[int, ...]]]] = [None] * len(params)
        varargs: List[int] = []
        vararg_index = next((i for i, p in enumerate(params) if p.vararg), None)
        ok = True
        named_seen = False
        pos = 0
        for i, a in enumerate(args):
            if a.kind == "NamedArg":
                named_seen = True
                target = next((j for j, p in enumerate(params) if p.name == a.text), None)
                if target is None:
                    self.error(a, f"no parameter named '{a.text}'")
                    ok = False
                elif params[target].vararg:
                    self.error(a, "vararg parameters cannot be passed by name")
                    ok = False
                elif slots[target] is not None:
                    self.error(a, f"parameter '{a.text}' passed twice")
                    ok = False
                else:
                    slots[target] = ("arg", (a.id,))
                    ok &= self._arg_fits(a.children[0], params[target].ty)
                continue
            if named_seen:
                self.error(a, "positional argument after named arguments")
                ok = False
                continue
            if value_last and i == len(args) - 1 and params:
                j = len(params) - 1
                if slots[j] is not None or j < pos:
                    self.error(a, "too many index arguments")
                    ok = False
                    continue
                slots[j] = ("arg", (a.id,))
                ok &= self._arg_fits(a, params[j].ty)
                continue
            if vararg_index is not None and pos >= vararg_index:
                varargs.append(a.id)
                ok &= self._arg_fits(a, params[vararg_index].ty)
                continue
            if pos >= len(params) or (value_last and pos == len(params) - 1):
                self.error(a, "too many arguments")
                ok = False
                continue
            slots[pos] = ("arg", (a.id,))
            ok &= self._arg_fits(a, params[pos].ty)
            pos += 1
        for j, p in enumerate(params):
            if slots[j] is not None:
                continue
            if p.vararg:
                slots[j] = ("vararg", tuple(varargs))
            elif p.has_default:
                slots[j] = ("default", ())
            else:
                self.error(node, f"no value passed for parameter '{p.name}'")
                ok = False
        return tuple(slots) if ok else None

    def _arg_fits(self, arg: Node, ty: Type) -> bool:
        at = self.types.get(arg.id, ERROR)
        if not self.index.is_subtype(at, ty):
            self.error(arg, f"type mismatch: expected {ty}, found {at}")
            return False
        return True


def _subst_params(params: Tuple[ParamSig, ...], mapping: Mapping) -> Tuple[ParamSig, ...]:
    return tuple(ParamSig(p.name, substitute(p.ty, mapping), p.has_default, p.vararg) for p in params)


def _overload_range_crash(node: Node):
    fault = CATALOG["OVERLOAD_RANGE_ARG"]
    raise CompilerFault(fault.name, fault.phase, fault.kind,
                        f"overload resolution failed on a range argument (node {node.id})", site=fault.site)


def _all_types(ty: Type) -> Iterable[Type]:
    yield ty
    if isinstance(ty, ClassType):
        for a in ty.args:
            yield from _all_types(a)
    elif isinstance(ty, FunctionType):
        for t in ty.params + (ty.ret,):
            yield from _all_types(t)


def definitely_returns(node: Node) -> bool:
    if node.kind == "Return":
        return True
    if node.kind == "Block":
        return any(definitely_returns(s) for s in node.children)
    if node.kind == "If" and len(node.children) > 2:
        return definitely_returns(node.children[1]) and definitely_returns(node.children[2])
    return False


# -- public API ----------------------------------------------------------


def _stdlib_bodies(registry: StdlibRegistry) -> CheckResult:
    cached = registry.cache.get("bodies")
    if cached is None:
        cached = Checker(registry.tree, registry.index).check_stdlib_bodies()
        if cached.errors:
            logger.error("stdlib bodies do not typecheck: %s", cached.errors[:3])
        registry.cache["bodies"] = cached
    return cached


def check_program(tree: SyntaxTree, registry: Optional[StdlibRegistry] = None,
                  faults: FrozenSet[str] = frozenset()) -> CheckResult:
    """Typecheck a whole program against the standard library.

    Args:
        tree: parsed program
        registry: stdlib to check against (bundled one by default)
        faults: enabled fault names; only frontend faults matter here

    Returns:
        CheckResult; `ok` is True iff no errors were found.
    """
    registry = registry or default_registry()
    index = ProgramIndex(tree, base=registry.index)
    result = Checker(tree, index, frozenset(faults)).run()
    bodies = _stdlib_bodies(registry)
    result.refs = ChainMap(result.refs, bodies.refs)
    result.types = ChainMap(result.types, bodies.types)
    return result


def is_subtype(sub: Type, sup: Type, index: Optional[ProgramIndex] = None) -> bool:
    index = index or default_registry().index
    return index.is_subtype(sub, sup)


def get_callables(tree: SyntaxTree, registry: Optional[StdlibRegistry] = None,
                  include_stdlib: bool = True) -> List[Callable]:
    """User callables in declaration order (private members excluded), then the stdlib ones."""
    registry = registry or default_registry()
    index = ProgramIndex(tree, base=registry.index)
    out = index.user_callables()
    if include_stdlib:
        out.extend(registry.callables())
    return out


def get_instance_callables(instance_type: Type, index: ProgramIndex) -> List[Callable]:
    return index.instance_callables(instance_type)


def scope_at(tree: SyntaxTree, node_id: int, result: Optional[CheckResult] = None) -> Scope:
    result = result or check_program(tree)
    return result.scope_at(node_id)


def type_of(tree: SyntaxTree, node_id: int, result: Optional[CheckResult] = None) -> Type:
    result = result or check_program(tree)
    tree.find(node_id)
    return result.type_of(node_id)
