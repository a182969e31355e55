"""
Reference backend: a tree-walking evaluator over the checked syntax tree.

Usage:
    result = interpret(tree)                      # checks, then runs
    result = interpret(tree, limits=Limits(max_events=500))

The evaluator follows the resolution recorded by the checker (refs, types)
and emits one trace event per basic-block entry through runtime.Recorder.
"""

import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

from .checker import CallRef, CheckResult, PropRef, VarInfo, VarRef, check_program
from .errors import Untypeable
from .faults import unnamed
from .index import ClassInfo, FunInfo
from .runtime import (
    BACKEND_INTERP, COMPARE, CONSTRUCTORS, FUNCTIONS, MISSING, UNINIT, UNIT_VALUE, ExecutionResult, ExecutionTimeout,
    FunValue, Limits, ListValue, NativeContext, Obj, ProgramLayout, Recorder, TLRuntimeError,
    find_native_method, iterate, native_property, runtime_class, state_of, tl_equals, wrap32, wrap64,
)
from .syntax import Node, SyntaxTree
from .tltypes import INT, LONG

logger = logging.getLogger(__name__)

HOST_RECURSION_LIMIT = 20_000


class _Return(Exception):
    def __init__(self, value: Any):
        self.value = value


class _Frame:
    __slots__ = ("locals", "this")

    def __init__(self, this: Any = None):
        self.locals: Dict[int, Any] = {}
        self.this = this


class Interpreter:
    def __init__(self, tree: SyntaxTree, result: CheckResult, limits: Limits = Limits()):
        self.tree = tree
        self.result = result
        self.refs = result.refs
        self.types = result.types
        self.layout = ProgramLayout(tree, result)
        self.limits = limits
        self.recorder = Recorder(limits)
        self.native = NativeContext()
        self.globals: Dict[int, Any] = {}
        self.depth = 0

    # -- entry -----------------------------------------------------------

    def run(self) -> ExecutionResult:
        if sys.getrecursionlimit() < HOST_RECURSION_LIMIT:
            sys.setrecursionlimit(HOST_RECURSION_LIMIT)
        try:
            self.run_program()
            out = ExecutionResult("Completed")
        except TLRuntimeError as e:
            out = ExecutionResult("RuntimeError", e.kind, e.message)
        except ExecutionTimeout as e:
            out = ExecutionResult("Timeout", e.kind)
        except RecursionError:
            out = ExecutionResult("RuntimeError", "StackOverflow", "host recursion limit")
        out.trace = self.recorder.trace
        out.output = self.native.output
        out.backend = BACKEND_INTERP
        return out

    def run_program(self):
        root = self.tree.root
        frame = _Frame()
        self.enter(root, frame)
        for item in root.children:
            if item.kind not in ("ClassDecl", "InterfaceDecl", "FunDecl"):
                self.statement(item, frame)
        for f in self.result.index.functions.get("main", []):
            if not f.stdlib and not f.params:
                self.invoke(f, None, [])

    # -- instrumentation -------------------------------------------------

    def enter(self, node: Node, frame: _Frame):
        block = self.layout.block_ids.get(node.id)
        if block is not None:
            variables = self.layout.snapshot_vars(node.id)
            self.recorder.emit(block, state_of(variables, lambda v: self.read_raw(v, frame)))

    # -- variables -------------------------------------------------------

    def read_raw(self, v: VarInfo, frame: _Frame) -> Any:
        if v.kind == "global":
            return self.globals.get(v.decl_id, UNINIT)
        return frame.locals.get(v.decl_id, UNINIT)

    def read(self, v: VarInfo, frame: _Frame) -> Any:
        if v.kind == "property":
            return self.get_field(frame.this, v.name)
        value = self.read_raw(v, frame)
        if value is UNINIT:
            raise TLRuntimeError("UninitializedVariable", v.name)
        return value

    def write(self, v: VarInfo, value: Any, frame: _Frame):
        if v.kind == "global":
            self.globals[v.decl_id] = value
        else:
            frame.locals[v.decl_id] = value

    def get_field(self, obj: Any, name: str) -> Any:
        if not isinstance(obj, Obj):
            return native_property(obj, name)
        value = obj.fields.get(name, UNINIT)
        if value is UNINIT:
            raise TLRuntimeError("UninitializedProperty", f"{obj.cls}.{name}")
        return value

    # -- statements ------------------------------------------------------

    def block(self, node: Node, frame: _Frame):
        self.enter(node, frame)
        for s in node.children:
            self.statement(s, frame)

    def statement(self, node: Node, frame: _Frame):
        self.recorder.step()
        k = node.kind
        if k == "VarDecl":
            self.write(self.refs[node.id].var, self.eval(node.initializer(), frame), frame)
        elif k == "Assign":
            self.assign(node, frame)
        elif k == "While":
            cond, body = node.children
            while self.eval(cond, frame):
                self.block(body, frame)
            self.enter(node, frame)
        elif k == "For":
            it, body = node.children
            loop_var = self.refs[node.id].var
            for x in iterate(self.eval(it, frame)):
                self.write(loop_var, x, frame)
                self.block(body, frame)
            self.enter(node, frame)
        elif k == "If":
            if self.eval(node.children[0], frame):
                self.block(node.children[1], frame)
            elif len(node.children) > 2:
                other = node.children[2]
                if other.kind == "If":
                    self.statement(other, frame)
                else:
                    self.block(other, frame)
            self.enter(node, frame)
        elif k == "Return":
            raise _Return(self.eval(node.children[0], frame) if node.children else UNIT_VALUE)
        else:
            self.eval(node, frame)

    def assign(self, node: Node, frame: _Frame):
        target, value_node = node.children
        aref = self.refs[node.id]
        if target.kind == "Index":
            recv = self.eval(target.children[0], frame)
            values = {i.id: self.eval(i, frame) for i in target.children[1:]}
            if node.text == "=":
                values[value_node.id] = self.eval(value_node, frame)
            else:
                current = self.call_method(aref.get, recv, self.build(aref.get, values, frame))
                rhs = self.eval(value_node, frame)
                op_args = self.build(aref.op, {value_node.id: rhs}, frame)
                values[value_node.id] = self.call_method(aref.op, current, op_args)
            self.call_method(aref.set, recv, self.build(aref.set, values, frame))
            return
        recv = self.eval(target.children[0], frame) if target.kind == "MemberAccess" else None
        if node.text == "=":
            new = self.eval(value_node, frame)
        else:
            current = self.load_target(aref.target, recv, frame)
            rhs = self.eval(value_node, frame)
            new = self.call_method(aref.op, current, self.build(aref.op, {value_node.id: rhs}, frame))
        self.store_target(aref.target, recv, new, frame)

    def load_target(self, ref: Any, recv: Any, frame: _Frame) -> Any:
        if isinstance(ref, VarRef):
            return self.read(ref.var, frame)
        return self.get_field(frame.this if ref.implicit_this else recv, ref.prop.name)

    def store_target(self, ref: Any, recv: Any, value: Any, frame: _Frame):
        if isinstance(ref, VarRef):
            self.write(ref.var, value, frame)
            return
        obj = frame.this if ref.implicit_this else recv
        obj.fields[ref.prop.name] = value

    # -- expressions -----------------------------------------------------

    def eval(self, node: Node, frame: _Frame) -> Any:
        self.recorder.step()
        k = node.kind
        if k == "IntLit" or k == "LongLit":
            return int(node.text)
        if k == "DoubleLit":
            return float(node.text)
        if k == "BoolLit":
            return node.text == "true"
        if k == "StringLit":
            return node.text
        if k == "NameRef":
            ref = self.refs[node.id]
            if isinstance(ref, PropRef):
                return self.get_field(frame.this, node.text)
            return self.read(ref.var, frame)
        if k == "This":
            return frame.this
        if k == "FunRef":
            return FunValue(self.refs[node.id].target)
        if k == "MemberAccess":
            return self.get_field(self.eval(node.children[0], frame), node.text)
        if k in ("Call", "ConstructorCall"):
            return self.call(node, frame)
        if k == "Index":
            ref = self.refs[node.id]
            recv = self.eval(node.children[0], frame)
            values = {i.id: self.eval(i, frame) for i in node.children[1:]}
            return self.call_method(ref, recv, self.build(ref, values, frame))
        if k == "BinaryOp":
            return self.binary(node, frame)
        if k == "RangeExpr":
            return self.operator(node, frame)
        if k == "UnaryOp":
            v = self.eval(node.children[0], frame)
            if node.text == "!":
                return not v
            ty = self.types.get(node.id)
            if ty == INT:
                return wrap32(-v)
            if ty == LONG:
                return wrap64(-v)
            return -v
        raise Untypeable(f"cannot evaluate {k} (node {node.id})")

    def binary(self, node: Node, frame: _Frame) -> Any:
        op = node.text
        left, right = node.children
        if op == "&&":
            return bool(self.eval(left, frame)) and bool(self.eval(right, frame))
        if op == "||":
            return bool(self.eval(left, frame)) or bool(self.eval(right, frame))
        if op in ("==", "!="):
            same = tl_equals(self.eval(left, frame), self.eval(right, frame))
            return same if op == "==" else not same
        result = self.operator(node, frame)
        if op in COMPARE:
            return COMPARE[op](result)
        return result

    def operator(self, node: Node, frame: _Frame) -> Any:
        ref = self.refs[node.id]
        left, right = node.children
        recv = self.eval(left, frame)
        values = {right.id: self.eval(right, frame)}
        return self.call_method(ref, recv, self.build(ref, values, frame))

    # -- calls -----------------------------------------------------------

    def evaluate_args(self, args: Sequence[Node], frame: _Frame) -> Dict[int, Any]:
        return {a.id: self.eval(unnamed(a), frame) for a in args}

    def build(self, ref: CallRef, values: Dict[int, Any], frame: _Frame) -> List[Any]:
        """Parameter-ordered argument list from evaluated argument values."""
        out = []
        for how, ids in ref.slots:
            if how == "arg":
                out.append(values[ids[0]])
            elif how == "vararg":
                out.append(ListValue([values[i] for i in ids]))
            else:
                out.append(MISSING)
        return out

    def call(self, node: Node, frame: _Frame) -> Any:
        ref: CallRef = self.refs[node.id]
        if ref.kind == "method":
            recv = frame.this if ref.implicit_this else self.eval(node.receiver(), frame)
            args = self.build(ref, self.evaluate_args(node.args(), frame), frame)
            return self.call_method(ref, recv, args)
        args = self.build(ref, self.evaluate_args(node.args(), frame), frame)
        if ref.kind == "ctor":
            return self.construct(ref.target, args)
        if ref.kind == "funvar":
            fn = self.read(ref.target, frame)
            return self.invoke(fn.fun, None, args)
        return self.invoke(ref.target, None, args)

    def call_method(self, ref: CallRef, recv: Any, args: List[Any]) -> Any:
        f: FunInfo = ref.target
        if isinstance(recv, Obj):
            impl = self.layout.resolve_method(recv.cls, f.name, len(f.params))
            if impl is not None and not impl.node.has("external"):
                return self.invoke(impl, recv, args)
        native = find_native_method(runtime_class(recv, f.owner), f.name)
        if native is None:
            raise TLRuntimeError("NoSuchMethod", f"{runtime_class(recv, f.owner)}.{f.name}")
        return native(self.native, recv, args)

    def push(self):
        if self.depth >= self.limits.max_call_depth:
            raise TLRuntimeError("StackOverflow", f"call depth {self.depth}")
        self.depth += 1

    def invoke(self, f: FunInfo, this: Any, args: List[Any]) -> Any:
        if f.node.has("external"):
            if f.owner is None:
                return FUNCTIONS[f.name](self.native, None, args)
            return find_native_method(runtime_class(this, f.owner), f.name)(self.native, this, args)
        self.push()
        try:
            frame = _Frame(this)
            self.bind_params(f.param_nodes, args, frame)
            try:
                self.block(f.node.body(), frame)
            except _Return as r:
                return r.value
            return UNIT_VALUE
        finally:
            self.depth -= 1

    def bind_params(self, params: Sequence[Node], args: List[Any], frame: _Frame):
        for p, value in zip(params, args):
            if value is MISSING:
                value = self.eval(p.initializer(), frame)
            frame.locals[p.id] = value

    def construct(self, info: ClassInfo, args: List[Any]) -> Any:
        if info.stdlib:
            return CONSTRUCTORS[info.name](self.native, None, args)
        obj = self.layout.new_object(info.name)
        self.init_object(info, obj, args)
        return obj

    def init_object(self, info: ClassInfo, obj: Obj, args: List[Any]):
        """Run one class level of construction: super call, ctor properties, initializers."""
        self.push()
        try:
            frame = _Frame(obj)
            self.bind_params(info.ctor_nodes, args, frame)
            call = info.super_args_node
            if call is not None and info.superclass is not None:
                sup = self.result.index.classes[info.superclass.name]
                if not sup.stdlib:
                    ref = self.refs[call.id]
                    self.init_object(sup, obj, self.build(ref, self.evaluate_args(call.args(), frame), frame))
            for p in info.ctor_nodes:
                if p.has("val") or p.has("var"):
                    obj.fields[p.text] = frame.locals[p.id]
            for member in info.node.kids("PropertyDecl"):
                init = member.initializer()
                if init is not None:
                    obj.fields[member.text] = self.eval(init, frame)
        finally:
            self.depth -= 1


def interpret(tree: SyntaxTree, limits: Limits = Limits(), result: Optional[CheckResult] = None) -> ExecutionResult:
    """Run a typechecking program on the reference evaluator.

    Args:
        tree: the program
        limits: event, step, call-depth and wall-clock limits
        result: check_program(tree) when already available

    Returns:
        ExecutionResult with the basic-block trace and printed output.
    """
    result = result or check_program(tree)
    if not result.ok:
        raise Untypeable(f"program does not typecheck: {result.errors[0].message}")
    return Interpreter(tree, result, limits).run()
