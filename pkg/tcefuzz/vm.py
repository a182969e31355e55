"""
Compiler under test: checker frontend, bytecode lowering and a stack VM.

Usage:
    result = compile_and_run(tree)                            # no faults
    result = compile_and_run(tree, faults={"RANGE_UNTIL_LOOP"})

Every function body, class initializer and the top level is lowered to a
flat instruction list before anything runs, so a lowering crash never leaves
a partial trace. The VM keeps its own frame stack (no host recursion); call
depth is bounded by Limits.max_call_depth exactly like the interpreter.

Injected faults (see faults.CATALOG) live at their lowering sites below.
"""

import logging
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .checker import CallRef, CheckResult, PropRef, VarInfo, VarRef, check_program
from .errors import CompilerFault, Untypeable
from .faults import CATALOG, compound_index_order, funref_argument, nested_accessor, range_until_loop, unnamed
from .index import ClassInfo, FunInfo
from .runtime import (
    BACKEND_VM, COMPARE, CONSTRUCTORS, FUNCTIONS, MISSING, UNINIT, UNIT_VALUE, ExecutionResult, ExecutionTimeout,
    FunValue, Limits, ListValue, NativeContext, Obj, ProgramLayout, Recorder, TLRuntimeError, crash_signature,
    find_native_method, iterate, native_property, runtime_class, state_of, tl_equals, wrap32, wrap64,
)
from .stdlib import StdlibRegistry
from .syntax import Node, SyntaxTree
from .tltypes import INT, LONG

logger = logging.getLogger(__name__)

DECLARATIONS = ("ClassDecl", "InterfaceDecl", "FunDecl")


class Code:
    __slots__ = ("name", "ops")

    def __init__(self, name: str, ops: Sequence[Tuple[str, Any]]):
        self.name = name
        self.ops = tuple(ops)

    def __repr__(self):
        return f"Code({self.name}, {len(self.ops)} ops)"


class _Assembler:
    def __init__(self, name: str):
        self.name = name
        self.ops: List[List[Any]] = []

    def emit(self, op: str, arg: Any = None) -> int:
        self.ops.append([op, arg])
        return len(self.ops) - 1

    def here(self) -> int:
        return len(self.ops)

    def patch(self, at: int):
        self.ops[at][1] = self.here()

    def finish(self) -> Code:
        return Code(self.name, [tuple(o) for o in self.ops])


def _tmp(node: Node, k: Any) -> Tuple[str, int, Any]:
    return ("tmp", node.id, k)


class Compiler:
    """Lowers a checked program to Code objects."""

    def __init__(self, layout: ProgramLayout, faults: FrozenSet[str] = frozenset()):
        self.layout = layout
        self.result: CheckResult = layout.result
        self.index = layout.index
        self.refs = self.result.refs
        self.types = self.result.types
        self.faults = faults
        self.functions: Dict[int, Code] = {}
        self.inits: Dict[str, Code] = {}
        self.fired: Set[str] = set()

    def crash(self, fault: str, where: Node) -> CompilerFault:
        f = CATALOG[fault]
        return CompilerFault(fault, f.phase, f.kind, f"{f.kind} while lowering {where.kind} (node {where.id})",
                             site=f.site)

    def miscompiles(self, fault: str) -> bool:
        if fault in self.faults:
            self.fired.add(fault)
            return True
        return False

    # -- units -----------------------------------------------------------

    def compile_all(self) -> Code:
        for funs in self.index.functions.values():
            for f in funs:
                self.function(f)
        for info in self.index.classes.values():
            for funs in info.methods.values():
                for f in funs:
                    self.function(f)
            if not info.stdlib and not info.is_interface:
                self.init(info)
        return self.top_level()

    def top_level(self) -> Code:
        asm = _Assembler("<top>")
        root = self.layout.tree.root
        self.trace(asm, root)
        for item in root.children:
            if item.kind not in DECLARATIONS:
                self.statement(asm, item)
        for f in self.index.functions.get("main", []):
            if not f.stdlib and not f.params:
                asm.emit("CALL_FUNCTION", (f, 0))
                asm.emit("POP")
        asm.emit("HALT")
        return asm.finish()

    def function(self, f: FunInfo) -> Optional[Code]:
        body = f.node.body()
        if body is None:
            return None
        code = self.functions.get(f.node.id)
        if code is None:
            asm = _Assembler(f.key)
            self.prologue(asm, f.param_nodes)
            self.block(asm, body)
            asm.emit("CONST", UNIT_VALUE)
            asm.emit("RETURN")
            code = self.functions[f.node.id] = asm.finish()
        return code

    def init(self, info: ClassInfo) -> Code:
        """Initializer of one class level; leaves `this` as its result."""
        code = self.inits.get(info.name)
        if code is not None:
            return code
        asm = _Assembler(f"{info.name}.<init>")
        self.prologue(asm, info.ctor_nodes)
        call = info.super_args_node
        if call is not None and info.superclass is not None:
            sup = self.index.classes[info.superclass.name]
            if not sup.stdlib:
                ref = self.refs[call.id]
                asm.emit("LOAD_THIS")
                self.arguments(asm, call, ref)
                asm.emit("INIT", (sup, len(ref.slots)))
                asm.emit("POP")
        for p in info.ctor_nodes:
            if p.has("val") or p.has("var"):
                asm.emit("LOAD_THIS")
                asm.emit("LOAD_LOCAL", (p.id, p.text))
                asm.emit("SET_FIELD", p.text)
        for member in info.node.kids("PropertyDecl"):
            init = member.initializer()
            if init is not None:
                asm.emit("LOAD_THIS")
                self.expr(asm, init)
                asm.emit("SET_FIELD", member.text)
        asm.emit("LOAD_THIS")
        asm.emit("RETURN")
        code = self.inits[info.name] = asm.finish()
        return code

    def prologue(self, asm: _Assembler, params: Sequence[Node]):
        for p in params:
            default = p.initializer()
            if default is None:
                continue
            asm.emit("LOAD_RAW", p.id)
            skip = asm.emit("JUMP_IF_SUPPLIED")
            self.expr(asm, default)
            asm.emit("STORE_LOCAL", p.id)
            asm.patch(skip)

    def trace(self, asm: _Assembler, node: Node):
        block = self.layout.block_ids.get(node.id)
        if block is not None:
            asm.emit("TRACE", (block, node.id))

    # -- statements ------------------------------------------------------

    def block(self, asm: _Assembler, node: Node):
        self.trace(asm, node)
        for s in node.children:
            self.statement(asm, s)

    def statement(self, asm: _Assembler, node: Node):
        k = node.kind
        if k == "VarDecl":
            self.expr(asm, node.initializer())
            self.store_var(asm, self.refs[node.id].var)
        elif k == "Assign":
            self.assign(asm, node)
        elif k == "While":
            cond, body = node.children
            head = asm.here()
            self.expr(asm, cond)
            exit_jump = asm.emit("JUMP_IF_FALSE")
            self.block(asm, body)
            asm.emit("JUMP", head)
            asm.patch(exit_jump)
            self.trace(asm, node)
        elif k == "For":
            self.for_loop(asm, node)
        elif k == "If":
            self.expr(asm, node.children[0])
            else_jump = asm.emit("JUMP_IF_FALSE")
            self.block(asm, node.children[1])
            end_jump = asm.emit("JUMP")
            asm.patch(else_jump)
            if len(node.children) > 2:
                other = node.children[2]
                if other.kind == "If":
                    self.statement(asm, other)
                else:
                    self.block(asm, other)
            asm.patch(end_jump)
            self.trace(asm, node)
        elif k == "Return":
            if node.children:
                self.expr(asm, node.children[0])
            else:
                asm.emit("CONST", UNIT_VALUE)
            asm.emit("RETURN")
        else:
            self.expr(asm, node)
            asm.emit("POP")

    def for_loop(self, asm: _Assembler, node: Node):
        it, body = node.children
        loop_var = self.refs[node.id].var
        if range_until_loop(node) and self.miscompiles("RANGE_UNTIL_LOOP"):
            # counter loop: runs until the counter hits the bound exactly
            counter, bound = _tmp(node, "i"), _tmp(node, "end")
            self.expr(asm, it.children[0])
            asm.emit("STORE_LOCAL", counter)
            self.expr(asm, it.children[1])
            asm.emit("STORE_LOCAL", bound)
            head = asm.here()
            asm.emit("LOAD_RAW", counter)
            asm.emit("LOAD_RAW", bound)
            asm.emit("NE")
            exit_jump = asm.emit("JUMP_IF_FALSE")
            asm.emit("LOAD_RAW", counter)
            self.store_var(asm, loop_var)
            self.block(asm, body)
            asm.emit("INC_INT", counter)
            asm.emit("JUMP", head)
            asm.patch(exit_jump)
            self.trace(asm, node)
            return
        self.expr(asm, it)
        asm.emit("ITER_INIT")
        head = asm.here()
        exit_jump = asm.emit("FOR_NEXT")
        self.store_var(asm, loop_var)
        self.block(asm, body)
        asm.emit("JUMP", head)
        asm.patch(exit_jump)
        self.trace(asm, node)

    def assign(self, asm: _Assembler, node: Node):
        target, value = node.children
        aref = self.refs[node.id]
        compound = node.text != "="
        if target.kind == "Index":
            if "COMPOUND_INDEX_ORDER" in self.faults and compound_index_order(node):
                raise self.crash("COMPOUND_INDEX_ORDER", node)
            self.index_assign(asm, node, aref)
            return
        ref = aref.target
        if isinstance(ref, VarRef):
            if compound:
                self.load_var(asm, ref.var)
                self.operator_args(asm, aref.op, [value])
            else:
                self.expr(asm, value)
            self.store_var(asm, ref.var)
            return
        if ref.implicit_this:
            asm.emit("LOAD_THIS")
        else:
            if "NESTED_ACCESSOR" in self.faults and nested_accessor(target):
                raise self.crash("NESTED_ACCESSOR", target)
            self.expr(asm, target.children[0])
        if compound:
            asm.emit("DUP")
            asm.emit("GET_FIELD", ref.prop.name)
            self.operator_args(asm, aref.op, [value])
        else:
            self.expr(asm, value)
        asm.emit("SET_FIELD", ref.prop.name)

    def index_assign(self, asm: _Assembler, node: Node, aref: Any):
        target, value = node.children
        idx = target.children[1:]
        recv = _tmp(node, "recv")
        self.expr(asm, target.children[0])
        asm.emit("STORE_LOCAL", recv)
        for i in idx:
            self.expr(asm, i)
            asm.emit("STORE_LOCAL", _tmp(node, i.id))
        if node.text == "=":
            self.expr(asm, value)
        else:
            asm.emit("LOAD_RAW", recv)
            for i in idx:
                asm.emit("LOAD_RAW", _tmp(node, i.id))
            self.permute(asm, aref.get, [i.id for i in idx])
            asm.emit("CALL_METHOD", (aref.get.target, len(aref.get.slots)))
            self.operator_args(asm, aref.op, [value])
        asm.emit("STORE_LOCAL", _tmp(node, value.id))
        asm.emit("LOAD_RAW", recv)
        for i in list(idx) + [value]:
            asm.emit("LOAD_RAW", _tmp(node, i.id))
        self.permute(asm, aref.set, [i.id for i in idx] + [value.id])
        asm.emit("CALL_METHOD", (aref.set.target, len(aref.set.slots)))
        asm.emit("POP")

    # -- variables -------------------------------------------------------

    def load_var(self, asm: _Assembler, v: VarInfo):
        if v.kind == "global":
            asm.emit("LOAD_GLOBAL", (v.decl_id, v.name))
        elif v.kind == "property":
            asm.emit("LOAD_THIS")
            asm.emit("GET_FIELD", v.name)
        else:
            asm.emit("LOAD_LOCAL", (v.decl_id, v.name))

    def store_var(self, asm: _Assembler, v: VarInfo):
        asm.emit("STORE_GLOBAL" if v.kind == "global" else "STORE_LOCAL", v.decl_id)

    # -- expressions -----------------------------------------------------

    def expr(self, asm: _Assembler, node: Node):
        k = node.kind
        if k == "IntLit" or k == "LongLit":
            asm.emit("CONST", int(node.text))
        elif k == "DoubleLit":
            asm.emit("CONST", float(node.text))
        elif k == "BoolLit":
            asm.emit("CONST", node.text == "true")
        elif k == "StringLit":
            asm.emit("CONST", node.text)
        elif k == "NameRef":
            ref = self.refs[node.id]
            if isinstance(ref, PropRef):
                asm.emit("LOAD_THIS")
                asm.emit("GET_FIELD", node.text)
            else:
                self.load_var(asm, ref.var)
        elif k == "This":
            asm.emit("LOAD_THIS")
        elif k == "FunRef":
            asm.emit("CONST", FunValue(self.refs[node.id].target))
        elif k == "MemberAccess":
            if "NESTED_ACCESSOR" in self.faults and nested_accessor(node):
                raise self.crash("NESTED_ACCESSOR", node)
            self.expr(asm, node.children[0])
            asm.emit("GET_FIELD", node.text)
        elif k in ("Call", "ConstructorCall"):
            self.call(asm, node)
        elif k == "Index":
            ref = self.refs[node.id]
            self.expr(asm, node.children[0])
            self.operator_args(asm, ref, node.children[1:])
        elif k == "BinaryOp":
            self.binary(asm, node)
        elif k == "RangeExpr":
            left, right = node.children
            self.expr(asm, left)
            self.operator_args(asm, self.refs[node.id], [right])
        elif k == "UnaryOp":
            self.expr(asm, node.children[0])
            if node.text == "!":
                asm.emit("NOT")
            else:
                ty = self.types.get(node.id)
                asm.emit("NEG", "int" if ty == INT else "long" if ty == LONG else None)
        else:
            raise Untypeable(f"cannot lower {k} (node {node.id})")

    def binary(self, asm: _Assembler, node: Node):
        op = node.text
        left, right = node.children
        if op in ("&&", "||"):
            self.expr(asm, left)
            short = asm.emit("JUMP_IF_FALSE" if op == "&&" else "JUMP_IF_TRUE")
            self.expr(asm, right)
            end = asm.emit("JUMP")
            asm.patch(short)
            asm.emit("CONST", op == "||")
            asm.patch(end)
            return
        self.expr(asm, left)
        if op in ("==", "!="):
            self.expr(asm, right)
            asm.emit("EQ" if op == "==" else "NE")
            return
        self.operator_args(asm, self.refs[node.id], [right])
        if op in COMPARE:
            asm.emit("CMP", op)

    def operator_args(self, asm: _Assembler, ref: CallRef, args: Sequence[Node]):
        """Receiver is on the stack: evaluate args, bind them and call."""
        for a in args:
            self.expr(asm, a)
        self.permute(asm, ref, [a.id for a in args])
        asm.emit("CALL_METHOD", (ref.target, len(ref.slots)))

    def permute(self, asm: _Assembler, ref: CallRef, ids: List[int], positional: bool = False):
        pos = {i: k for k, i in enumerate(ids)}
        fill_last = ref.operator_syntax and bool(ids) and self.miscompiles_defaults(ref)
        plan: List[Tuple[Any, ...]] = []
        for k, (how, slot_ids) in enumerate(ref.slots):
            if positional:
                plan.append(("arg", k) if k < len(ids) else ("default",))
            elif how == "arg":
                plan.append(("arg", pos[slot_ids[0]]))
            elif how == "vararg":
                plan.append(("vararg", tuple(pos[i] for i in slot_ids)))
            elif fill_last:
                plan.append(("arg", len(ids) - 1))
            else:
                plan.append(("default",))
        asm.emit("PERMUTE", (len(ids), tuple(plan)))

    def miscompiles_defaults(self, ref: CallRef) -> bool:
        if not any(how == "default" for how, _ in ref.slots):
            return False
        return self.miscompiles("DEFAULT_ARG_OPERATOR")

    def arguments(self, asm: _Assembler, node: Node, ref: CallRef, positional: bool = False):
        args = node.args()
        for a in args:
            self.expr(asm, unnamed(a))
        self.permute(asm, ref, [a.id for a in args], positional)

    def call(self, asm: _Assembler, node: Node):
        ref: CallRef = self.refs[node.id]
        if "FUNREF_ARGUMENT" in self.faults and funref_argument(node):
            raise self.crash("FUNREF_ARGUMENT", node)
        n = len(ref.slots)
        if ref.kind == "method":
            if ref.implicit_this:
                asm.emit("LOAD_THIS")
            else:
                if "NESTED_ACCESSOR" in self.faults and nested_accessor(node):
                    raise self.crash("NESTED_ACCESSOR", node)
                self.expr(asm, node.receiver())
            self.arguments(asm, node, ref)
            asm.emit("CALL_METHOD", (ref.target, n))
        elif ref.kind == "ctor":
            self.arguments(asm, node, ref, positional=self.binds_positionally(node, ref))
            asm.emit("NEW", (ref.target, n))
        elif ref.kind == "funvar":
            self.arguments(asm, node, ref)
            self.load_var(asm, ref.target)
            asm.emit("CALL_FUNVAR", n)
        else:
            self.arguments(asm, node, ref)
            asm.emit("CALL_FUNCTION", (ref.target, n))

    def binds_positionally(self, node: Node, ref: CallRef) -> bool:
        info: ClassInfo = ref.target
        if info.stdlib or info.superclass is None:
            return False
        sup = self.index.classes.get(info.superclass.name)
        if sup is None or sup.stdlib:
            return False
        if not any(a.kind == "NamedArg" for a in node.args()):
            return False
        if any(how == "vararg" for how, _ in ref.slots):
            return False
        return self.miscompiles("NAMED_ARG_INHERITED_CTOR")


class _Frame:
    __slots__ = ("code", "pc", "locals", "this", "stack")

    def __init__(self, code: Code, this: Any = None):
        self.code = code
        self.pc = 0
        self.locals: Dict[Any, Any] = {}
        self.this = this
        self.stack: List[Any] = []


class VM:
    def __init__(self, compiler: Compiler, limits: Limits = Limits()):
        self.compiler = compiler
        self.layout = compiler.layout
        self.limits = limits
        self.recorder = Recorder(limits)
        self.native = NativeContext()
        self.globals: Dict[int, Any] = {}
        self.frames: List[_Frame] = []

    def push_frame(self, code: Code, params: Sequence[Node], args: List[Any], this: Any = None):
        if len(self.frames) - 1 >= self.limits.max_call_depth:
            raise TLRuntimeError("StackOverflow", f"call depth {len(self.frames) - 1}")
        frame = _Frame(code, this)
        for p, v in zip(params, args):
            frame.locals[p.id] = v
        self.frames.append(frame)

    def invoke(self, f: FunInfo, this: Any, args: List[Any], stack: List[Any]):
        if f.node.has("external"):
            if f.owner is None:
                stack.append(FUNCTIONS[f.name](self.native, None, args))
            else:
                native = find_native_method(runtime_class(this, f.owner), f.name)
                stack.append(native(self.native, this, args))
            return
        self.push_frame(self.compiler.function(f), f.param_nodes, args, this)

    def call_method(self, f: FunInfo, recv: Any, args: List[Any], stack: List[Any]):
        if isinstance(recv, Obj):
            impl = self.layout.resolve_method(recv.cls, f.name, len(f.params))
            if impl is not None and not impl.node.has("external"):
                self.push_frame(self.compiler.function(impl), impl.param_nodes, args, recv)
                return
        native = find_native_method(runtime_class(recv, f.owner), f.name)
        if native is None:
            raise TLRuntimeError("NoSuchMethod", f"{runtime_class(recv, f.owner)}.{f.name}")
        stack.append(native(self.native, recv, args))

    def snapshot(self, node_id: int, frame: _Frame):
        def read(v: VarInfo) -> Any:
            if v.kind == "global":
                return self.globals.get(v.decl_id, UNINIT)
            return frame.locals.get(v.decl_id, UNINIT)
        return state_of(self.layout.snapshot_vars(node_id), read)

    def execute(self, code: Code):
        self.frames = [_Frame(code)]
        recorder = self.recorder
        while True:
            frame = self.frames[-1]
            stack = frame.stack
            op, arg = frame.code.ops[frame.pc]
            frame.pc += 1
            recorder.step()
            if op == "CONST":
                stack.append(arg)
            elif op == "LOAD_LOCAL":
                v = frame.locals.get(arg[0], UNINIT)
                if v is UNINIT:
                    raise TLRuntimeError("UninitializedVariable", arg[1])
                stack.append(v)
            elif op == "LOAD_RAW":
                stack.append(frame.locals.get(arg, MISSING))
            elif op == "STORE_LOCAL":
                frame.locals[arg] = stack.pop()
            elif op == "LOAD_GLOBAL":
                v = self.globals.get(arg[0], UNINIT)
                if v is UNINIT:
                    raise TLRuntimeError("UninitializedVariable", arg[1])
                stack.append(v)
            elif op == "STORE_GLOBAL":
                self.globals[arg] = stack.pop()
            elif op == "LOAD_THIS":
                stack.append(frame.this)
            elif op == "GET_FIELD":
                obj = stack.pop()
                if isinstance(obj, Obj):
                    v = obj.fields.get(arg, UNINIT)
                    if v is UNINIT:
                        raise TLRuntimeError("UninitializedProperty", f"{obj.cls}.{arg}")
                    stack.append(v)
                else:
                    stack.append(native_property(obj, arg))
            elif op == "SET_FIELD":
                v = stack.pop()
                stack.pop().fields[arg] = v
            elif op == "POP":
                stack.pop()
            elif op == "DUP":
                stack.append(stack[-1])
            elif op == "JUMP":
                frame.pc = arg
            elif op == "JUMP_IF_FALSE":
                if not stack.pop():
                    frame.pc = arg
            elif op == "JUMP_IF_TRUE":
                if stack.pop():
                    frame.pc = arg
            elif op == "JUMP_IF_SUPPLIED":
                if stack.pop() is not MISSING:
                    frame.pc = arg
            elif op == "EQ" or op == "NE":
                b = stack.pop()
                same = tl_equals(stack.pop(), b)
                stack.append(same if op == "EQ" else not same)
            elif op == "NOT":
                stack.append(not stack.pop())
            elif op == "NEG":
                v = -stack.pop()
                stack.append(wrap32(v) if arg == "int" else wrap64(v) if arg == "long" else v)
            elif op == "CMP":
                stack.append(COMPARE[arg](stack.pop()))
            elif op == "INC_INT":
                frame.locals[arg] = wrap32(frame.locals[arg] + 1)
            elif op == "ITER_INIT":
                stack.append(iter(iterate(stack.pop())))
            elif op == "FOR_NEXT":
                try:
                    stack.append(next(stack[-1]))
                except StopIteration:
                    stack.pop()
                    frame.pc = arg
            elif op == "PERMUTE":
                n, plan = arg
                values = stack[len(stack) - n:]
                del stack[len(stack) - n:]
                for entry in plan:
                    if entry[0] == "arg":
                        stack.append(values[entry[1]])
                    elif entry[0] == "vararg":
                        stack.append(ListValue([values[i] for i in entry[1]]))
                    else:
                        stack.append(MISSING)
            elif op == "CALL_FUNCTION":
                f, n = arg
                args = _pop_n(stack, n)
                self.invoke(f, None, args, stack)
            elif op == "CALL_METHOD":
                f, n = arg
                args = _pop_n(stack, n)
                self.call_method(f, stack.pop(), args, stack)
            elif op == "CALL_FUNVAR":
                fn = stack.pop()
                args = _pop_n(stack, arg)
                self.invoke(fn.fun, None, args, stack)
            elif op == "NEW":
                info, n = arg
                args = _pop_n(stack, n)
                if info.stdlib:
                    stack.append(CONSTRUCTORS[info.name](self.native, None, args))
                else:
                    obj = self.layout.new_object(info.name)
                    self.push_frame(self.compiler.init(info), info.ctor_nodes, args, obj)
            elif op == "INIT":
                info, n = arg
                args = _pop_n(stack, n)
                self.push_frame(self.compiler.init(info), info.ctor_nodes, args, stack.pop())
            elif op == "RETURN":
                v = stack.pop()
                self.frames.pop()
                self.frames[-1].stack.append(v)
            elif op == "TRACE":
                recorder.emit(arg[0], self.snapshot(arg[1], frame))
            elif op == "HALT":
                return
            else:
                raise ValueError(f"bad opcode {op}")

    def run(self, code: Code) -> ExecutionResult:
        try:
            self.execute(code)
            out = ExecutionResult("Completed")
        except TLRuntimeError as e:
            out = ExecutionResult("RuntimeError", e.kind, e.message)
        except ExecutionTimeout as e:
            out = ExecutionResult("Timeout", e.kind)
        except Exception as e:  # type confusion from a miscompiled program
            logger.debug("vm internal error: %r", e)
            out = ExecutionResult("RuntimeError", "InternalVMError", f"{type(e).__name__}: {e}")
        out.trace = self.recorder.trace
        out.output = self.native.output
        return out


def _pop_n(stack: List[Any], n: int) -> List[Any]:
    if n == 0:
        return []
    args = stack[len(stack) - n:]
    del stack[len(stack) - n:]
    return args


def _crash_result(e: CompilerFault) -> ExecutionResult:
    return ExecutionResult("CompilerCrash", e.kind, str(e), phase=e.phase,
                           signature=crash_signature(e.phase, e.kind, e), fault=e.fault, backend=BACKEND_VM)


def compile_program(tree: SyntaxTree, faults: Iterable[str] = (),
                    registry: Optional[StdlibRegistry] = None) -> Tuple[Compiler, Code]:
    """Frontend and backend of the compiler under test, without running.

    Raises:
        CompilerFault: when an enabled fault crashes the compiler.
        Untypeable: when the program does not typecheck.
    """
    faults = frozenset(faults)
    result = check_program(tree, registry, faults=faults)
    if not result.ok:
        raise Untypeable(f"program does not typecheck: {result.errors[0].message}")
    compiler = Compiler(ProgramLayout(tree, result), faults)
    return compiler, compiler.compile_all()


def compile_and_run(tree: SyntaxTree, faults: Iterable[str] = (), limits: Limits = Limits(),
                    registry: Optional[StdlibRegistry] = None) -> ExecutionResult:
    """Compile with the given faults enabled and run on the VM.

    Args:
        tree: a typechecking program
        faults: names from faults.CATALOG
        limits: execution limits shared with the interpreter
        registry: stdlib to compile against

    Returns:
        ExecutionResult; compiler crashes become outcome CompilerCrash.
    """
    try:
        compiler, code = compile_program(tree, faults, registry)
    except CompilerFault as e:
        logger.debug("compiler crash %s (%s)", e.kind, e.fault)
        return _crash_result(e)
    out = VM(compiler, limits).run(code)
    out.backend = BACKEND_VM
    out.fault = ",".join(sorted(compiler.fired))
    return out
