"""Canonical TL pretty-printer.

The output is the canonical form: parse(print_tree(t)) is structurally equal
to t, and printing is a fixed point of parse-then-print.
"""

from typing import List

from .errors import PrintError
from .syntax import Node, SyntaxTree

INDENT = "    "

BINARY_PREC = {
    "||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, ">": 4, "<=": 4, ">=": 4,
    "until": 5, "downTo": 5, "..": 6, "+": 7, "-": 7, "*": 8, "/": 8, "%": 8,
}
PREFIX_PREC = 9
POSTFIX_PREC = 10
ATOM_PREC = 11

_ESCAPE = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t"}


def precedence(node: Node) -> int:
    if node.kind in ("BinaryOp", "RangeExpr"):
        return BINARY_PREC[node.text]
    if node.kind == "UnaryOp":
        return PREFIX_PREC
    if node.kind in ("MemberAccess", "Index") or (node.kind == "Call" and node.has("recv")):
        return POSTFIX_PREC
    if node.kind in ("IntLit", "LongLit", "DoubleLit") and node.text.startswith("-"):
        return PREFIX_PREC
    return ATOM_PREC


def quote(value: str) -> str:
    return '"' + "".join(_ESCAPE.get(c, c) for c in value) + '"'


class Printer:
    def __init__(self, show_placeholders: bool = False):
        self.show_placeholders = show_placeholders

    # -- expressions -----------------------------------------------------

    def wrap(self, node: Node, parens: bool) -> str:
        text = self.expr(node)
        return f"({text})" if parens else text

    def expr(self, n: Node) -> str:
        k = n.kind
        if k in ("IntLit", "DoubleLit", "BoolLit"):
            return n.text
        if k == "LongLit":
            return n.text + "L"
        if k == "StringLit":
            return quote(n.text)
        if k == "NameRef":
            return n.text
        if k == "This":
            return "this"
        if k == "FunRef":
            return "::" + n.text
        if k == "Placeholder":
            if self.show_placeholders:
                return f"[{n.ty}]"
            raise PrintError(f"unfilled placeholder (node {n.id}, expected {n.ty})")
        if k in ("BinaryOp", "RangeExpr"):
            p = BINARY_PREC[n.text]
            left, right = n.children
            lp, rp = precedence(left), precedence(right)
            # comparisons do not chain
            left_paren = lp < p or (p == 4 and lp == 4)
            return f"{self.wrap(left, left_paren)} {n.text} {self.wrap(right, rp <= p)}"
        if k == "UnaryOp":
            operand = n.children[0]
            paren = operand.kind in ("BinaryOp", "RangeExpr", "UnaryOp", "IntLit", "LongLit", "DoubleLit")
            text = self.expr(operand)
            # "-" glued to a leading digit would lex as a negative literal
            if paren or (n.text == "-" and text[:1].isdigit()):
                text = f"({text})"
            return n.text + text
        if k == "MemberAccess":
            recv = n.children[0]
            return f"{self.wrap(recv, precedence(recv) < POSTFIX_PREC)}.{n.text}"
        if k == "Index":
            recv = n.children[0]
            args = ", ".join(self.arg(a) for a in n.children[1:])
            return f"{self.wrap(recv, precedence(recv) < POSTFIX_PREC)}[{args}]"
        if k in ("Call", "ConstructorCall"):
            prefix = ""
            recv = n.receiver()
            if recv is not None:
                prefix = self.wrap(recv, precedence(recv) < POSTFIX_PREC) + "."
            targs = n.type_args()
            tpart = "<" + ", ".join(self.type_ref(t) for t in targs) + ">" if targs else ""
            args = ", ".join(self.arg(a) for a in n.args())
            return f"{prefix}{n.text}{tpart}({args})"
        raise PrintError(f"not an expression: {k}")

    def arg(self, n: Node) -> str:
        if n.kind == "NamedArg":
            return f"{n.text} = {self.expr(n.children[0])}"
        return self.expr(n)

    def type_ref(self, n: Node) -> str:
        if n.text == "->":
            params = ", ".join(self.type_ref(c) for c in n.children[:-1])
            return f"({params}) -> {self.type_ref(n.children[-1])}"
        if n.children:
            return n.text + "<" + ", ".join(self.type_ref(c) for c in n.children) + ">"
        return n.text

    # -- declarations and statements -------------------------------------

    def mods(self, n: Node, order=("private", "external", "open", "abstract", "override", "operator", "infix")) -> str:
        return "".join(m + " " for m in order if n.has(m))

    def type_params(self, n: Node) -> str:
        tps = n.kids("TypeParamDecl")
        if not tps:
            return ""
        parts = []
        for tp in tps:
            bound = tp.type_ref()
            parts.append(tp.text + (f" : {self.type_ref(bound)}" if bound is not None else ""))
        return "<" + ", ".join(parts) + ">"

    def param(self, n: Node) -> str:
        out = self.mods(n, ("private", "override", "vararg"))
        if n.has("val"):
            out += "val "
        elif n.has("var"):
            out += "var "
        out += f"{n.text}: {self.type_ref(n.children[0])}"
        if len(n.children) > 1:
            out += f" = {self.expr(n.children[1])}"
        return out

    def block(self, n: Node, depth: int) -> List[str]:
        lines = []
        for s in n.children:
            lines.extend(self.stmt(s, depth + 1))
        return lines

    def members(self, header: str, members: List[Node], depth: int) -> List[str]:
        pad = INDENT * depth
        if not members:
            return [pad + header]
        lines = [pad + header + " {"]
        for m in members:
            lines.extend(self.stmt(m, depth + 1))
        lines.append(pad + "}")
        return lines

    def stmt(self, n: Node, depth: int) -> List[str]:
        pad = INDENT * depth
        k = n.kind
        if k == "ClassDecl":
            params = ", ".join(self.param(p) for p in n.kids("Param"))
            supers = [self.supertype(c) for c in n.children if c.kind in ("ConstructorCall", "TypeRef")]
            header = f"{self.mods(n)}class {n.text}{self.type_params(n)}({params})"
            if supers:
                header += " : " + ", ".join(supers)
            return self.members(header, n.kids("PropertyDecl", "FunDecl"), depth)
        if k == "InterfaceDecl":
            supers = [self.type_ref(c) for c in n.kids("TypeRef")]
            header = f"{self.mods(n)}interface {n.text}{self.type_params(n)}"
            if supers:
                header += " : " + ", ".join(supers)
            return self.members(header, n.kids("PropertyDecl", "FunDecl"), depth)
        if k == "FunDecl":
            tps = self.type_params(n)
            params = ", ".join(self.param(p) for p in n.kids("Param"))
            header = f"{self.mods(n)}fun {tps + ' ' if tps else ''}{n.text}({params})"
            ret = n.type_ref()
            if ret is not None:
                header += f": {self.type_ref(ret)}"
            body = n.body()
            if body is None:
                return [pad + header]
            return [pad + header + " {"] + self.block(body, depth) + [pad + "}"]
        if k in ("PropertyDecl", "VarDecl"):
            kw = "var" if n.has("var") else "val"
            out = f"{self.mods(n)}{kw} {n.text}"
            tr = n.type_ref()
            if tr is not None:
                out += f": {self.type_ref(tr)}"
            init = n.initializer()
            if init is not None:
                out += f" = {self.expr(init)}"
            return [pad + out]
        if k == "Assign":
            target, value = n.children
            return [pad + f"{self.expr(target)} {n.text} {self.expr(value)}"]
        if k == "While":
            cond, body = n.children
            return [pad + f"while ({self.expr(cond)}) {{"] + self.block(body, depth) + [pad + "}"]
        if k == "For":
            it, body = n.children
            return [pad + f"for ({n.text} in {self.expr(it)}) {{"] + self.block(body, depth) + [pad + "}"]
        if k == "If":
            return self.if_stmt(n, depth, pad)
        if k == "Return":
            if n.children:
                return [pad + "return " + self.expr(n.children[0])]
            return [pad + "return"]
        if k == "Block":
            return [pad + "{"] + self.block(n, depth) + [pad + "}"]
        return [pad + self.expr(n)]

    def if_stmt(self, n: Node, depth: int, head: str) -> List[str]:
        pad = INDENT * depth
        cond, then = n.children[0], n.children[1]
        lines = [head + f"if ({self.expr(cond)}) {{"] + self.block(then, depth)
        if len(n.children) > 2:
            other = n.children[2]
            if other.kind == "If":
                lines.extend(self.if_stmt(other, depth, pad + "} else "))
                return lines
            lines.append(pad + "} else {")
            lines.extend(self.block(other, depth))
        lines.append(pad + "}")
        return lines

    def supertype(self, n: Node) -> str:
        if n.kind == "ConstructorCall":
            return self.expr(n)
        return self.type_ref(n)

    def file(self, root: Node) -> str:
        out = []
        for item in root.children:
            out.extend(self.stmt(item, 0))
        return "".join(line + "\n" for line in out)


def print_tree(tree: SyntaxTree, show_placeholders: bool = False) -> str:
    """Print a whole program in canonical form.

    Raises:
        PrintError: if a Placeholder is left and show_placeholders is off.
    """
    return Printer(show_placeholders).file(tree.root)


def print_node(node: Node, show_placeholders: bool = False) -> str:
    p = Printer(show_placeholders)
    if node.kind == "TypeRef":
        return p.type_ref(node)
    if node.kind == "File":
        return p.file(node)
    return "\n".join(p.stmt(node, 0))
