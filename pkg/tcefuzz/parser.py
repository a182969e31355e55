"""
Lexer and recursive-descent parser for TL.

Usage:
    tree = parse(source_text)
    expr = parse_expression("listOf<Int>(1) + listOf<Int>(2)")
    ty = parse_type("Box<List<Int>>")

The grammar is documented in docs/tl-grammar.md. Every failure is reported as
a ParseError carrying a SourceSpan; the parser never raises anything else for
bad input.
"""

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import ParseError
from .syntax import Node, SourceSpan, SyntaxTree, mk

KEYWORDS = frozenset({
    "class", "interface", "fun", "val", "var", "if", "else", "while", "for",
    "in", "return", "true", "false", "this",
})

MODIFIERS = ("open", "abstract", "override", "operator", "infix", "private", "external", "vararg")

PUNCT = sorted([
    "::", "..", "->", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=",
    "(", ")", "{", "}", "[", "]", "<", ">", "=", "+", "-", "*", "/", "%",
    "!", ",", ":", ".", ";",
], key=len, reverse=True)

INT_MIN, INT_MAX = -(2 ** 31), 2 ** 31 - 1
LONG_MIN, LONG_MAX = -(2 ** 63), 2 ** 63 - 1

_NUMBER = re.compile(r"\d+(\.\d+([eE][+-]?\d+)?|[eE][+-]?\d+)?L?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}

ASSIGN_OPS = ("=", "+=", "-=", "*=")
COMPARISON = ("<", ">", "<=", ">=")
EQUALITY = ("==", "!=")
ADDITIVE = ("+", "-")
MULTIPLICATIVE = ("*", "/", "%")


@dataclass
class Token:
    kind: str   # ident, keyword, int, long, double, string, punct, eof
    text: str
    start: int
    end: int
    nl_before: bool = False
    ws_before: bool = False

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.start, self.end)


def tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    i, n = 0, len(text)
    nl = ws = False
    while i < n:
        c = text[i]
        if c == "\n":
            nl = ws = True
            i += 1
            continue
        if c in " \t\r":
            ws = True
            i += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        start = i
        if c.isdigit():
            m = _NUMBER.match(text, i)
            lit = m.group(0)
            i = m.end()
            if lit.endswith("L"):
                if "." in lit or "e" in lit.lower()[:-1]:
                    raise ParseError(f"malformed Long literal {lit!r}", SourceSpan(start, i))
                tokens.append(Token("long", lit[:-1], start, i, nl, ws))
            elif "." in lit or "e" in lit or "E" in lit:
                tokens.append(Token("double", lit, start, i, nl, ws))
            else:
                tokens.append(Token("int", lit, start, i, nl, ws))
        elif c == "_" or c.isalpha():
            m = _IDENT.match(text, i)
            word = m.group(0)
            i = m.end()
            tokens.append(Token("keyword" if word in KEYWORDS else "ident", word, start, i, nl, ws))
        elif c == '"':
            i += 1
            chars = []
            while True:
                if i >= n or text[i] == "\n":
                    raise ParseError("unterminated string literal", SourceSpan(start, i))
                ch = text[i]
                if ch == '"':
                    i += 1
                    break
                if ch == "\\":
                    esc = text[i + 1] if i + 1 < n else ""
                    if esc not in _ESCAPES:
                        raise ParseError(f"unknown escape \\{esc}", SourceSpan(i, i + 2))
                    chars.append(_ESCAPES[esc])
                    i += 2
                    continue
                chars.append(ch)
                i += 1
            tokens.append(Token("string", "".join(chars), start, i, nl, ws))
        else:
            for p in PUNCT:
                if text.startswith(p, i):
                    i += len(p)
                    tokens.append(Token("punct", p, start, i, nl, ws))
                    break
            else:
                raise ParseError(f"unexpected character {c!r}", SourceSpan(i, i + 1))
        nl = ws = False
    tokens.append(Token("eof", "", n, n, nl, ws))
    return tokens


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.pos = 0

    # -- token helpers ---------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "keyword", "ident") and t.text == text

    def at_modifier(self) -> bool:
        return self.tok.kind == "ident" and self.tok.text in MODIFIERS

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.advance()
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected '{text}'")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            self.error("expected identifier")
        return self.advance()

    def error(self, message: str):
        t = self.tok
        found = t.text if t.kind != "eof" else "end of input"
        raise ParseError(f"{message}, found {found!r}", t.span)

    def finish(self, node: Node, start: Token) -> Node:
        prev = self.toks[self.pos - 1] if self.pos > 0 else start
        node.span = SourceSpan(start.start, max(start.end, prev.end))
        return node

    def skip_semis(self):
        while self.accept(";"):
            pass

    # -- declarations ----------------------------------------------------

    def parse_file(self) -> Node:
        start = self.tok
        items = []
        self.skip_semis()
        while self.tok.kind != "eof":
            items.append(self.top_item())
            self.skip_semis()
        return self.finish(mk("File", children=items), start)

    def modifiers(self) -> List[str]:
        mods = []
        while self.at_modifier() and self.peek().kind in ("ident", "keyword"):
            mods.append(self.advance().text)
        return mods

    def top_item(self) -> Node:
        start = self.tok
        mods = self.modifiers()
        if self.at("class"):
            return self.class_decl(mods, start)
        if self.at("interface"):
            return self.interface_decl(mods, start)
        if self.at("fun"):
            return self.fun_decl(mods, start)
        if mods:
            self.error("expected declaration after modifiers")
        return self.statement()

    def type_params(self) -> List[Node]:
        out = []
        if not self.accept("<"):
            return out
        while True:
            start = self.tok
            name = self.ident().text
            kids = [self.type_ref()] if self.accept(":") else []
            out.append(self.finish(mk("TypeParamDecl", name, kids), start))
            if not self.accept(","):
                break
        self.expect(">")
        return out

    def class_decl(self, mods: List[str], start: Token) -> Node:
        self.expect("class")
        name = self.ident().text
        kids = self.type_params()
        if self.accept("("):
            if not self.at(")"):
                while True:
                    kids.append(self.param(ctor=True))
                    if not self.accept(","):
                        break
            self.expect(")")
        if self.accept(":"):
            while True:
                kids.append(self.super_entry())
                if not self.accept(","):
                    break
        kids.extend(self.class_body())
        return self.finish(mk("ClassDecl", name, kids, mods), start)

    def interface_decl(self, mods: List[str], start: Token) -> Node:
        self.expect("interface")
        name = self.ident().text
        kids = self.type_params()
        if self.accept(":"):
            while True:
                kids.append(self.type_ref())
                if not self.accept(","):
                    break
        kids.extend(self.class_body())
        return self.finish(mk("InterfaceDecl", name, kids, mods), start)

    def super_entry(self) -> Node:
        start = self.tok
        ref = self.type_ref()
        if self.at("(") and not self.tok.nl_before:
            args = self.call_args(")")
            return self.finish(mk("ConstructorCall", ref.text, ref.children + args), start)
        return ref

    def class_body(self) -> List[Node]:
        members = []
        if not self.accept("{"):
            return members
        self.skip_semis()
        while not self.at("}"):
            start = self.tok
            mods = self.modifiers()
            if self.at("fun"):
                members.append(self.fun_decl(mods, start))
            elif self.at("val") or self.at("var"):
                members.append(self.property_decl(mods, start))
            else:
                self.error("expected member declaration")
            self.skip_semis()
        self.expect("}")
        return members

    def property_decl(self, mods: List[str], start: Token) -> Node:
        kw = self.advance().text
        name = self.ident().text
        kids = [self.type_ref()] if self.accept(":") else []
        if self.accept("="):
            kids.append(self.expression())
        if not kids:
            self.error("property needs a type or an initializer")
        return self.finish(mk("PropertyDecl", name, kids, [kw] + mods), start)

    def fun_decl(self, mods: List[str], start: Token) -> Node:
        self.expect("fun")
        kids = self.type_params()
        name = self.ident().text
        self.expect("(")
        if not self.at(")"):
            while True:
                kids.append(self.param(ctor=False))
                if not self.accept(","):
                    break
        self.expect(")")
        if self.accept(":"):
            kids.append(self.type_ref())
        if self.at("{"):
            kids.append(self.block())
        return self.finish(mk("FunDecl", name, kids, mods), start)

    def param(self, ctor: bool) -> Node:
        start = self.tok
        mods = self.modifiers()
        if ctor and (self.at("val") or self.at("var")):
            mods.append(self.advance().text)
        name = self.ident().text
        self.expect(":")
        kids = [self.type_ref()]
        if self.accept("="):
            kids.append(self.expression())
        return self.finish(mk("Param", name, kids, mods), start)

    def type_ref(self) -> Node:
        start = self.tok
        if self.accept("("):
            kids = []
            if not self.at(")"):
                while True:
                    kids.append(self.type_ref())
                    if not self.accept(","):
                        break
            self.expect(")")
            self.expect("->")
            kids.append(self.type_ref())
            return self.finish(mk("TypeRef", "->", kids), start)
        name = self.ident().text
        kids = []
        if self.at("<") and not self.tok.ws_before:
            self.advance()
            while True:
                kids.append(self.type_ref())
                if not self.accept(","):
                    break
            self.expect(">")
        return self.finish(mk("TypeRef", name, kids), start)

    # -- statements ------------------------------------------------------

    def block(self) -> Node:
        start = self.expect("{")
        stmts = []
        self.skip_semis()
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.error("expected '}'")
            stmts.append(self.statement())
            self.skip_semis()
        self.expect("}")
        return self.finish(mk("Block", children=stmts), start)

    def statement(self) -> Node:
        start = self.tok
        if self.at("val") or self.at("var"):
            kw = self.advance().text
            name = self.ident().text
            kids = [self.type_ref()] if self.accept(":") else []
            self.expect("=")
            kids.append(self.expression())
            return self.finish(mk("VarDecl", name, kids, [kw]), start)
        if self.accept("while"):
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            return self.finish(mk("While", children=[cond, self.block()]), start)
        if self.accept("for"):
            self.expect("(")
            var = self.ident().text
            self.expect("in")
            it = self.expression()
            self.expect(")")
            return self.finish(mk("For", var, [it, self.block()]), start)
        if self.at("if"):
            return self.if_stmt()
        if self.accept("return"):
            kids = []
            if not (self.at("}") or self.at(";") or self.tok.kind == "eof" or self.tok.nl_before):
                kids.append(self.expression())
            return self.finish(mk("Return", children=kids), start)
        expr = self.expression()
        if self.tok.kind == "punct" and self.tok.text in ASSIGN_OPS:
            op = self.advance().text
            if expr.kind not in ("NameRef", "MemberAccess", "Index"):
                raise ParseError("invalid assignment target", expr.span)
            value = self.expression()
            return self.finish(mk("Assign", op, [expr, value]), start)
        return expr

    def if_stmt(self) -> Node:
        start = self.expect("if")
        self.expect("(")
        cond = self.expression()
        self.expect(")")
        kids = [cond, self.block()]
        if self.accept("else"):
            kids.append(self.if_stmt() if self.at("if") else self.block())
        return self.finish(mk("If", children=kids), start)

    # -- expressions -----------------------------------------------------

    def expression(self) -> Node:
        return self.disjunction()

    def _binary(self, ops: Tuple[str, ...], operand, kind: str = "BinaryOp") -> Node:
        start = self.tok
        left = operand()
        while self.tok.kind in ("punct", "ident") and self.tok.text in ops and not self.tok.nl_before:
            op = self.advance().text
            right = operand()
            left = self.finish(mk(kind, op, [left, right]), start)
        return left

    def disjunction(self) -> Node:
        return self._binary(("||",), self.conjunction)

    def conjunction(self) -> Node:
        return self._binary(("&&",), self.equality)

    def equality(self) -> Node:
        return self._binary(EQUALITY, self.comparison)

    def comparison(self) -> Node:
        return self._binary(COMPARISON, self.infix_range)

    def infix_range(self) -> Node:
        return self._binary(("until", "downTo"), self.range_to, kind="RangeExpr")

    def range_to(self) -> Node:
        return self._binary(("..",), self.additive, kind="RangeExpr")

    def additive(self) -> Node:
        return self._binary(ADDITIVE, self.multiplicative)

    def multiplicative(self) -> Node:
        return self._binary(MULTIPLICATIVE, self.prefix)

    def prefix(self) -> Node:
        start = self.tok
        if self.at("-") and self.peek().kind in ("int", "long", "double") and not self.peek().ws_before:
            self.advance()
            return self.postfix(self.literal(negative=True, start=start))
        if self.at("-") or self.at("!"):
            op = self.advance().text
            operand = self.prefix()
            return self.finish(mk("UnaryOp", op, [operand]), start)
        return self.postfix(self.primary())

    def postfix(self, expr: Node) -> Node:
        start_pos = expr.span.start if expr.span else self.tok.start
        while True:
            if self.at("."):
                self.advance()
                name = self.ident().text
                targs = self.try_type_args()
                if targs is not None or (self.at("(") and not self.tok.nl_before):
                    args = self.call_args(")")
                    node = mk("Call", name, [expr] + (targs or []) + args, ["recv"])
                else:
                    node = mk("MemberAccess", name, [expr])
            elif self.at("[") and not self.tok.nl_before:
                idx = self.call_args("]", open_="[")
                node = mk("Index", children=[expr] + idx)
            else:
                return expr
            prev = self.toks[self.pos - 1]
            node.span = SourceSpan(start_pos, prev.end)
            expr = node

    def try_type_args(self) -> Optional[List[Node]]:
        """Explicit type arguments directly followed by '('; None otherwise."""
        if not (self.at("<") and not self.tok.ws_before):
            return None
        saved = self.pos
        try:
            self.advance()
            targs = []
            while True:
                targs.append(self.type_ref())
                if not self.accept(","):
                    break
            self.expect(">")
        except ParseError:
            self.pos = saved
            return None
        if not self.at("("):
            self.pos = saved
            return None
        return targs

    def call_args(self, close: str, open_: str = "(") -> List[Node]:
        self.expect(open_)
        args = []
        if not self.at(close):
            while True:
                start = self.tok
                if self.tok.kind == "ident" and self.peek().kind == "punct" and self.peek().text == "=":
                    name = self.advance().text
                    self.advance()
                    args.append(self.finish(mk("NamedArg", name, [self.expression()]), start))
                else:
                    args.append(self.expression())
                if not self.accept(","):
                    break
        self.expect(close)
        return args

    def literal(self, negative: bool = False, start: Optional[Token] = None) -> Node:
        t = self.advance()
        start = start or t
        sign = "-" if negative else ""
        if t.kind == "int":
            value = int(sign + t.text)
            if not INT_MIN <= value <= INT_MAX:
                raise ParseError("Int literal out of range", SourceSpan(start.start, t.end))
            return self.finish(mk("IntLit", sign + t.text), start)
        if t.kind == "long":
            value = int(sign + t.text)
            if not LONG_MIN <= value <= LONG_MAX:
                raise ParseError("Long literal out of range", SourceSpan(start.start, t.end))
            return self.finish(mk("LongLit", sign + t.text), start)
        return self.finish(mk("DoubleLit", sign + t.text), start)

    def primary(self) -> Node:
        t = self.tok
        if t.kind in ("int", "long", "double"):
            return self.literal()
        if t.kind == "string":
            self.advance()
            return self.finish(mk("StringLit", t.text), t)
        if self.at("true") or self.at("false"):
            self.advance()
            return self.finish(mk("BoolLit", t.text), t)
        if self.at("this"):
            self.advance()
            return self.finish(mk("This"), t)
        if self.accept("::"):
            name = self.ident().text
            return self.finish(mk("FunRef", name), t)
        if self.accept("("):
            inner = self.expression()
            self.expect(")")
            return inner
        if t.kind == "ident":
            self.advance()
            targs = self.try_type_args()
            if targs is not None or (self.at("(") and not self.tok.nl_before):
                args = self.call_args(")")
                kind = "ConstructorCall" if t.text[0].isupper() else "Call"
                return self.finish(mk(kind, t.text, (targs or []) + args), t)
            return self.finish(mk("NameRef", t.text), t)
        self.error("expected expression")


def parse(text: str, first_id: int = 0) -> SyntaxTree:
    """Parse TL source text into a SyntaxTree whose node ids start at first_id."""
    return SyntaxTree(Parser(text).parse_file(), first_id)


def _parse_fragment(text: str, rule: str) -> Node:
    p = Parser(text)
    node = getattr(p, rule)()
    if p.tok.kind != "eof":
        p.error("unexpected trailing input")
    return node


def parse_expression(text: str) -> Node:
    """Parse a single detached expression."""
    return _parse_fragment(text, "expression")


def parse_type(text: str) -> Node:
    """Parse a detached TypeRef."""
    return _parse_fragment(text, "type_ref")


def parse_statement(text: str) -> Node:
    return _parse_fragment(text, "statement")
