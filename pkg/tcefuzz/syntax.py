"""
Tree representation of TL programs.

A program is a SyntaxTree: a root File node plus a counter handing out node
identifiers. Nodes are plain mutable records; the layout of `children` per
kind is fixed:

    File            decls and statements
    ClassDecl       TypeParamDecl*, Param* (primary ctor), supertypes
                    (ConstructorCall for the superclass, TypeRef for
                    interfaces), then PropertyDecl / FunDecl members
    InterfaceDecl   TypeParamDecl*, TypeRef* (super interfaces), members
    FunDecl         TypeParamDecl*, Param*, TypeRef? (return), Block? (body)
    PropertyDecl    TypeRef?, initializer?
    Param           TypeRef, default?
    TypeParamDecl   TypeRef? (upper bound)
    TypeRef         type arguments (text "->": params..., return)
    Block           statements
    VarDecl         TypeRef?, initializer
    Assign          target, value                   (text = operator)
    While           condition, Block
    For             iterable, Block                 (text = loop variable)
    If              condition, Block, (Block | If)?
    Return          value?
    Call            [receiver], TypeRef*, arguments (flag "recv" marks receiver)
    ConstructorCall TypeRef*, arguments
    MemberAccess    receiver                        (text = member name)
    Index           receiver, index arguments
    NamedArg        value                           (text = parameter name)
    BinaryOp        left, right                     (text = operator)
    UnaryOp         operand                         (text = operator)
    RangeExpr       left, right                     (text = .., until, downTo)
    Placeholder     none; `ty` holds the expected type
"""

import copy
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple

from .errors import UnknownNode

KINDS = frozenset({
    "File", "ClassDecl", "InterfaceDecl", "FunDecl", "PropertyDecl", "Param",
    "TypeParamDecl", "TypeRef", "Block", "VarDecl", "Assign", "While", "For",
    "If", "Return", "Call", "ConstructorCall", "MemberAccess", "BinaryOp",
    "UnaryOp", "NameRef", "IntLit", "LongLit", "DoubleLit", "BoolLit",
    "StringLit", "RangeExpr", "Placeholder", "Index", "NamedArg", "FunRef",
    "This",
})

LITERAL_KINDS = frozenset({"IntLit", "LongLit", "DoubleLit", "BoolLit", "StringLit"})

EXPRESSION_KINDS = LITERAL_KINDS | frozenset({
    "Call", "ConstructorCall", "MemberAccess", "BinaryOp", "UnaryOp",
    "NameRef", "RangeExpr", "Placeholder", "Index", "FunRef", "This",
})

STATEMENT_KINDS = frozenset({"VarDecl", "Assign", "While", "For", "If", "Return"})

DECLARATION_KINDS = frozenset({"ClassDecl", "InterfaceDecl", "FunDecl", "PropertyDecl"})


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int

    def line_col(self, text: str) -> Tuple[int, int]:
        line = text.count("\n", 0, self.start) + 1
        col = self.start - (text.rfind("\n", 0, self.start) + 1) + 1
        return line, col


@dataclass(eq=False)
class Node:
    kind: str
    text: str = ""
    children: List["Node"] = field(default_factory=list)
    flags: FrozenSet[str] = frozenset()
    ty: Any = None
    id: int = -1
    span: Optional[SourceSpan] = None

    def has(self, flag: str) -> bool:
        return flag in self.flags

    def walk(self) -> Iterator["Node"]:
        """Pre-order traversal."""
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def kids(self, *kinds: str) -> List["Node"]:
        return [c for c in self.children if c.kind in kinds]

    def first(self, *kinds: str) -> Optional["Node"]:
        for c in self.children:
            if c.kind in kinds:
                return c
        return None

    # Layout helpers; they encode the table in the module docstring.

    def receiver(self) -> Optional["Node"]:
        if self.kind == "Call":
            return self.children[0] if self.has("recv") else None
        if self.kind in ("MemberAccess", "Index"):
            return self.children[0]
        return None

    def type_args(self) -> List["Node"]:
        if self.kind not in ("Call", "ConstructorCall"):
            return []
        start = 1 if self.has("recv") else 0
        return [c for c in self.children[start:] if c.kind == "TypeRef"]

    def args(self) -> List["Node"]:
        if self.kind in ("Call", "ConstructorCall"):
            start = 1 if self.has("recv") else 0
            return [c for c in self.children[start:] if c.kind != "TypeRef"]
        if self.kind == "Index":
            return self.children[1:]
        return []

    def type_ref(self) -> Optional["Node"]:
        return self.first("TypeRef")

    def initializer(self) -> Optional["Node"]:
        """Initializer of VarDecl/PropertyDecl or default value of a Param."""
        for c in self.children:
            if c.kind != "TypeRef":
                return c
        return None

    def body(self) -> Optional["Node"]:
        return self.first("Block")


def mk(kind: str, text: str = "", children: Iterable[Node] = (), flags: Iterable[str] = (),
       ty: Any = None) -> Node:
    """Create a detached node (id assigned when adopted by a tree)."""
    return Node(kind=kind, text=text, children=list(children), flags=frozenset(flags), ty=ty)


class SyntaxTree:
    """A program: root File node with stable, unique node identifiers."""

    def __init__(self, root: Node, next_id: int = 0):
        self.root = root
        self.next_id = next_id
        if root.id < 0:
            self.adopt(root)

    @classmethod
    def empty(cls) -> "SyntaxTree":
        return cls(mk("File"))

    def fresh_id(self) -> int:
        nid = self.next_id
        self.next_id += 1
        return nid

    def adopt(self, node: Node) -> Node:
        """Give every node of a detached subtree a fresh identifier."""
        for n in node.walk():
            n.id = self.fresh_id()
        return node

    def nodes(self) -> Iterator[Node]:
        return self.root.walk()

    def index(self) -> Dict[int, Node]:
        return {n.id: n for n in self.root.walk()}

    def parents(self) -> Dict[int, Node]:
        out: Dict[int, Node] = {}
        for n in self.root.walk():
            for c in n.children:
                out[c.id] = n
        return out

    def find(self, node_id: int) -> Node:
        for n in self.root.walk():
            if n.id == node_id:
                return n
        raise UnknownNode(node_id)

    def parent_of(self, node_id: int) -> Optional[Node]:
        for n in self.root.walk():
            for c in n.children:
                if c.id == node_id:
                    return n
        if self.root.id == node_id:
            return None
        raise UnknownNode(node_id)

    def copy(self) -> "SyntaxTree":
        return SyntaxTree(copy.deepcopy(self.root), self.next_id)

    def __len__(self) -> int:
        return sum(1 for _ in self.root.walk())


def clone(node: Node) -> Node:
    """Detached deep copy of a subtree (identifiers reset)."""
    out = copy.deepcopy(node)
    for n in out.walk():
        n.id = -1
        n.span = None
    return out


def replace_in_place(tree: SyntaxTree, target: int, replacement: Node) -> Node:
    """Swap `target` for `replacement` inside `tree`; returns the removed node."""
    if tree.root.id == target:
        old = tree.root
        tree.root = replacement
        if replacement.id < 0:
            tree.adopt(replacement)
        return old
    for n in tree.root.walk():
        for i, c in enumerate(n.children):
            if c.id == target:
                if any(r.id < 0 for r in replacement.walk()):
                    tree.adopt(replacement)
                n.children[i] = replacement
                return c
    raise UnknownNode(target)


def replace_node(tree: SyntaxTree, target: int, replacement: Node) -> SyntaxTree:
    """Return a copy of `tree` with node `target` replaced.

    The replacement subtree receives fresh identifiers; every other node keeps
    its identifier.
    """
    out = tree.copy()
    rep = clone(replacement)
    replace_in_place(out, target, rep)
    return out


def structurally_equal(a: Node, b: Node) -> bool:
    if a.kind != b.kind or a.text != b.text or a.flags != b.flags:
        return False
    if str(a.ty) != str(b.ty) if (a.ty is not None or b.ty is not None) else False:
        return False
    if len(a.children) != len(b.children):
        return False
    return all(structurally_equal(x, y) for x, y in zip(a.children, b.children))
