"""
Comparison fuzzers: plain random mutation and grammar-based generation.

Neither looks at types, so most of their programs fail to typecheck; they
share the tree, printer and checker with the type-centric pipeline so the
campaign can count them the same way.

Usage:
    mutant = mutate_random(seed_tree, random.Random(3))
    program = grammar_generate(GrammarConfig(max_depth=4), random.Random(3))
"""

import logging
import random
from dataclasses import dataclass
from typing import Callable as Fn, List, Optional, Tuple

from .errors import ConfigError
from .stdlib import INT_BOUNDARY, STRING_ALPHABET
from .syntax import (
    DECLARATION_KINDS, EXPRESSION_KINDS, LITERAL_KINDS, STATEMENT_KINDS, Node, SyntaxTree, clone, mk,
)

logger = logging.getLogger(__name__)

EDITS = ("swap", "delete", "duplicate", "perturb")


# -- random mutation ------------------------------------------------------------


def _expressions(tree: SyntaxTree) -> List[Tuple[Node, Node, int]]:
    """(parent, node, child index) for expressions that may move; assignment targets stay."""
    out = []
    for parent in tree.nodes():
        for i, c in enumerate(parent.children):
            if c.kind not in EXPRESSION_KINDS or parent.kind in ("Block", "File", "ClassDecl"):
                continue
            if parent.kind == "Assign" and i == 0:
                continue
            out.append((parent, c, i))
    return out


def _statements(tree: SyntaxTree) -> List[Tuple[Node, int]]:
    """(parent, child index) of block items; top-level declarations count as items of the file."""
    out = []
    for parent in tree.nodes():
        if parent.kind not in ("Block", "File"):
            continue
        for i, c in enumerate(parent.children):
            if c.kind in STATEMENT_KINDS or c.kind in EXPRESSION_KINDS or c.kind in DECLARATION_KINDS:
                out.append((parent, i))
    return out


def _contains(outer: Node, inner: Node) -> bool:
    return any(n is inner for n in outer.walk())


def _swap(tree: SyntaxTree, rng: random.Random) -> bool:
    exprs = _expressions(tree)
    if len(exprs) < 2:
        return False
    a = rng.choice(exprs)
    pool = [e for e in exprs if e[1] is not a[1] and not _contains(a[1], e[1]) and not _contains(e[1], a[1])]
    if not pool:
        return False
    b = rng.choice(pool)
    (pa, na, ia), (pb, nb, ib) = a, b
    pa.children[ia], pb.children[ib] = nb, na
    return True


def _delete(tree: SyntaxTree, rng: random.Random) -> bool:
    stmts = _statements(tree)
    if not stmts:
        return False
    parent, i = rng.choice(stmts)
    del parent.children[i]
    return True


def _duplicate(tree: SyntaxTree, rng: random.Random) -> bool:
    stmts = _statements(tree)
    if not stmts:
        return False
    parent, i = rng.choice(stmts)
    parent.children.insert(i + 1, tree.adopt(clone(parent.children[i])))
    return True


def perturb_literal(node: Node, rng: random.Random):
    """Overwrite a literal with a random literal of any primitive kind."""
    node.kind = rng.choice(sorted(LITERAL_KINDS))
    if node.kind == "IntLit":
        node.text = str(rng.choice(INT_BOUNDARY) if rng.random() < 0.3 else rng.randint(-100, 100))
    elif node.kind == "LongLit":
        node.text = str(rng.randint(-100, 100))
    elif node.kind == "DoubleLit":
        node.text = f"{rng.uniform(-100, 100):.2f}"
    elif node.kind == "BoolLit":
        node.text = "false" if node.text == "true" else "true"
    elif node.kind == "StringLit":
        node.text = "".join(rng.choice(STRING_ALPHABET) for _ in range(rng.randint(0, 6)))


def _perturb(tree: SyntaxTree, rng: random.Random) -> bool:
    lits = [n for n in tree.nodes() if n.kind in LITERAL_KINDS]
    if not lits:
        return False
    perturb_literal(rng.choice(lits), rng)
    return True


_EDIT_FUNCS = {"swap": _swap, "delete": _delete, "duplicate": _duplicate, "perturb": _perturb}


def mutate_random(seed: SyntaxTree, rng: random.Random) -> SyntaxTree:
    """Apply one random edit to a copy of `seed`; types are not consulted.

    Edits that do not apply to the program are skipped in favour of the
    remaining ones; a program none applies to comes back unchanged.
    """
    out = seed.copy()
    edits = list(EDITS)
    rng.shuffle(edits)
    for name in edits:
        if _EDIT_FUNCS[name](out, rng):
            logger.debug("mutate: %s", name)
            return out
    return out


def mutate_burst(seed: SyntaxTree, rng: random.Random, edits: int = 3) -> SyntaxTree:
    tree = seed
    for _ in range(edits):
        tree = mutate_random(tree, rng)
    return tree


# -- grammar generation ----------------------------------------------------------


@dataclass
class GrammarConfig:
    max_depth: int = 5
    soft_depth: int = 3
    max_items: int = 5
    max_statements: int = 4
    max_args: int = 3
    variables: Tuple[str, ...] = ("a", "b", "c", "x", "y")
    functions: Tuple[str, ...] = ("f", "g", "h")
    classes: Tuple[str, ...] = ("A", "B", "C")
    types: Tuple[str, ...] = ("Int", "Long", "Double", "Boolean", "String", "A", "B")

    def __post_init__(self):
        if self.max_depth < 1 or self.soft_depth < 0 or self.max_items < 0:
            raise ConfigError("grammar limits must be positive")


class GrammarGenerator:
    """Random derivations of the TL grammar.

    Each production carries its arity; from `soft_depth` on a production is
    drawn with weight 1 / (1 + arity), and at `max_depth` only leaves remain.
    """

    def __init__(self, cfg: GrammarConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng

    def pick(self, productions: List[Tuple[int, Fn[[int], Node]]], depth: int) -> Node:
        if depth >= self.cfg.max_depth:
            productions = [p for p in productions if p[0] == 0] or productions[:1]
        if depth >= self.cfg.soft_depth:
            weights = [1.0 / (1 + arity) for arity, _ in productions]
        else:
            weights = [1.0] * len(productions)
        _, build = self.rng.choices(productions, weights=weights)[0]
        return build(depth)

    def count(self, limit: int, depth: int) -> int:
        if depth >= self.cfg.max_depth:
            return 0
        return self.rng.randint(0, limit)

    # -- names and types ----------------------------------------------------

    def var(self) -> str:
        return self.rng.choice(self.cfg.variables)

    def type_ref(self, depth: int = 0) -> Node:
        if depth < 1 and self.rng.random() < 0.15:
            return mk("TypeRef", "List", [self.type_ref(depth + 1)])
        return mk("TypeRef", self.rng.choice(self.cfg.types))

    # -- expressions ---------------------------------------------------------

    def expr(self, depth: int) -> Node:
        return self.pick([
            (0, lambda d: mk("IntLit", str(self.rng.randint(-10, 100)))),
            (0, lambda d: mk("BoolLit", self.rng.choice(("true", "false")))),
            (0, lambda d: mk("StringLit", self.rng.choice(("", "a", "tl")))),
            (0, lambda d: mk("NameRef", self.var())),
            (1, lambda d: mk("UnaryOp", self.rng.choice(("-", "!")), [self.expr(d + 1)])),
            (1, lambda d: mk("MemberAccess", self.var(), [self.expr(d + 1)])),
            (2, lambda d: mk("BinaryOp", self.rng.choice(("+", "-", "*", "<", "==", "&&")),
                             [self.expr(d + 1), self.expr(d + 1)])),
            (2, lambda d: mk("RangeExpr", self.rng.choice(("..", "until")), [self.expr(d + 1), self.expr(d + 1)])),
            (2, lambda d: mk("Index", "", [self.expr(d + 1), self.expr(d + 1)])),
            (2, self.call),
            (2, self.constructor_call),
        ], depth)

    def args(self, depth: int) -> List[Node]:
        return [self.expr(depth + 1) for _ in range(self.count(self.cfg.max_args, depth))]

    def call(self, depth: int) -> Node:
        name = self.rng.choice(self.cfg.functions)
        if self.rng.random() < 0.4:
            return mk("Call", name, [self.expr(depth + 1)] + self.args(depth), ["recv"])
        return mk("Call", name, self.args(depth))

    def constructor_call(self, depth: int) -> Node:
        return mk("ConstructorCall", self.rng.choice(self.cfg.classes), self.args(depth))

    # -- statements ----------------------------------------------------------

    def block(self, depth: int) -> Node:
        return mk("Block", children=[self.statement(depth + 1)
                                     for _ in range(self.count(self.cfg.max_statements, depth))])

    def var_decl(self, depth: int) -> Node:
        kids = [self.type_ref()] if self.rng.random() < 0.3 else []
        return mk("VarDecl", self.var(), kids + [self.expr(depth + 1)], [self.rng.choice(("val", "var"))])

    def statement(self, depth: int) -> Node:
        return self.pick([
            (1, self.var_decl),
            (1, lambda d: mk("Assign", self.rng.choice(("=", "+=")), [mk("NameRef", self.var()), self.expr(d + 1)])),
            (1, lambda d: mk("Return", children=[self.expr(d + 1)])),
            (1, self.call),
            (2, lambda d: mk("While", children=[self.expr(d + 1), self.block(d)])),
            (2, lambda d: mk("For", self.var(), [self.expr(d + 1), self.block(d)])),
            (2, lambda d: mk("If", children=[self.expr(d + 1), self.block(d)])),
        ], depth)

    # -- declarations --------------------------------------------------------

    def param(self, ctor: bool) -> Node:
        flags = [self.rng.choice(("val", "var"))] if ctor and self.rng.random() < 0.7 else []
        return mk("Param", self.var(), [self.type_ref()], flags)

    def fun_decl(self, depth: int) -> Node:
        params = [self.param(False) for _ in range(self.count(self.cfg.max_args, depth))]
        ret = [self.type_ref()] if self.rng.random() < 0.5 else []
        return mk("FunDecl", self.rng.choice(self.cfg.functions), params + ret + [self.block(depth)])

    def class_decl(self, depth: int) -> Node:
        params = [self.param(True) for _ in range(self.count(2, depth))]
        members: List[Node] = []
        for _ in range(self.count(2, depth)):
            if self.rng.random() < 0.5:
                members.append(mk("PropertyDecl", self.var(), [self.type_ref(), self.expr(depth + 1)],
                                  [self.rng.choice(("val", "var"))]))
            else:
                members.append(self.fun_decl(depth + 1))
        mods = [self.rng.choice(("open", "abstract"))] if self.rng.random() < 0.3 else []
        return mk("ClassDecl", self.rng.choice(self.cfg.classes), params + members, mods)

    def item(self, depth: int) -> Node:
        return self.pick([
            (0, lambda d: mk("VarDecl", self.var(), [mk("IntLit", str(self.rng.randint(0, 9)))], ["val"])),
            (1, self.var_decl),
            (2, self.fun_decl),
            (3, self.class_decl),
            (1, self.statement),
        ], depth)

    def program(self) -> SyntaxTree:
        n = self.rng.randint(0, 1) if self.cfg.max_depth <= 1 else self.rng.randint(1, max(1, self.cfg.max_items))
        return SyntaxTree(mk("File", children=[self.item(0) for _ in range(n)]))


def grammar_generate(cfg: Optional[GrammarConfig] = None, rng: Optional[random.Random] = None) -> SyntaxTree:
    """One random derivation of the grammar; parses by construction."""
    return GrammarGenerator(cfg or GrammarConfig(), rng or random.Random(0)).program()
