"""
Skeletal program enumeration over variable names.

Every variable declaration and every variable use of a seed becomes a hole;
instances fill the holes with names so that each use sees a declared
variable. Instances that only differ by a consistent renaming of the
declared variables are emitted once.

Usage:
    for program in spe_enumerate(seed_tree, limit=100, rng=random.Random(1)):
        print(print_tree(program))
"""

import logging
import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple

from .checker import CheckResult, VarRef, check_program
from .errors import Untypeable
from .stdlib import StdlibRegistry
from .syntax import Node, SyntaxTree

logger = logging.getLogger(__name__)

MAX_SEARCH_STEPS = 200_000

# scope events, in the order names become visible
PUSH, POP, FIXED, DECL, USE = "push", "pop", "fixed", "decl", "use"

Event = Tuple[str, object]
Frames = Tuple[FrozenSet[str], ...]


@dataclass(frozen=True)
class CanonicalForm:
    """Hole names with renamable ones numbered by first occurrence."""

    labels: Tuple[str, ...]

    @classmethod
    def of(cls, names: Sequence[str], renamable: Set[str]) -> "CanonicalForm":
        numbering: Dict[str, str] = {}
        labels = []
        for n in names:
            if n in renamable:
                numbering.setdefault(n, f"#{len(numbering)}")
                labels.append(numbering[n])
            else:
                labels.append(n)
        return cls(tuple(labels))


@dataclass
class VarSkeleton:
    tree: SyntaxTree
    holes: Tuple[int, ...]                      # node ids, in scope-event order
    decl_holes: FrozenSet[int]
    renamable: Tuple[str, ...]                  # names declared through holes
    fixed: FrozenSet[str]                       # parameter and loop variable names
    events: Tuple[Event, ...] = field(default_factory=tuple)

    def original(self) -> Tuple[str, ...]:
        nodes = self.tree.index()
        return tuple(nodes[h].text for h in self.holes)

    def instantiate(self, names: Sequence[str]) -> SyntaxTree:
        out = self.tree.copy()
        nodes = out.index()
        for hole, name in zip(self.holes, names):
            nodes[hole].text = name
        return out

    def canonical(self, names: Sequence[str]) -> CanonicalForm:
        return CanonicalForm.of(names, set(self.renamable))


# -- skeleton -------------------------------------------------------------------


class _EventBuilder:
    """Linearize a program into scope events.

    Top-level statements come first; function and class bodies follow, so
    every global is visible inside them.
    """

    def __init__(self, result: CheckResult, renamable: Set[str], fixed: Set[str]):
        self.result = result
        self.renamable = renamable
        self.fixed = fixed
        self.events: List[Event] = []

    def build(self, root: Node) -> List[Event]:
        self.events.append((PUSH, None))
        deferred = []
        for item in root.children:
            if item.kind in ("FunDecl", "ClassDecl", "InterfaceDecl"):
                deferred.append(item)
            else:
                self.node(item)
        for item in deferred:
            self.node(item)
        self.events.append((POP, None))
        return self.events

    def node(self, n: Node):
        k = n.kind
        if k == "VarDecl":
            for c in n.children:
                self.node(c)
            if n.text in self.renamable:
                self.events.append((DECL, n.id))
            else:
                self.events.append((FIXED, n.text))
        elif k == "NameRef":
            ref = self.result.refs.get(n.id)
            if isinstance(ref, VarRef) and ref.var.kind != "property":
                self.events.append((USE, n.id))
        elif k == "Block":
            self.scoped(n.children)
        elif k == "For":
            self.node(n.children[0])
            self.events.append((PUSH, None))
            self.events.append((FIXED, n.text))
            self.node(n.children[1])
            self.events.append((POP, None))
        elif k in ("FunDecl", "ClassDecl", "InterfaceDecl"):
            self.events.append((PUSH, None))
            for c in n.children:
                if c.kind == "Param":
                    for d in c.children[1:]:
                        self.node(d)
                    self.events.append((FIXED, c.text))
                else:
                    self.node(c)
            self.events.append((POP, None))
        else:
            for c in n.children:
                self.node(c)

    def scoped(self, children: Sequence[Node]):
        self.events.append((PUSH, None))
        for c in children:
            self.node(c)
        self.events.append((POP, None))


def var_skeleton(seed: SyntaxTree, result: Optional[CheckResult] = None) -> VarSkeleton:
    """Turn variable declarations and uses of a typechecking seed into holes.

    Declarations whose name is also a parameter or loop variable name keep
    their name, so renamable and fixed names never overlap.
    """
    result = result or check_program(seed)
    if not result.ok:
        raise Untypeable(f"seed does not typecheck: {result.errors[0].message}")
    fixed: Set[str] = set()
    for n in seed.nodes():
        if n.kind == "Param":
            fixed.add(n.text)
        elif n.kind == "For":
            fixed.add(n.text)
    renamable: List[str] = []
    for n in seed.nodes():
        if n.kind == "VarDecl" and n.text not in fixed and n.text not in renamable:
            renamable.append(n.text)
    events = _EventBuilder(result, set(renamable), fixed).build(seed.root)
    holes = tuple(ev[1] for ev in events if ev[0] in (DECL, USE))
    decls = frozenset(ev[1] for ev in events if ev[0] == DECL)
    tree = seed.copy()
    return VarSkeleton(tree, holes, decls, tuple(renamable), frozenset(fixed), tuple(events))


def is_scope_safe(skel: VarSkeleton, names: Sequence[str]) -> bool:
    """Each use names a visible variable; each declaration a fresh renamable name."""
    assigned = dict(zip(skel.holes, names))
    renamable = set(skel.renamable)
    frames: List[Set[str]] = []
    for kind, arg in skel.events:
        if kind == PUSH:
            frames.append(set())
        elif kind == POP:
            frames.pop()
        elif kind == FIXED:
            frames[-1].add(arg)
        else:
            name = assigned[arg]
            visible = set().union(*frames)
            if kind == DECL:
                if name not in renamable or name in visible:
                    return False
                frames[-1].add(name)
            elif name not in visible:
                return False
    return True


# -- enumeration -----------------------------------------------------------------


class _Search:
    def __init__(self, skel: VarSkeleton, rng: random.Random):
        self.skel = skel
        self.rng = rng
        self.steps = 0

    def run(self) -> Iterator[Dict[int, str]]:
        yield from self.visit(0, (), {}, 0)

    def visit(self, i: int, frames: Frames, assigned: Dict[int, str], used: int) -> Iterator[Dict[int, str]]:
        events = self.skel.events
        while i < len(events) and events[i][0] in (PUSH, POP, FIXED):
            kind, arg = events[i]
            if kind == PUSH:
                frames = frames + (frozenset(),)
            elif kind == POP:
                frames = frames[:-1]
            else:
                frames = frames[:-1] + (frames[-1] | {arg},)
            i += 1
        if i == len(events):
            yield dict(assigned)
            return
        self.steps += 1
        if self.steps > MAX_SEARCH_STEPS:
            return
        kind, hole = events[i]
        visible = frozenset().union(*frames)
        renamable = self.skel.renamable
        if kind == DECL:
            candidates = [n for n in renamable[:used] if n not in visible]
            if used < len(renamable):
                candidates.append(renamable[used])
        else:
            candidates = sorted(visible)
        self.rng.shuffle(candidates)
        for name in candidates:
            fresh = used < len(renamable) and name == renamable[used]
            nxt = frames
            if kind == DECL:
                nxt = frames[:-1] + (frames[-1] | {name},)
            assigned[hole] = name
            yield from self.visit(i + 1, nxt, assigned, used + 1 if fresh else used)
            del assigned[hole]


def enumerate_names(skel: VarSkeleton, rng: random.Random) -> Iterator[Tuple[str, ...]]:
    """Scope-safe hole fillings, one per renaming class of the declared variables."""
    for assigned in _Search(skel, rng).run():
        yield tuple(assigned[h] for h in skel.holes)


def spe_enumerate(seed: SyntaxTree, limit: int, rng: Optional[random.Random] = None,
                  registry: Optional[StdlibRegistry] = None) -> Iterator[SyntaxTree]:
    """Yield up to `limit` skeleton instances of `seed`.

    Raises:
        Untypeable: when the seed does not typecheck.
    """
    rng = rng or random.Random(0)
    skel = var_skeleton(seed, check_program(seed, registry))
    logger.debug("spe: %d holes, %d renamable names", len(skel.holes), len(skel.renamable))
    count = 0
    for names in enumerate_names(skel, rng):
        if count >= limit:
            return
        count += 1
        yield skel.instantiate(names)
