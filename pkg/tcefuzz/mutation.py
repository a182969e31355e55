"""
Mutation phase: turn a program into a typed skeleton and fill its holes.

A share of the expressions of the mutation seed is replaced by typed
placeholders; each placeholder is then filled with a pool expression, a
variable in scope, a literal or a standard-library call of a compatible type.
A fill that breaks typing is rolled back, so every returned program
typechecks. Rounds repeat with a shrinking placeholder ratio.

Usage:
    pool = generation_phase(gen_seed, GenConfig(), rng)
    program, rounds = tce_mutate(mut_seed, gen_seed, pool, MutConfig(), rng)
    for r in rounds:
        print(r.round, r.placeholders, r.filled, r.rolled_back)
"""

import copy
import logging
import random
import time
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .checker import CheckResult, PropRef, Scope, VarRef, check_program
from .errors import BoundUnsatisfiable, ConfigError, DepthExhausted, MergeConflict, NoCandidate, Untypeable
from .generation import OPERATOR_SYNTAX, ExprPool, GenConfig, Generator
from .index import ProgramIndex
from .stdlib import StdlibRegistry, default_registry
from .syntax import LITERAL_KINDS, Node, SyntaxTree, mk, replace_node
from .tltypes import UNIT, ErrorType, Type, TypedExpr
from .transform import anonymize_with_map, merge_programs

logger = logging.getLogger(__name__)

HOLE_KINDS = LITERAL_KINDS | frozenset({
    "NameRef", "Call", "ConstructorCall", "MemberAccess", "BinaryOp", "UnaryOp", "RangeExpr", "Index",
})
FILL_ERRORS = (NoCandidate, DepthExhausted, BoundUnsatisfiable)


@dataclass
class MutConfig:
    ratio: float = 0.6              # r0
    shrink: float = 0.5             # rho
    max_iterations: int = 3
    time_limit: float = 2.0         # seconds per program
    variety_rate: float = 0.2
    gen: GenConfig = field(default_factory=GenConfig)

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigError(f"ratio must be in (0, 1], got {self.ratio}")
        if not 0.0 < self.shrink < 1.0:
            raise ConfigError(f"shrink must be in (0, 1), got {self.shrink}")
        if self.max_iterations < 0 or self.time_limit <= 0:
            raise ConfigError("max_iterations must be >= 0 and time_limit > 0")
        if not 0.0 <= self.variety_rate <= 1.0:
            raise ConfigError("variety_rate must be in [0, 1]")


@dataclass
class RoundStats:
    round: int
    ratio: float
    placeholders: int
    filled: int
    rolled_back: int

    def to_json(self) -> Dict[str, object]:
        return {"round": self.round, "ratio": round(self.ratio, 6), "placeholders": self.placeholders,
                "filled": self.filled, "rolled_back": self.rolled_back}


@dataclass
class TypedSkeleton:
    """A program with typed holes.

    Placeholder nodes take over the identifier of the expression they
    replace, so `originals[id]` restores it and scopes computed on the
    original program still apply.
    """

    tree: SyntaxTree
    holes: Dict[int, Type] = field(default_factory=dict)
    originals: Dict[int, Node] = field(default_factory=dict)
    lvalues: FrozenSet[int] = frozenset()

    def __len__(self) -> int:
        return len(self.holes)

    def erase(self) -> SyntaxTree:
        """The program with every placeholder put back to its original expression."""
        out = self.tree.copy()
        for n in out.nodes():
            for i, c in enumerate(n.children):
                if c.kind == "Placeholder" and c.id in self.originals:
                    n.children[i] = copy.deepcopy(self.originals[c.id])
        return out


# -- skeletons ------------------------------------------------------------------


def _writable(target: Node, result: CheckResult) -> bool:
    ref = result.refs.get(target.id)
    if isinstance(ref, VarRef):
        return ref.var.mutable
    if isinstance(ref, PropRef):
        return ref.prop.mutable
    return False


def eligible_holes(tree: SyntaxTree, result: CheckResult,
                   roots: Optional[Set[int]] = None) -> List[Tuple[Node, Type, bool]]:
    """Expression nodes that may become placeholders, with type and lvalue flag.

    Declaration names, type references, loop variables, supertype calls and
    expression statements are never holes; assignment targets only when
    writable. With `roots`, only nodes under those top-level items count.
    """
    out = []
    items = tree.root.children if roots is None else [n for n in tree.root.children if n.id in roots]
    for item in items:
        parents = {c.id: n for n in item.walk() for c in n.children}
        for n in item.walk():
            if n.kind not in HOLE_KINDS or n is item:
                continue
            ty = result.types.get(n.id)
            if ty is None or ty == UNIT or isinstance(ty, ErrorType):
                continue
            parent = parents.get(n.id)
            if parent is None or parent.kind in ("ClassDecl", "InterfaceDecl", "Block", "File", "TypeRef"):
                continue
            lvalue = parent.kind == "Assign" and parent.children[0] is n
            if lvalue and (n.kind != "NameRef" or not _writable(n, result)):
                continue
            out.append((n, ty, lvalue))
    return out


def select_placeholders(tree: SyntaxTree, ratio: float, rng: random.Random,
                        result: Optional[CheckResult] = None, limit: Optional[int] = None,
                        roots: Optional[Set[int]] = None) -> TypedSkeleton:
    """Replace a random `ratio` share of the eligible expressions by typed holes.

    Args:
        tree: a typechecking program (left unchanged)
        ratio: share of eligible nodes to sample, 0 gives an empty skeleton
        result: check_program(tree), when the caller already has it
        limit: upper bound on the number of holes
        roots: restrict holes to these top-level items

    Raises:
        Untypeable: when the program does not typecheck.
    """
    result = result or check_program(tree)
    if not result.ok:
        raise Untypeable(f"cannot build a skeleton of an ill-typed program: {result.errors[0].message}")
    eligible = eligible_holes(tree, result, roots)
    k = int(ratio * len(eligible) + 0.5) if ratio > 0 else 0
    if limit is not None:
        k = min(k, limit)
    chosen = rng.sample(eligible, k) if k else []
    chosen_ids = {n.id for n, _, _ in chosen}

    out = tree.copy()
    nodes = out.index()
    parents = out.parents()

    def nested(nid: int) -> bool:
        p = parents.get(nid)
        while p is not None:
            if p.id in chosen_ids:
                return True
            p = parents.get(p.id)
        return False

    skel = TypedSkeleton(out)
    lvalues = set()
    for n, ty, lvalue in sorted(chosen, key=lambda c: c[0].id):
        if nested(n.id):
            continue
        original = nodes[n.id]
        parent = parents[n.id]
        ph = mk("Placeholder", ty=ty)
        ph.id = original.id
        parent.children[parent.children.index(original)] = ph
        skel.holes[ph.id] = ty
        skel.originals[ph.id] = original
        if lvalue:
            lvalues.add(ph.id)
    skel.lvalues = frozenset(lvalues)
    logger.debug("skeleton: %d of %d eligible expressions", len(skel), len(eligible))
    return skel


# -- filling --------------------------------------------------------------------


def gen_variety(gen: Generator, target: Type) -> Optional[TypedExpr]:
    """An operator-composed stdlib expression of `target` (`xs + ys`, `a until b`)."""
    ops = [c for c in gen.stdlib_returning(target, gen.cfg.max_call_depth)
           if c.name in OPERATOR_SYNTAX and c.name != "get"]
    if not ops:
        return None
    callee = gen.rng.choice(ops)
    saved = gen.cfg
    gen.cfg = replace(saved, operator_syntax_rate=1.0)
    try:
        return gen.gen_call(callee)
    except FILL_ERRORS:
        return None
    finally:
        gen.cfg = saved


def gen_ph_expr(ty: Type, pool: ExprPool, scope: Scope, cfg: MutConfig, rng: random.Random,
                index: ProgramIndex, registry: Optional[StdlibRegistry] = None,
                lvalue: bool = False) -> TypedExpr:
    """An expression to fill a hole of type `ty`.

    Raises:
        NoCandidate: if nothing of a compatible type can be produced.
    """
    if lvalue:
        found = [v for v in scope.variables() if v.mutable and v.ty == ty]
        if not found:
            raise NoCandidate(f"no writable variable of type {ty}")
        v = rng.choice(found)
        return TypedExpr(mk("NameRef", v.name), v.ty, 0, "variable")
    gen = Generator(index, cfg.gen, rng, registry, pool, scope)
    if rng.random() < cfg.variety_rate:
        te = gen_variety(gen, ty)
        if te is not None:
            return te
    try:
        return gen.gen_value_of_type(ty)
    except DepthExhausted as e:
        raise NoCandidate(str(e))


def fill_skeleton(skel: TypedSkeleton, result: CheckResult, pool: ExprPool, cfg: MutConfig,
                  rng: random.Random, registry: Optional[StdlibRegistry] = None,
                  deadline: Optional[float] = None) -> Tuple[SyntaxTree, int, int]:
    """Fill holes one by one, rechecking the whole program after each fill.

    A hole whose fill fails or breaks typing keeps its original expression.

    Returns:
        (program, filled, rolled_back)
    """
    tree = skel.erase()
    index = result.index
    filled = rolled_back = 0
    for hole, ty in skel.holes.items():
        if deadline is not None and time.monotonic() > deadline:
            logger.debug("time guard: %d holes left unfilled", len(skel) - filled - rolled_back)
            break
        try:
            te = gen_ph_expr(ty, pool, result.scope_at(hole), cfg, rng, index, registry,
                             lvalue=hole in skel.lvalues)
        except FILL_ERRORS as e:
            logger.debug("hole %d (%s) kept: %s", hole, ty, e)
            rolled_back += 1
            continue
        if not index.is_subtype(te.ty, ty):
            logger.warning("fill of type %s does not fit hole %d of type %s", te.ty, hole, ty)
            rolled_back += 1
            continue
        candidate = replace_node(tree, hole, te.expr)
        check = check_program(candidate, registry)
        if check.ok:
            tree = candidate
            filled += 1
        else:
            logger.debug("hole %d rolled back: %s", hole, check.errors[0].message)
            rolled_back += 1
    return tree, filled, rolled_back


# -- rounds ---------------------------------------------------------------------


def iterate_mutation_with_stats(program: SyntaxTree, pool: ExprPool, cfg: Optional[MutConfig] = None,
                                rng: Optional[random.Random] = None,
                                registry: Optional[StdlibRegistry] = None,
                                roots: Optional[Set[int]] = None) -> Tuple[SyntaxTree, List[RoundStats]]:
    """Run up to cfg.max_iterations mutation rounds with ratio r0 * rho**k.

    The placeholder count of a round never exceeds rho times the count of
    the round before. The time guard stops at the last committed program.

    Raises:
        Untypeable: when `program` does not typecheck.
    """
    cfg = cfg or MutConfig()
    rng = rng or random.Random(0)
    result = check_program(program, registry)
    if not result.ok:
        raise Untypeable(f"cannot mutate an ill-typed program: {result.errors[0].message}")
    deadline = time.monotonic() + cfg.time_limit
    tree = program
    stats: List[RoundStats] = []
    previous: Optional[int] = None
    for k in range(cfg.max_iterations):
        if time.monotonic() > deadline:
            logger.debug("time guard fired before round %d", k)
            break
        ratio = cfg.ratio * cfg.shrink ** k
        limit = None if previous is None else int(cfg.shrink * previous)
        skel = select_placeholders(tree, ratio, rng, result, limit, roots)
        if not skel.holes:
            stats.append(RoundStats(k, ratio, 0, 0, 0))
            break
        tree, filled, rolled_back = fill_skeleton(skel, result, pool, cfg, rng, registry, deadline)
        stats.append(RoundStats(k, ratio, len(skel), filled, rolled_back))
        previous = len(skel)
        result = check_program(tree, registry)
    return tree, stats


def iterate_mutation(program: SyntaxTree, pool: ExprPool, cfg: Optional[MutConfig] = None,
                     rng: Optional[random.Random] = None,
                     registry: Optional[StdlibRegistry] = None) -> SyntaxTree:
    return iterate_mutation_with_stats(program, pool, cfg, rng, registry)[0]


def stdlib_names(registry: Optional[StdlibRegistry] = None) -> Set[str]:
    """Class, function and member names declared by the stdlib."""
    registry = registry or default_registry()
    names = set(registry.index.functions)
    for info in registry.classes():
        names.add(info.name)
        names.update(info.props)
        names.update(info.methods)
    return names


def merge_seeds(mut_seed: SyntaxTree, gen_seed: SyntaxTree, pool: ExprPool, rng: random.Random,
                registry: Optional[StdlibRegistry] = None) -> Tuple[SyntaxTree, ExprPool, Set[int]]:
    """Anonymize the generation seed and prepend it to the mutation seed.

    Returns:
        (merged program, pool renamed to match, ids of the mutation seed's items)
        When the merge does not typecheck the mutation seed alone is returned
        with an empty pool.
    """
    salt = rng.randrange(1 << 30)
    anon, names = anonymize_with_map(gen_seed, salt, check_program(gen_seed, registry))
    try:
        merged = merge_programs(anon, mut_seed)
    except MergeConflict as e:
        logger.debug("merge failed: %s", e)
        merged = None
    if merged is None or not check_program(merged, registry).ok:
        logger.debug("merged program does not typecheck; mutating the seed alone")
        alone = mut_seed.copy()
        return alone, ExprPool(), {n.id for n in alone.root.children}
    own = len(mut_seed.root.children)
    roots = {n.id for n in merged.root.children[len(merged.root.children) - own:]}
    return merged, pool.renamed(names, keep=stdlib_names(registry)), roots


def tce_mutate(mut_seed: SyntaxTree, gen_seed: SyntaxTree, pool: ExprPool,
               cfg: Optional[MutConfig] = None, rng: Optional[random.Random] = None,
               registry: Optional[StdlibRegistry] = None) -> Tuple[SyntaxTree, List[RoundStats]]:
    """Merge the seeds, then mutate the mutation seed's part in rounds."""
    rng = rng or random.Random(0)
    for seed in (mut_seed, gen_seed):
        result = check_program(seed, registry)
        if not result.ok:
            raise Untypeable(f"seed does not typecheck: {result.errors[0].message}")
    merged, renamed, roots = merge_seeds(mut_seed, gen_seed, pool, rng, registry)
    return iterate_mutation_with_stats(merged, renamed, cfg, rng, registry, roots)


def mutation_phase(mut_seed: SyntaxTree, gen_seed: SyntaxTree, pool: ExprPool,
                   cfg: Optional[MutConfig] = None, rng: Optional[random.Random] = None,
                   registry: Optional[StdlibRegistry] = None) -> SyntaxTree:
    """One mutation round over the merged seeds; the result always typechecks."""
    cfg = replace(cfg or MutConfig(), max_iterations=1)
    return tce_mutate(mut_seed, gen_seed, pool, cfg, rng, registry)[0]
