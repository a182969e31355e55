"""
Whole-program rewrites: name anonymization and seed merging.

anonymize_names() renames user declarations to `name_xxxxxxxx`, where the
suffix is a keyed blake2b digest of (name, salt). Members are renamed by name,
so overriding declarations stay consistent. Left alone:
    main                    the entry point
    stdlib member names     overrides of toString, compareTo, size, ...
    operator/infix members  resolved by operator syntax
    constructor parameters  referenced by named arguments
    locals and parameters   invisible outside their body

merge_programs() puts the declarations of the generation seed in front of the
mutation seed. The mutation seed keeps its entry point (top-level statements
and main); the generation seed's is kept only when the other has none.
"""

import hashlib
import logging
from typing import Dict, Optional, Set, Tuple

from .checker import CallRef, CheckResult, PropRef, VarRef, check_program
from .errors import MergeConflict
from .index import FunInfo
from .syntax import Node, SyntaxTree, clone, mk

logger = logging.getLogger(__name__)

TOP_DECLS = ("ClassDecl", "InterfaceDecl", "FunDecl", "VarDecl")


def fresh_name(name: str, salt: int, taken: Set[str] = frozenset()) -> str:
    key = str(salt).encode("utf-8")[:64]
    size = 4
    while True:
        digest = hashlib.blake2b(name.encode("utf-8"), key=key, digest_size=size).hexdigest()
        candidate = f"{name}_{digest}"
        if candidate not in taken:
            return candidate
        size += 1


class _Renamer:
    def __init__(self, tree: SyntaxTree, result: CheckResult, salt: int):
        self.tree = tree
        self.result = result
        self.salt = salt
        index = result.index
        self.top_ids = {n.id for n in tree.root.children}
        taken = {n.text for n in tree.nodes() if n.text}
        self.classes: Dict[str, str] = {}
        self.functions: Dict[str, str] = {}
        self.globals: Dict[str, str] = {}
        self.members: Dict[str, str] = {}
        for name in index.user_class_order:
            self.classes[name] = fresh_name(name, salt, taken)
        for f in index.user_function_order:
            if f.name != "main":
                self.functions[f.name] = fresh_name(f.name, salt, taken)
        for name in index.globals:
            self.globals[name] = fresh_name(name, salt, taken)
        keep = self._stdlib_member_names()
        for name in index.user_class_order:
            info = index.classes[name]
            for p in info.ctor_nodes:
                keep.add(p.text)
            for funs in info.methods.values():
                for f in funs:
                    if f.node.has("operator") or f.node.has("infix"):
                        keep.add(f.name)
        for name in index.user_class_order:
            info = index.classes[name]
            for member in list(info.props) + list(info.methods):
                if member not in keep:
                    self.members[member] = fresh_name(member, salt, taken)

    def _stdlib_member_names(self) -> Set[str]:
        names: Set[str] = set()
        for info in self.result.index.classes.values():
            if info.stdlib:
                names.update(info.props)
                names.update(info.methods)
        return names

    def _fun_name(self, f: FunInfo) -> Optional[str]:
        if f.stdlib:
            return None
        if f.owner is None:
            return self.functions.get(f.name)
        return self.members.get(f.name)

    def new_name(self, node: Node) -> Optional[str]:
        k = node.kind
        refs = self.result.refs
        if k in ("ClassDecl", "InterfaceDecl", "ConstructorCall", "TypeRef"):
            return self.classes.get(node.text)
        if k == "FunDecl":
            if node.id in self.top_ids:
                return self.functions.get(node.text)
            return self.members.get(node.text)
        if k == "PropertyDecl":
            return self.members.get(node.text)
        if k == "VarDecl":
            ref = refs.get(node.id)
            if isinstance(ref, VarRef) and ref.var.kind == "global":
                return self.globals.get(node.text)
            return None
        ref = refs.get(node.id)
        if isinstance(ref, VarRef):
            return self.globals.get(node.text) if ref.var.kind == "global" else None
        if isinstance(ref, PropRef):
            return None if ref.prop.stdlib else self.members.get(node.text)
        if isinstance(ref, CallRef):
            if ref.kind == "funvar":
                var = ref.target
                if var.kind == "global":
                    return self.globals.get(node.text)
                if var.kind == "property":
                    return self.members.get(node.text)
                return None
            if isinstance(ref.target, FunInfo) and not ref.operator_syntax:
                return self._fun_name(ref.target)
        return None

    def apply(self) -> Dict[str, str]:
        renamed = {}
        for node in list(self.tree.nodes()):
            if node.kind in ("Call", "NameRef", "MemberAccess", "FunRef", "ConstructorCall", "TypeRef",
                             "ClassDecl", "InterfaceDecl", "FunDecl", "PropertyDecl", "VarDecl"):
                new = self.new_name(node)
                if new is not None:
                    renamed[node.text] = new
                    node.text = new
        return renamed


def anonymize_with_map(tree: SyntaxTree, salt: int,
                       result: Optional[CheckResult] = None) -> Tuple[SyntaxTree, Dict[str, str]]:
    """anonymize_names() that also returns the old-name -> new-name map."""
    result = result or check_program(tree)
    if not result.ok:
        logger.warning("anonymizing a program with %d type errors", len(result.errors))
    out = tree.copy()
    renamer = _Renamer(tree, result, salt)
    # refs are keyed by node id, which the copy preserves
    renamer.tree = out
    mapping = renamer.apply()
    return out, mapping


def anonymize_names(tree: SyntaxTree, salt: int, result: Optional[CheckResult] = None) -> SyntaxTree:
    """Rename user declarations deterministically in (name, salt).

    Args:
        tree: a typechecking program (left unchanged)
        salt: integer key of the renaming
        result: check_program(tree), when the caller already has it

    Returns:
        A renamed copy with every reference updated.
    """
    return anonymize_with_map(tree, salt, result)[0]


def _is_entry(n: Node) -> bool:
    return n.kind not in TOP_DECLS or (n.kind == "FunDecl" and n.text == "main")


def merge_programs(gen_seed: SyntaxTree, mut_seed: SyntaxTree) -> SyntaxTree:
    """Concatenate two programs, generation seed first.

    Raises:
        MergeConflict: if both declare the same top-level name.
    """
    mut_names = {n.text for n in mut_seed.root.children if n.kind in TOP_DECLS}
    mut_has_entry = any(_is_entry(n) for n in mut_seed.root.children)
    items = []
    for n in gen_seed.root.children:
        if mut_has_entry and _is_entry(n):
            continue
        if n.kind in TOP_DECLS and n.text in mut_names:
            raise MergeConflict(f"both programs declare '{n.text}'")
        items.append(clone(n))
    items.extend(clone(n) for n in mut_seed.root.children)
    merged = SyntaxTree(mk("File", children=items))
    logger.debug("merged %d + %d top-level items", len(gen_seed.root.children), len(mut_seed.root.children))
    return merged
