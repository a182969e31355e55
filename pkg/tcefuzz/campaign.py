"""
Fuzzing campaigns: seed corpus, iteration loop, persistence and reporting.

Each iteration produces one program with the configured strategy, checks it
with the compiler under test (faults enabled), runs valid programs on both
backends and records crashes and divergences. When the loop ends, findings
are deduplicated and every cluster representative is reduced.

Output layout (under cfg.out):
    programs/      NNNNNN.tl for every generated program, index.jsonl
    crashes/       index.jsonl, one CrashReport per line
    divergences/   index.jsonl, one DivergenceReport per line
    reduced/       <signature>.tl, reduced cluster representatives
    clusters/      clusters.jsonl
    report.json    counters only (identical across identical runs)
    timing.json    wall time
"""

import hashlib
import json
import logging
import random
import time
import traceback
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from itertools import islice
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from .baselines import grammar_generate, mutate_burst
from .checker import check_program
from .config import CampaignConfig
from .errors import CompilerFault, ConfigError, EmptyCorpus, ParseError, TcefuzzError
from .generation import generation_phase
from .mutation import tce_mutate
from .oracle import crash_signature, run_both
from .parser import parse
from .printer import print_tree
from .spe import spe_enumerate
from .stdlib import StdlibRegistry, default_registry
from .syntax import SyntaxTree
from .triage import CrashReport, ReductionGoal, count_tokens, dedup, reduce_with_stats

logger = logging.getLogger(__name__)

SUBDIRS = ("programs", "crashes", "divergences", "reduced", "clusters")

TABLE_ROWS = (
    ("Correct programs, %", "valid_percent"),
    ("Frontend crashes", "frontend_bugs"),
    ("Backend crashes", "backend_bugs"),
    ("Miscompilations", "miscompilation_bugs"),
    ("Duplicates", "duplicates"),
)
TABLE_NOTE = "Interesting bugs, % is omitted: it depends on human triage."


def derive_seed(seed: int, i: int) -> int:
    """Seed of iteration `i`; independent of the worker that runs it."""
    digest = hashlib.blake2b(f"{seed}:{i}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


# -- corpus ---------------------------------------------------------------------


def load_seeds(path: Path, registry: Optional[StdlibRegistry] = None) -> List[SyntaxTree]:
    """Parse and typecheck every `.tl` file of a corpus directory, by path order.

    Invalid files are skipped with a warning.

    Raises:
        ConfigError: if `path` is not a directory.
        EmptyCorpus: if no valid seed remains.
    """
    path = Path(path)
    if not path.is_dir():
        raise ConfigError(f"corpus {path} is not a directory")
    seeds = []
    for file in sorted(path.glob("*.tl")):
        try:
            tree = parse(file.read_text(encoding="utf-8"))
        except ParseError as e:
            logger.warning("skipping seed %s: %s", file.name, e)
            continue
        result = check_program(tree, registry)
        if not result.ok:
            logger.warning("skipping seed %s: %s", file.name, result.errors[0].message)
            continue
        seeds.append(tree)
    if not seeds:
        raise EmptyCorpus(f"no valid seeds in {path}")
    logger.info("loaded %d seeds from %s", len(seeds), path)
    return seeds


# -- statistics -----------------------------------------------------------------


@dataclass
class CampaignStats:
    strategy: str
    iterations: int = 0
    generated: int = 0
    valid: int = 0
    invalid: int = 0
    frontend_crashes: int = 0
    backend_crashes: int = 0
    miscompilations: int = 0
    allowlisted: int = 0
    skipped: int = 0
    internal_errors: int = 0
    mutation_rounds: int = 0
    ratio_violations: int = 0
    frontend_bugs: int = 0
    backend_bugs: int = 0
    miscompilation_bugs: int = 0
    clusters: int = 0
    duplicates: int = 0
    wall_time: float = field(default=0.0, compare=False)

    @property
    def valid_rate(self) -> float:
        return self.valid / self.generated if self.generated else 0.0

    @property
    def valid_percent(self) -> str:
        return f"{100.0 * self.valid_rate:.1f}"

    def to_json(self) -> Dict[str, Any]:
        out = asdict(self)
        del out["wall_time"]
        out["valid_rate"] = round(self.valid_rate, 6)
        return out


@dataclass
class IterationRecord:
    """What a worker hands to the collector for one iteration."""

    index: int
    status: str                         # valid, invalid, frontend-crash, skipped, internal-error
    program: str = ""
    findings: List[Dict[str, Any]] = field(default_factory=list)
    rounds: List[Dict[str, Any]] = field(default_factory=list)
    error: str = ""


# -- one iteration --------------------------------------------------------------


def produce(cfg: CampaignConfig, seeds: Sequence[SyntaxTree], rng: random.Random,
            registry: Optional[StdlibRegistry] = None) -> Tuple[SyntaxTree, List[Dict[str, Any]]]:
    """One program by the configured strategy, plus mutation round statistics."""
    if cfg.strategy == "grammar":
        return grammar_generate(cfg.grammar, rng), []
    if cfg.strategy == "mutate":
        return mutate_burst(rng.choice(seeds), rng, cfg.mutate_edits), []
    if cfg.strategy == "spe":
        seed = rng.choice(seeds)
        instances = list(islice(spe_enumerate(seed, cfg.spe_limit, rng, registry), cfg.spe_limit))
        return (rng.choice(instances) if instances else seed.copy()), []
    gen_seed = rng.choice(seeds)
    mut_seed = rng.choice(seeds)
    pool = generation_phase(gen_seed, cfg.generation, rng, registry)
    tree, rounds = tce_mutate(mut_seed, gen_seed, pool, cfg.mutation, rng, registry)
    return tree, [r.to_json() for r in rounds]


def evaluate(tree: SyntaxTree, cfg: CampaignConfig,
             registry: Optional[StdlibRegistry] = None) -> Tuple[str, List[Dict[str, Any]]]:
    """Run one program through the compiler under test and the oracle.

    Returns:
        (status, findings) with status valid, invalid or frontend-crash.
    """
    text = print_tree(tree)
    try:
        result = check_program(tree, registry, cfg.fault_set)
    except CompilerFault as e:
        report = CrashReport(text, e.phase, e.kind, crash_signature(e), str(e), e.fault)
        return "frontend-crash", [report.to_json()]
    if not result.ok:
        return "invalid", []
    cmp = run_both(tree, cfg.fault_set, cfg.limits, cfg.allow, registry)
    if cmp.crash is not None:
        c = cmp.crash
        return "valid", [CrashReport(text, c.phase, c.kind, c.signature, c.message, c.fault).to_json()]
    if cmp.divergence is not None:
        return "valid", [cmp.divergence.to_json()]
    return "valid", []


def run_iteration(cfg: CampaignConfig, seeds: Sequence[SyntaxTree], i: int,
                  registry: Optional[StdlibRegistry] = None) -> IterationRecord:
    rng = random.Random(derive_seed(cfg.seed, i))
    try:
        tree, rounds = produce(cfg, seeds, rng, registry)
    except TcefuzzError as e:
        logger.warning("iteration %d: no program: %s", i, e)
        return IterationRecord(i, "skipped", error=str(e))
    except Exception:
        logger.warning("iteration %d: internal error\n%s", i, traceback.format_exc())
        return IterationRecord(i, "internal-error", error=traceback.format_exc(limit=3))
    try:
        status, findings = evaluate(tree, cfg, registry)
    except TcefuzzError as e:
        logger.warning("iteration %d: %s", i, e)
        return IterationRecord(i, "skipped", print_tree(tree), rounds=rounds, error=str(e))
    except Exception:
        logger.warning("iteration %d: internal error\n%s", i, traceback.format_exc())
        return IterationRecord(i, "internal-error", print_tree(tree), rounds=rounds,
                               error=traceback.format_exc(limit=3))
    return IterationRecord(i, status, print_tree(tree), findings, rounds)


# -- collector ------------------------------------------------------------------


def ratio_law_holds(rounds: Sequence[Dict[str, Any]], shrink: float) -> bool:
    for prev, cur in zip(rounds, rounds[1:]):
        if cur["placeholders"] > shrink * prev["placeholders"]:
            return False
    return True


class Collector:
    """Single writer of campaign artifacts; accepts records in any order and
    commits them in iteration order."""

    def __init__(self, cfg: CampaignConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.stats = CampaignStats(cfg.strategy)
        self.findings: List[Dict[str, Any]] = []
        self._pending: Dict[int, IterationRecord] = {}
        self._next = 0
        for sub in SUBDIRS:
            (out / sub).mkdir(parents=True, exist_ok=True)
        for index in ("programs", "crashes", "divergences"):
            (out / index / "index.jsonl").write_text("", encoding="utf-8")

    def add(self, record: IterationRecord):
        self._pending[record.index] = record
        while self._next in self._pending:
            self._commit(self._pending.pop(self._next))
            self._next += 1

    def _append(self, sub: str, record: Dict[str, Any]):
        with open(self.out / sub / "index.jsonl", "a", encoding="utf-8") as f:
            f.write(json.dumps(record, sort_keys=True) + "\n")

    def _commit(self, r: IterationRecord):
        s = self.stats
        s.iterations += 1
        if r.status == "skipped":
            s.skipped += 1
        elif r.status == "internal-error":
            s.internal_errors += 1
        else:
            s.generated += 1
            if r.status == "valid":
                s.valid += 1
            elif r.status == "invalid":
                s.invalid += 1
            else:
                s.frontend_crashes += 1
        if r.rounds:
            s.mutation_rounds += len(r.rounds)
            if not ratio_law_holds(r.rounds, self.cfg.mutation.shrink):
                s.ratio_violations += 1
                logger.error("iteration %d: placeholder ratio law violated: %s", r.index, r.rounds)
        name = f"{r.index:06d}.tl"
        if r.program:
            (self.out / "programs" / name).write_text(r.program, encoding="utf-8")
        self._append("programs", {"iteration": r.index, "status": r.status, "file": name if r.program else "",
                                  "rounds": r.rounds, "error": r.error.splitlines()[-1] if r.error else ""})
        for finding in r.findings:
            finding = dict(finding, iteration=r.index)
            if finding["kind"] == "crash":
                if finding["phase"] != "frontend":
                    s.backend_crashes += 1
                self._append("crashes", finding)
            else:
                if finding["classification"] == "miscompilation":
                    s.miscompilations += 1
                else:
                    s.allowlisted += 1
                self._append("divergences", finding)
            self.findings.append(finding)
        if s.iterations % self.cfg.progress_every == 0:
            logger.info("[%s] %d iterations: %d/%d valid, %d crashes, %d miscompilations",
                        s.strategy, s.iterations, s.valid, s.generated,
                        s.frontend_crashes + s.backend_crashes, s.miscompilations)


# -- campaign -------------------------------------------------------------------


def finish(collector: Collector, registry: Optional[StdlibRegistry] = None) -> CampaignStats:
    """Deduplicate findings, reduce cluster representatives, write clusters and report."""
    cfg, out, s = collector.cfg, collector.out, collector.stats
    clusters = dedup(collector.findings)
    s.clusters = len(clusters)
    s.duplicates = sum(c.size for c in clusters) - len(clusters)
    s.frontend_bugs = sum(1 for c in clusters if c.kind == "crash" and c.representative.get("phase") == "frontend")
    s.backend_bugs = sum(1 for c in clusters if c.kind == "crash" and c.representative.get("phase") != "frontend")
    s.miscompilation_bugs = sum(1 for c in clusters if c.kind == "divergence")
    with open(out / "clusters" / "clusters.jsonl", "w", encoding="utf-8") as f:
        for c in sorted(clusters, key=lambda c: (c.kind, c.signature)):
            record = c.to_json()
            if cfg.reduce:
                record.update(reduce_cluster(c.representative, cfg, out, registry))
            f.write(json.dumps(record, sort_keys=True) + "\n")
    return s


def reduce_cluster(rep: Dict[str, Any], cfg: CampaignConfig, out: Path,
                   registry: Optional[StdlibRegistry] = None) -> Dict[str, Any]:
    goal = ReductionGoal.from_report(rep, cfg.fault_set, cfg.limits, cfg.allow, registry)
    try:
        tree = parse(rep["program"])
        reduced, stats = reduce_with_stats(tree, goal, cfg.reduce_budget)
    except TcefuzzError as e:
        logger.warning("cannot reduce %s: %s", goal.signature, e)
        return {"reduced": "", "reduced_tokens": None}
    path = out / "reduced" / f"{goal.signature}.tl"
    path.write_text(print_tree(reduced), encoding="utf-8")
    return {"reduced": str(path.relative_to(out)), "reduced_tokens": stats.tokens_after,
            "original_tokens": count_tokens(rep["program"]), "evaluations": stats.evaluations}


def run_campaign(cfg: CampaignConfig, seeds: Optional[Sequence[SyntaxTree]] = None,
                 registry: Optional[StdlibRegistry] = None) -> CampaignStats:
    """Run a whole campaign and persist its artifacts under cfg.out.

    Args:
        cfg: campaign configuration
        seeds: preloaded corpus; loaded from cfg.corpus when None

    Raises:
        EmptyCorpus: when a seed-based strategy has no valid seed.
    """
    registry = registry or default_registry()
    if seeds is None:
        seeds = load_seeds(Path(cfg.corpus), registry) if cfg.strategy != "grammar" else []
    elif not seeds and cfg.strategy != "grammar":
        raise EmptyCorpus("no seeds given")
    out = Path(cfg.out)
    collector = Collector(cfg, out)
    started = time.monotonic()
    logger.info("campaign %s: %d iterations, %d worker(s), faults: %s",
                cfg.strategy, cfg.iterations, cfg.workers, ", ".join(cfg.faults) or "none")

    def out_of_time() -> bool:
        return cfg.time_budget > 0 and time.monotonic() - started > cfg.time_budget

    if cfg.workers == 1:
        for i in range(cfg.iterations):
            if out_of_time():
                break
            collector.add(run_iteration(cfg, seeds, i, registry))
    else:
        window = cfg.workers * 4
        with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
            submitted = 0
            futures = set()
            while submitted < cfg.iterations or futures:
                while submitted < cfg.iterations and len(futures) < window and not out_of_time():
                    futures.add(executor.submit(run_iteration, cfg, seeds, submitted, registry))
                    submitted += 1
                if not futures:
                    break
                done = next(as_completed(futures))
                futures.remove(done)
                collector.add(done.result())
                if out_of_time() and submitted < cfg.iterations:
                    submitted = cfg.iterations

    stats = finish(collector, registry)
    stats.wall_time = time.monotonic() - started
    write_report(stats, out)
    logger.info("campaign %s done: %d generated, %.1f%% valid, %d clusters",
                cfg.strategy, stats.generated, 100 * stats.valid_rate, stats.clusters)
    return stats


def write_report(stats: CampaignStats, out: Path):
    with open(out / "report.json", "w", encoding="utf-8") as f:
        json.dump(stats.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")
    with open(out / "timing.json", "w", encoding="utf-8") as f:
        json.dump({"wall_time": round(stats.wall_time, 3)}, f, indent=2)
        f.write("\n")


def run_comparison(cfg: CampaignConfig, strategies: Iterable[str],
                   registry: Optional[StdlibRegistry] = None) -> Dict[str, CampaignStats]:
    """Run the same campaign once per strategy, in sibling output directories."""
    registry = registry or default_registry()
    seeds = load_seeds(Path(cfg.corpus), registry)
    results = {}
    for strategy in strategies:
        sub = replace(cfg, strategy=strategy, out=str(Path(cfg.out) / strategy))
        results[strategy] = run_campaign(sub, seeds, registry)
    return results


# -- reports --------------------------------------------------------------------


def load_stats(out: Path) -> CampaignStats:
    with open(Path(out) / "report.json", encoding="utf-8") as f:
        raw = json.load(f)
    raw.pop("valid_rate", None)
    return CampaignStats(**raw)


def report_table(columns: Dict[str, CampaignStats]) -> str:
    """Comparison table, one column per strategy."""
    names = list(columns)
    label_width = max(len(label) for label, _ in TABLE_ROWS)
    widths = [max(len(n), 8) for n in names]
    lines = [" " * label_width + "  " + "  ".join(n.rjust(w) for n, w in zip(names, widths))]
    for label, attr in TABLE_ROWS:
        cells = [str(getattr(columns[n], attr)).rjust(w) for n, w in zip(names, widths)]
        lines.append(label.ljust(label_width) + "  " + "  ".join(cells))
    lines.append("")
    lines.append(TABLE_NOTE)
    return "\n".join(lines)
