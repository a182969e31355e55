"""
Command-line interface.

Usage:
    tcefuzz check program.tl
    tcefuzz generate seed.tl --out pool.jsonl
    tcefuzz mutate mut.tl --gen-seed gen.tl --rng-seed 7
    tcefuzz baseline --strategy grammar --count 5
    tcefuzz run program.tl --faults all --trace trace.jsonl
    tcefuzz reduce crash.tl --goal-signature 3f2a... --faults all
    tcefuzz dedup out/ --out clusters.jsonl
    tcefuzz fuzz --config campaign.yaml
    tcefuzz fuzz --config campaign.yaml --compare tce,spe,mutate,grammar
    tcefuzz report out/

Environment variables:
    TCEFUZZ_RNG_SEED - overrides the campaign seed
    TCEFUZZ_LOG_DIR  - directory for fuzz log files (default: ./logs)
    TCEFUZZ_STDLIB   - stdlib.tl to use when --stdlib is not given

Exit codes: 0 success, 1 check failure or findings, 2 config error, 3 empty corpus.
"""

import argparse
import json
import logging
import os
import random
import sys
from datetime import datetime
from itertools import islice
from pathlib import Path
from typing import List, Optional

from .baselines import grammar_generate, mutate_burst
from .campaign import load_stats, report_table, run_campaign, run_comparison
from .checker import check_program
from .config import STRATEGIES, CampaignConfig, apply_env, config_from_dict, load_config
from .errors import ConfigError, EmptyCorpus, ParseError, TcefuzzError, Untypeable
from .faults import describe, parse_faults
from .generation import ExprPool, generation_phase
from .interpreter import interpret
from .mutation import MutConfig, tce_mutate
from .oracle import DEFAULT_CRASH_PATTERN, run_both, run_external
from .parser import parse
from .printer import print_tree
from .runtime import Limits
from .spe import spe_enumerate
from .stdlib import StdlibRegistry, default_registry, load_stdlib, set_default_path
from .syntax import SyntaxTree
from .triage import ReductionGoal, count_tokens, dedup, reduce_with_stats
from .vm import compile_and_run

logger = logging.getLogger("tcefuzz")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_EMPTY = 0, 1, 2, 3


def setup_logging(log_dir: Path) -> Path:
    """Create the log directory and return a timestamped log file path."""
    log_dir.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    return log_dir / f"fuzz_{timestamp}.log"


def _configure_logging(verbose: bool, log_file: Optional[Path] = None):
    root = logging.getLogger()
    root.handlers.clear()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    root.addHandler(stream)
    if log_file is not None:
        handler = logging.FileHandler(log_file, encoding="utf-8")
        handler.setFormatter(logging.Formatter("[%(asctime)s] %(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)


def _read_program(path: str) -> SyntaxTree:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}")
    return parse(text)


def _checked(path: str, registry: StdlibRegistry) -> SyntaxTree:
    tree = _read_program(path)
    result = check_program(tree, registry)
    if not result.ok:
        raise Untypeable(f"{path}: {result.errors[0].message}")
    return tree


def _registry(args) -> StdlibRegistry:
    if args.stdlib:
        set_default_path(Path(args.stdlib))
        return load_stdlib(Path(args.stdlib))
    return default_registry()


# -- subcommands ---------------------------------------------------------------


def cmd_check(args, registry: StdlibRegistry) -> int:
    tree = _read_program(args.file)
    result = check_program(tree, registry)
    if result.ok:
        print(f"{args.file}: ok")
        return EXIT_OK
    nodes = tree.index()
    text = Path(args.file).read_text(encoding="utf-8")
    for err in result.errors:
        node = nodes.get(err.node_id)
        where = ""
        if node is not None and node.span is not None:
            line, col = node.span.line_col(text)
            where = f"{line}:{col}: "
        print(f"{where}{err.message}")
    return EXIT_FAILED


def cmd_faults(args, registry: StdlibRegistry) -> int:
    print(describe())
    return EXIT_OK


def cmd_generate(args, registry: StdlibRegistry) -> int:
    seed = _checked(args.seed, registry)
    pool = generation_phase(seed, rng=random.Random(args.rng_seed), registry=registry)
    if args.out:
        n = pool.to_jsonl(Path(args.out))
        print(f"wrote {n} expressions to {args.out}")
    else:
        for r in pool.records():
            print(json.dumps(r))
    return EXIT_OK


def cmd_mutate(args, registry: StdlibRegistry) -> int:
    mut_seed = _checked(args.mut_seed, registry)
    gen_seed = _checked(args.gen_seed, registry) if args.gen_seed else mut_seed
    rng = random.Random(args.rng_seed)
    if args.pool:
        pool = ExprPool.from_jsonl(Path(args.pool), registry.index)
    else:
        pool = generation_phase(gen_seed, rng=rng, registry=registry)
    cfg = MutConfig(max_iterations=args.rounds)
    tree, rounds = tce_mutate(mut_seed, gen_seed, pool, cfg, rng, registry)
    for r in rounds:
        logger.info("round %d: ratio %.3f, %d placeholders, %d filled, %d rolled back",
                    r.round, r.ratio, r.placeholders, r.filled, r.rolled_back)
    print(print_tree(tree))
    return EXIT_OK


def cmd_baseline(args, registry: StdlibRegistry) -> int:
    rng = random.Random(args.rng_seed)
    seed = None
    if args.strategy != "grammar":
        if not args.seed or args.seed == "none":
            raise ConfigError(f"--seed is required for strategy {args.strategy}")
        seed = _checked(args.seed, registry)
    if args.strategy == "spe":
        programs = list(islice(spe_enumerate(seed, args.count, rng, registry), args.count))
    elif args.strategy == "mutate":
        programs = [mutate_burst(seed, rng, args.edits) for _ in range(args.count)]
    else:
        programs = [grammar_generate(rng=rng) for _ in range(args.count)]
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for i, program in enumerate(programs):
        text = print_tree(program)
        if out:
            (out / f"{args.strategy}_{i:04d}.tl").write_text(text, encoding="utf-8")
        else:
            print(f"// --- {args.strategy} #{i}")
            print(text)
    logger.info("%d program(s) from %s", len(programs), args.strategy)
    return EXIT_OK


def cmd_run(args, registry: StdlibRegistry) -> int:
    tree = _read_program(args.file)
    if args.external_cmd:
        result = run_external(tree, args.external_cmd, args.crash_pattern, args.timeout)
        print(result.summary())
        if result.crashed:
            print(f"{result.kind}: {result.message}")
            return EXIT_FAILED
        return EXIT_OK
    faults = parse_faults(args.faults)
    limits = Limits(timeout=args.timeout)
    check = check_program(tree, registry)
    if not check.ok:
        raise Untypeable(f"{args.file}: {check.errors[0].message}")
    if args.backend == "interp":
        result = interpret(tree, limits, check)
    elif args.backend == "vm":
        result = compile_and_run(tree, faults, limits, registry)
    else:
        cmp = run_both(tree, faults, limits, registry=registry)
        result = cmp.candidate
        print(f"reference: {cmp.reference.summary()}")
        print(f"candidate: {cmp.candidate.summary()}")
        if cmp.divergence is not None:
            d = cmp.divergence
            print(f"divergence: {d.reason} at event {d.index} ({d.classification}), fingerprint {d.fingerprint}")
    if args.backend != "both":
        print(result.summary())
    for line in result.output:
        print(f"  | {line}")
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as f:
            for event in result.trace:
                f.write(json.dumps(event.to_json(), sort_keys=True) + "\n")
    if result.crashed:
        print(f"crash signature {result.signature} ({result.phase}, {result.kind})")
        return EXIT_FAILED
    if args.backend == "both" and cmp.divergence is not None and cmp.divergence.classification == "miscompilation":
        return EXIT_FAILED
    return EXIT_OK


def cmd_reduce(args, registry: StdlibRegistry) -> int:
    tree = _checked(args.file, registry)
    faults = parse_faults(args.faults)
    first_run = compile_and_run(tree, faults, Limits(), registry)
    kind = "crash" if first_run.crashed and first_run.signature == args.goal_signature else "divergence"
    goal = ReductionGoal(kind, args.goal_signature, frozenset(faults), registry=registry)
    if not goal(tree):
        logger.error("%s does not reproduce %s", args.file, args.goal_signature)
        return EXIT_FAILED
    reduced, stats = reduce_with_stats(tree, goal, args.budget)
    text = print_tree(reduced)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text)
    logger.info("reduced %d -> %d tokens in %d evaluations%s", stats.tokens_before, stats.tokens_after,
                stats.evaluations, " (budget exhausted)" if stats.exhausted else "")
    return EXIT_OK


def _read_reports(path: Path) -> List[dict]:
    files = [path] if path.is_file() else sorted(path.rglob("*.jsonl"))
    reports = []
    for file in files:
        if file.parent.name == "clusters" or file.parent.name == "programs":
            continue
        with open(file, encoding="utf-8") as f:
            reports.extend(json.loads(line) for line in f if line.strip())
    return reports


def cmd_dedup(args, registry: StdlibRegistry) -> int:
    reports = _read_reports(Path(args.reports))
    clusters = dedup(reports)
    lines = [json.dumps(c.to_json(), sort_keys=True) for c in sorted(clusters, key=lambda c: (c.kind, c.signature))]
    if args.out:
        Path(args.out).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    for c in clusters:
        print(f"{c.kind:10} {c.signature}  x{c.size}  {count_tokens(c.representative['program'])} tokens")
    print(f"{len(reports)} report(s), {len(clusters)} cluster(s)")
    return EXIT_OK


def cmd_report(args, registry: StdlibRegistry) -> int:
    columns = {}
    for d in args.dirs:
        d = Path(d)
        if (d / "report.json").exists():
            stats = load_stats(d)
            columns[stats.strategy] = stats
        else:
            for sub in sorted(p for p in d.iterdir() if (p / "report.json").exists()):
                columns[sub.name] = load_stats(sub)
    if not columns:
        raise ConfigError("no report.json found")
    print(report_table(columns))
    return EXIT_OK


def cmd_fuzz(args, registry: StdlibRegistry) -> int:
    cfg = load_config(Path(args.config)) if args.config else apply_env(CampaignConfig())
    overrides = {}
    for name in ("strategy", "corpus", "out", "iterations", "workers", "time_budget"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    if args.faults is not None:
        overrides["faults"] = sorted(parse_faults(args.faults))
    if overrides:
        raw = cfg.to_dict()
        raw.update(overrides)
        cfg = config_from_dict(raw)
    if args.compare:
        strategies = [s.strip() for s in args.compare.split(",") if s.strip()]
        unknown = [s for s in strategies if s not in STRATEGIES]
        if unknown:
            raise ConfigError(f"unknown strategies: {', '.join(unknown)}")
        columns = run_comparison(cfg, strategies, registry)
    else:
        stats = run_campaign(cfg, registry=registry)
        columns = {cfg.strategy: stats}
    print(report_table(columns))
    found = any(s.clusters for s in columns.values())
    return EXIT_FAILED if found and args.fail_on_findings else EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcefuzz", description="Type-centric fuzzing of the TL compiler")
    parser.add_argument("--stdlib", default=None, help="stdlib.tl to use instead of the bundled one")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and typecheck a program")
    p.add_argument("file")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("faults", help="list injectable compiler faults")
    p.set_defaults(func=cmd_faults)

    p = sub.add_parser("generate", help="expression pool of a seed (generation phase)")
    p.add_argument("seed")
    p.add_argument("--out", default=None, help="pool JSON lines file (default: stdout)")
    p.add_argument("--rng-seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("mutate", help="type-centric mutation of a seed")
    p.add_argument("mut_seed")
    p.add_argument("--gen-seed", default=None, help="generation seed (default: the mutation seed)")
    p.add_argument("--pool", default=None, help="pool written by `generate`")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--rounds", type=int, default=3)
    p.set_defaults(func=cmd_mutate)

    p = sub.add_parser("baseline", help="programs from a comparison fuzzer")
    p.add_argument("--strategy", choices=("spe", "mutate", "grammar"), required=True)
    p.add_argument("--seed", default=None, help="seed program, or none for grammar")
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--edits", type=int, default=3, help="edits per program for mutate")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", default=None, help="directory for the programs (default: stdout)")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("run", help="execute a program")
    p.add_argument("file")
    p.add_argument("--backend", choices=("interp", "vm", "both"), default="both")
    p.add_argument("--faults", default=None, help="comma-separated fault names or `all`")
    p.add_argument("--trace", default=None, help="write the trace as JSON lines")
    p.add_argument("--timeout", type=float, default=1.0, help="seconds per run")
    p.add_argument("--external-cmd", default=None, help="external compiler command, {file} is the program")
    p.add_argument("--crash-pattern", default=DEFAULT_CRASH_PATTERN)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("reduce", help="shrink a program while it reproduces a finding")
    p.add_argument("file")
    p.add_argument("--goal-signature", required=True, help="crash signature or divergence fingerprint")
    p.add_argument("--faults", default=None)
    p.add_argument("--budget", type=int, default=500)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("dedup", help="cluster crash and divergence reports")
    p.add_argument("reports", help="reports directory or JSON lines file")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dedup)

    p = sub.add_parser("report", help="comparison table of finished campaigns")
    p.add_argument("dirs", nargs="+")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fuzz", help="run a fuzzing campaign")
    p.add_argument("--config", default=None, help="campaign YAML file")
    p.add_argument("--strategy", choices=STRATEGIES, default=None)
    p.add_argument("--corpus", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--time-budget", dest="time_budget", type=float, default=None)
    p.add_argument("--faults", default=None)
    p.add_argument("--compare", default=None, help="comma-separated strategies to compare")
    p.add_argument("--fail-on-findings", action="store_true", help="exit 1 when bugs were found")
    p.add_argument("--log-dir", default=None, help="default: $TCEFUZZ_LOG_DIR or ./logs")
    p.set_defaults(func=cmd_fuzz)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    log_file = None
    if args.command == "fuzz":
        log_file = setup_logging(Path(args.log_dir or os.environ.get("TCEFUZZ_LOG_DIR", "./logs")))
    _configure_logging(args.verbose, log_file)
    if log_file is not None:
        logger.info("log file: %s", log_file)
    try:
        registry = _registry(args)
        return args.func(args, registry)
    except EmptyCorpus as e:
        logger.error("%s", e)
        return EXIT_EMPTY
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except (ParseError, Untypeable) as e:
        logger.error("%s", e)
        return EXIT_FAILED
    except TcefuzzError as e:
        logger.error("%s", e)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
