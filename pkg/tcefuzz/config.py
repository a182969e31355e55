"""
Campaign configuration.

A campaign is described by one YAML mapping:

    strategy: tce                 # tce, spe, mutate or grammar
    corpus: corpus
    out: out
    seed: 1
    iterations: 1000
    time_budget: 0                # seconds, 0 for no limit
    workers: 1
    faults: [FUNREF_ARGUMENT, RANGE_UNTIL_LOOP]
    generation: {nest_decay: 0.5, max_type_depth: 3, ...}
    mutation: {ratio: 0.6, shrink: 0.5, max_iterations: 3, ...}
    grammar: {max_depth: 5, ...}
    limits: {max_events: 10000, max_steps: 1000000, ...}
    allowlist: [float-format, resource-timeout]

Environment variables:
    TCEFUZZ_RNG_SEED - overrides `seed`
"""

import logging
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml

from .baselines import GrammarConfig
from .errors import ConfigError
from .faults import parse_faults
from .generation import GenConfig
from .mutation import MutConfig
from .oracle import RULES, AllowList
from .runtime import Limits

logger = logging.getLogger(__name__)

STRATEGIES = ("tce", "spe", "mutate", "grammar")
SEED_ENV = "TCEFUZZ_RNG_SEED"

_SECTIONS = {"generation": GenConfig, "mutation": MutConfig, "grammar": GrammarConfig, "limits": Limits}


@dataclass
class CampaignConfig:
    strategy: str = "tce"
    corpus: str = "corpus"
    out: str = "out"
    seed: int = 0
    iterations: int = 1000
    time_budget: float = 0.0
    workers: int = 1
    faults: List[str] = field(default_factory=list)
    progress_every: int = 100
    reduce: bool = True
    reduce_budget: int = 500
    mutate_edits: int = 3
    spe_limit: int = 64
    generation: GenConfig = field(default_factory=GenConfig)
    mutation: MutConfig = field(default_factory=MutConfig)
    grammar: GrammarConfig = field(default_factory=GrammarConfig)
    limits: Limits = field(default_factory=Limits)
    allowlist: List[str] = field(default_factory=lambda: list(RULES))

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; expected one of {', '.join(STRATEGIES)}")
        if self.iterations < 0 or self.time_budget < 0 or self.reduce_budget < 0:
            raise ConfigError("iterations, time_budget and reduce_budget must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.progress_every < 1 or self.mutate_edits < 1 or self.spe_limit < 1:
            raise ConfigError("progress_every, mutate_edits and spe_limit must be positive")
        self.faults = sorted(parse_faults(self.faults))
        AllowList.of(self.allowlist)
        # the mutation phase fills holes with the campaign's generation settings
        self.mutation = replace(self.mutation, gen=self.generation)

    @property
    def fault_set(self):
        return frozenset(self.faults)

    @property
    def allow(self) -> AllowList:
        return AllowList.of(self.allowlist)

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "mutation":
                value = {k: v for k, v in asdict(value).items() if k != "gen"}
            elif f.name in _SECTIONS:
                value = asdict(value)
                if f.name == "grammar":
                    value = {k: list(v) if isinstance(v, tuple) else v for k, v in value.items()}
            elif isinstance(value, list):
                value = list(value)
            out[f.name] = value
        return out


def _section(name: str, raw: Any) -> Any:
    cls = _SECTIONS[name]
    if raw is None:
        return cls()
    if not isinstance(raw, Mapping):
        raise ConfigError(f"section '{name}' must be a mapping")
    known = {f.name for f in fields(cls)} - {"gen"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(sorted(unknown))}")
    values = dict(raw)
    if name == "grammar":
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in values.items()}
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"bad '{name}' section: {e}")


def config_from_dict(raw: Mapping[str, Any]) -> CampaignConfig:
    """Build a CampaignConfig from a parsed mapping.

    Raises:
        ConfigError: on unknown keys or out-of-range values.
    """
    if not isinstance(raw, Mapping):
        raise ConfigError("campaign config must be a mapping")
    known = {f.name for f in fields(CampaignConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    values = {k: v for k, v in raw.items() if k not in _SECTIONS}
    for name in _SECTIONS:
        values[name] = _section(name, raw.get(name))
    try:
        return CampaignConfig(**values)
    except TypeError as e:
        raise ConfigError(f"bad campaign config: {e}")


def load_config(path: Path, env: Optional[Mapping[str, str]] = None) -> CampaignConfig:
    """Read a YAML campaign config; TCEFUZZ_RNG_SEED overrides the seed.

    Raises:
        ConfigError: when the file is unreadable or invalid.
    """
    env = os.environ if env is None else env
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}")
    cfg = config_from_dict(raw)
    return apply_env(cfg, env)


def apply_env(cfg: CampaignConfig, env: Optional[Mapping[str, str]] = None) -> CampaignConfig:
    env = os.environ if env is None else env
    seed = env.get(SEED_ENV)
    if seed:
        try:
            cfg.seed = int(seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {seed!r}")
        logger.info("rng seed %d taken from %s", cfg.seed, SEED_ENV)
    return cfg


def save_config(cfg: CampaignConfig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(cfg.to_dict(), f, sort_keys=False)
    return path
