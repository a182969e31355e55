from pathlib import Path

import pytest

from tcefuzz.config import CampaignConfig, apply_env, config_from_dict, load_config, save_config
from tcefuzz.errors import ConfigError
from tcefuzz.faults import ALL_FAULTS

EXAMPLE = Path(__file__).resolve().parent.parent.parent / "campaign.yaml"


def test_example_config_loads():
    cfg = load_config(EXAMPLE, env={})
    assert cfg.strategy == "tce"
    assert cfg.seed == 1
    assert set(cfg.faults) == ALL_FAULTS
    assert cfg.mutation.ratio == 0.6
    assert cfg.limits.max_events == 10_000
    assert cfg.allowlist == ["float-format", "resource-timeout"]


def test_mutation_uses_the_campaign_generation_settings():
    cfg = config_from_dict({"generation": {"max_call_depth": 2}})
    assert cfg.mutation.gen.max_call_depth == 2


def test_saved_config_reloads_equal(tmp_path):
    cfg = config_from_dict({"strategy": "spe", "seed": 9, "faults": ["RANGE_UNTIL_LOOP"],
                            "grammar": {"max_depth": 3}, "mutation": {"shrink": 0.25}})
    path = save_config(cfg, tmp_path / "sub" / "campaign.yaml")
    assert load_config(path, env={}) == cfg


def test_defaults():
    cfg = CampaignConfig()
    assert cfg.strategy == "tce"
    assert cfg.faults == []
    assert cfg.workers == 1


def test_seed_from_environment():
    cfg = load_config(EXAMPLE, env={"TCEFUZZ_RNG_SEED": "42"})
    assert cfg.seed == 42


def test_bad_seed_in_environment():
    with pytest.raises(ConfigError):
        apply_env(CampaignConfig(), {"TCEFUZZ_RNG_SEED": "abc"})


@pytest.mark.parametrize("raw", [
    {"strategy": "afl"},
    {"colour": "blue"},
    {"mutation": {"ratio": 0.5, "speed": 3}},
    {"mutation": {"shrink": 2.0}},
    {"generation": "deep"},
    {"faults": ["NOT_A_FAULT"]},
    {"allowlist": ["anything-goes"]},
    {"workers": 0},
    {"iterations": -1},
    {"limits": {"max_events": 10, "max_frames": 3}},
])
def test_invalid_configs(raw):
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_config_must_be_a_mapping():
    with pytest.raises(ConfigError):
        config_from_dict(["strategy", "tce"])


def test_unreadable_or_malformed_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml", env={})
    bad = tmp_path / "bad.yaml"
    bad.write_text("strategy: [tce\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad, env={})


def test_empty_file_gives_defaults(tmp_path):
    empty = tmp_path / "empty.yaml"
    empty.write_text("", encoding="utf-8")
    assert load_config(empty, env={}) == CampaignConfig()
