import os
from pathlib import Path

import pytest

from tcefuzz.parser import parse
from tcefuzz.stdlib import default_registry

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
PATHOLOGICAL = CORPUS / "pathological"
WITNESSES = Path(__file__).resolve().parent / "data" / "witnesses"


def pytest_configure(config):
    config.addinivalue_line("markers", "campaign: campaign-scale acceptance experiments")


def pytest_collection_modifyitems(config, items):
    run_campaign = os.environ.get("RUN_CAMPAIGN_TESTS") == "1"
    skip_campaign = pytest.mark.skip(reason="set RUN_CAMPAIGN_TESTS=1 to run campaign tests")
    for item in items:
        if "campaign" in item.keywords and not run_campaign:
            item.add_marker(skip_campaign)


@pytest.fixture(scope="session")
def registry():
    return default_registry()


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS


@pytest.fixture(scope="session")
def seeds(registry):
    from tcefuzz.campaign import load_seeds

    return load_seeds(CORPUS, registry)


@pytest.fixture(scope="session")
def pathological():
    return {p.stem: parse(p.read_text(encoding="utf-8")) for p in sorted(PATHOLOGICAL.glob("*.tl"))}


@pytest.fixture(scope="session")
def witnesses():
    return {p.stem: p.read_text(encoding="utf-8") for p in sorted(WITNESSES.glob("*.tl"))}
