from __future__ import annotations

import logging
import sys
from collections.abc import Iterator
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
for entry in (ROOT, ROOT / "src"):
    if str(entry) not in sys.path:
        sys.path.insert(0, str(entry))

from overair.config import get_settings  # noqa: E402
from overair.models.channel import ChannelModel  # noqa: E402
from overair.services.graph import complete_graph  # noqa: E402

FIXTURES = ROOT / "simulator" / "fixtures"


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch: pytest.MonkeyPatch) -> Iterator[None]:
    for name in ("OVERAIR_NEGATIVITY_POLICY", "OVERAIR_BOUND_MODE", "OVERAIR_WORKERS", "OVERAIR_OUTPUT_DIR"):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def _restore_root_logging() -> Iterator[None]:
    # configure_logging inside a capsys test binds a stream that closes with the test
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240101)


@pytest.fixture
def k5_model() -> ChannelModel:
    return ChannelModel.uniform(5, rho=1.0, p=0.5, sigma2=0.1, fading=1.0)


@pytest.fixture
def k5():
    return complete_graph(5)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
