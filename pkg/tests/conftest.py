from __future__ import annotations

from pathlib import Path

import pytest

from scelo.simulator import SimConfig, generate_population, play_schedule

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def default_sim():
    cfg = SimConfig(seed=20240601)
    agents = generate_population(cfg)
    return cfg, agents, play_schedule(agents, cfg)
