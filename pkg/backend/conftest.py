"""Shared pytest fixtures."""
from pathlib import Path

import pytest

from backend.core import CostParams, GeneratorConfig, Region, RegionSet, RttMatrix, generate
from backend.services import region_service


FIXTURES = Path(__file__).parent / "data" / "fixtures"


@pytest.fixture
def three_region_dir() -> Path:
    return FIXTURES / "three_region"


@pytest.fixture
def three_regions() -> RegionSet:
    return RegionSet(
        regions=[
            Region(id=0, name="West", latitude=40.0, longitude=-100.0),
            Region(id=1, name="Central", latitude=45.0, longitude=10.0),
            Region(id=2, name="East", latitude=30.0, longitude=120.0),
        ],
        rtt=RttMatrix(d=[[10.0, 50.0, 80.0], [50.0, 10.0, 60.0], [80.0, 60.0, 10.0]]),
    )


@pytest.fixture
def three_prices() -> CostParams:
    return CostParams(alpha=[0.001] * 3, eta=[0.02] * 3, omega=[0.09, 0.12, 0.15])


@pytest.fixture(scope="session")
def default_regions() -> RegionSet:
    return region_service.region_set()


@pytest.fixture(scope="session")
def default_prices(default_regions) -> CostParams:
    return region_service.load_prices(default_regions)


@pytest.fixture(scope="session")
def small_trace(default_regions):
    """Eight periods, about five videos each."""
    return generate(GeneratorConfig(n_videos_per_period=5, seed=3), 8, default_regions)
