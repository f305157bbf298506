import os
import shutil

# Add parent directory to path to import modules
import sys
import tempfile
from itertools import combinations_with_replacement

import pytest
from fastapi.testclient import TestClient

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import Config
from models import ExperimentConfig
from random_source import RandomSource


def partitions_up_to(max_n: int, max_k: int):
    """Every counts vector with 2..max_k opinions (zeros allowed, sorted) and n <= max_n"""
    for k in range(2, max_k + 1):
        for n in range(1, max_n + 1):
            for combo in combinations_with_replacement(range(n + 1), k):
                if sum(combo) == n:
                    yield tuple(sorted(combo, reverse=True))


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing"""
    temp_dir = tempfile.mkdtemp()
    yield temp_dir
    shutil.rmtree(temp_dir)


@pytest.fixture
def test_config():
    """Configuration with small oracle budgets"""
    config = Config()
    config.BRUTE_FORCE_MAX_DRAWS = 20_000
    config.COUPLING_MAX_K = 16
    return config


@pytest.fixture
def rng():
    """A fixed random stream"""
    return RandomSource(12345)


@pytest.fixture
def small_partitions():
    """Exhaustive family of small configurations, n <= 12 and k <= 4"""
    return list(partitions_up_to(12, 4))


@pytest.fixture
def experiment_config(temp_dir):
    """Small, fast experiment configuration writing into a temp directory"""
    return ExperimentConfig(
        dynamics="3maj",
        n_grid=[16],
        k_grid=[2],
        trials=4,
        seed=7,
        out_dir=temp_dir,
        window=200,
    )


@pytest.fixture
def config_file(temp_dir):
    """Write a KEY=VALUE experiment file and return its path"""

    def write(text: str) -> str:
        path = os.path.join(temp_dir, "experiment.env")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        return path

    return write


@pytest.fixture
def api_client():
    """Test client for the FastAPI app"""
    from app import app

    return TestClient(app)
