import os
from dataclasses import dataclass

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


@dataclass
class Config:
    """Configuration settings for the consensus laboratory"""

    # Logging and output
    LOG_LEVEL: str = os.getenv("CONSENSUS_LOG_LEVEL", "INFO")
    OUTPUT_DIR: str = os.getenv("CONSENSUS_OUTPUT_DIR", "./results")
    THREADS: int = int(os.getenv("CONSENSUS_THREADS", "1"))

    # Simulation core
    GAMMA_REFRESH_INTERVAL: int = 1 << 20  # Steps between full gamma recomputations
    RNG_BUFFER: int = 65536  # Uniforms pulled from numpy per refill
    TIMEOUT_FACTOR: float = 64.0  # max_steps = factor * n^1.5 * ln n
    SNAPSHOT_TARGET: int = 1000  # Snapshots per run at the default stride

    # Oracle budgets
    BRUTE_FORCE_MAX_DRAWS: int = int(
        os.getenv("CONSENSUS_BRUTE_FORCE_MAX_DRAWS", str(40**4))
    )
    COUPLING_MAX_K: int = int(os.getenv("CONSENSUS_COUPLING_MAX_K", "64"))


config = Config()
