import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


class TieOracle:
    """Arbitrary (non-converging) losses on a coarse grid, so ties are common."""

    def __init__(self, seed: int, values: int = 5):
        self.seed = seed
        self.values = values

    def loss(self, config, level):
        rng = np.random.default_rng([self.seed, config, level])
        return float(rng.integers(0, self.values)) / self.values


@pytest.fixture
def tie_oracle():
    return TieOracle
