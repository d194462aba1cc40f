import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).parent.parent))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def seed0_features():
    """The fixed seed-0 5 x 4 instance used across gradient tests"""
    return np.random.default_rng(0).standard_normal((5, 4))
