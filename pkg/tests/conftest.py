import sys
from pathlib import Path

import numpy as np
import pytest

TESTS_DIR = Path(__file__).parent
sys.path.insert(0, str(TESTS_DIR))

from postfuse.imageops import load_image  # noqa: E402

DATA_DIR = TESTS_DIR / "data"


@pytest.fixture(scope="session")
def natural_images():
    """The five checked-in 64x64 natural-style fixtures."""
    return [load_image(DATA_DIR / f"nat_{i:03d}.png") for i in range(5)]


@pytest.fixture(scope="session")
def natural_224():
    return load_image(DATA_DIR / "nat_224.png")


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
