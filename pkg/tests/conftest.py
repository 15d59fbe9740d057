import math
from pathlib import Path

import numpy as np
import pytest

from quencode.encoders import EncodedInput

ROOT = Path(__file__).resolve().parents[1]
MNIST36 = ROOT / "data" / "mnist36"


def random_input(rng, method):
    if method == "basis":
        return EncodedInput("basis", int(rng.integers(0, 4)))
    if method == "rotation":
        return EncodedInput("rotation", tuple(rng.uniform(0, 2 * math.pi, 4)))
    return EncodedInput("amplitude", tuple(rng.normal(size=4)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mnist_dir():
    if not MNIST36.is_dir():
        pytest.skip("data/mnist36 not present (run tools/build_mnist36.py or fetch-data)")
    return MNIST36
