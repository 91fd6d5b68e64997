import hypothesis
import numpy as np
import pytest

from mspc.linalg import Rng

hypothesis.settings.register_profile(
    "suite", max_examples=25, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("suite")


@pytest.fixture
def gen() -> np.random.Generator:
    return Rng(20240817).generator()
