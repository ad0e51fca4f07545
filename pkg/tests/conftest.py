import os
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
FIXTURES = ROOT / "fixtures"
os.environ.setdefault("HYPERTPE_FIXTURES", str(FIXTURES))

from hypertpe.space import ParameterSpec, SearchSpace  # noqa: E402


@pytest.fixture
def unit_space():
    return SearchSpace((ParameterSpec("x", "uniform", 0.0, 1.0),))


@pytest.fixture
def mixed_space():
    return SearchSpace((
        ParameterSpec("lr", "log-uniform", 1e-4, 1e-1),
        ParameterSpec("width", "uniform", -2.0, 3.0),
        ParameterSpec("filters", "integer", 10, 512),
        ParameterSpec("act", "categorical", choices=("relu", "tanh", "gelu")),
    ))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
