import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from grid import build_mesh  # noqa: E402
from tests.helpers import channel_field  # noqa: E402


@pytest.fixture
def mesh():
    """8x8 fine cells, 2x2 coarse elements."""
    return build_mesh(8, 2)


@pytest.fixture
def mesh16():
    return build_mesh(16, 4)


@pytest.fixture
def kappa(mesh):
    return channel_field(mesh).ravel()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("CEMWAVE_OUTPUT_ROOT", str(tmp_path / "output"))
    return tmp_path / "output"
