"""
Shared fixtures for the observer test suite
"""

import sys
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(_ROOT))

from src.core.dae_core import DaeTriple, WeightSpec
from src.core.matspace import DEFAULT_TOL

def pytest_configure(config):
    config.addinivalue_line("markers", "slow: heat-equation runs taking several seconds")

@pytest.fixture
def tol():
    return DEFAULT_TOL

@pytest.fixture
def scalar_weights():
    """q0 = 1, q = 0.5, r = 4"""
    return WeightSpec(np.array([[1.0]]), np.array([[0.5]]), np.array([[4.0]]))

@pytest.fixture
def impulse_free_triple():
    """x1' = x2 + f with x2 unmeasured: x1 cannot be estimated"""
    return DaeTriple(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), np.array([[0.0, 0.0]]))

@pytest.fixture
def write_matrices(tmp_path):
    """Write named matrices as NAME_matrix.txt into a fresh input directory"""
    def _write(**matrices):
        folder = tmp_path / "input"
        folder.mkdir(exist_ok=True)
        for name, value in matrices.items():
            pd.DataFrame(np.atleast_2d(value)).to_csv(
                folder / f"{name}_matrix.txt", header=False, index=False, float_format="%.17g"
            )
        return folder

    return _write
