import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import smoothfem as sf


@pytest.fixture(scope="session")
def poisson():
    return sf.poisson_benchmark()


@pytest.fixture(scope="session")
def elasticity():
    return sf.elasticity_benchmark()


@pytest.fixture(scope="session")
def mesh2():
    """2 x 2 checkerboard (8 elements)."""
    return sf.build_structured(2)


@pytest.fixture(scope="session")
def mesh8():
    """Benchmark-scale mesh, n = 2^3."""
    return sf.build_structured(8)


@pytest.fixture(scope="session")
def perturbed2():
    """Small perturbed mesh (8 elements, irregular geometry)."""
    return sf.build_unstructured(2, seed=3)


@pytest.fixture(scope="session")
def hier_4_2():
    """n=4, N=2 hierarchy: the hand-checkable Schwarz setting."""
    return sf.refine_uniform(sf.build_structured(2), 1)


@pytest.fixture(scope="session")
def hier_16_4():
    """n=16, N=4 hierarchy: the paper's illustration setting."""
    return sf.refine_uniform(sf.build_structured(4), 2)


def reduced(mesh, spec, matrix):
    free, _ = sf.free_dofs(mesh, spec)
    return matrix.submatrix(free)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240813)
