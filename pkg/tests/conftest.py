import numpy as np
import pytest

from liouville import Manifold
from liouville.model import AxisSpectrum, GeneratorFunction


@pytest.fixture(scope="session")
def ell2():
    """Triaxial ellipsoid fixture, axes (3, 2, 1)."""
    return Manifold.ellipsoid((3.0, 2.0, 1.0))


@pytest.fixture(scope="session")
def ell3():
    """Four-axis ellipsoid fixture, axes (4, 3, 2, 1)."""
    return Manifold.ellipsoid((4.0, 3.0, 2.0, 1.0))


@pytest.fixture(scope="session")
def sphere2():
    """Constant-generator manifold (round-sphere metric), n = 2."""
    return Manifold(AxisSpectrum((3.0, 2.0, 1.0)), GeneratorFunction.const(1.0))


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)


def interior_point(man, fracs):
    """Interior base point from per-coordinate quarter fractions."""
    return np.asarray(fracs, float) * man.alpha
