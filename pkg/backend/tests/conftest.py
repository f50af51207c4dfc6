"""
Pytest configuration for raycert tests.
Fixtures load the bundled inputs and keep written artifacts in temporary
directories.
"""

from pathlib import Path

import pytest

from raycert.lengths import Length
from raycert.space_models import Lattice, PointModel, default_region, enumerate_window, load_model

BUNDLED = Path(__file__).resolve().parent.parent / "raycert" / "bundled"


@pytest.fixture(autouse=True)
def bundled_dir(settings):
    """
    Point RAYCERT_BUNDLED_DIR at the bundled inputs and pin the tolerance.

    Uses pytest-django's settings fixture, so a RAYCERT_DEFAULT_TOL from the
    environment never leaks into a test.
    """
    settings.RAYCERT_BUNDLED_DIR = BUNDLED
    settings.RAYCERT_DEFAULT_TOL = 1e-10
    return BUNDLED


@pytest.fixture
def bundled_model():
    """Load a bundled model by file stem."""

    def load(name: str) -> PointModel:
        return load_model(BUNDLED / "models" / f"{name}.json")

    return load


@pytest.fixture
def bundled_window(bundled_model):
    """Load a bundled model together with its declared window."""

    def load(name: str):
        model = bundled_model(name)
        return model, enumerate_window(model, default_region(model))

    return load


@pytest.fixture
def lattice1d():
    """Z with unit spacing."""
    return Lattice(1, name="Z")


@pytest.fixture
def lattice2d():
    """Z^2 with unit spacing."""
    return Lattice(2, name="Z2")


@pytest.fixture
def one():
    """The unit length."""
    return Length.of(1)


@pytest.fixture
def out_dir(tmp_path):
    """Directory for artifacts a test writes."""
    path = tmp_path / "out"
    path.mkdir()
    return path
