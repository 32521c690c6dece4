import numpy as np
import pytest

from src.catalog.service import build
from src.numerics.schemas import TolerancePolicy


@pytest.fixture(scope="function")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="function")
def policy():
    return TolerancePolicy()


@pytest.fixture(scope="function")
def hadamard_entry():
    return build("hadamard", n=3)


@pytest.fixture(scope="function")
def disk_entry():
    return build("disk_quartic")


@pytest.fixture(scope="function")
def nodal_entry():
    return build("nodal_cubic")


@pytest.fixture(scope="function")
def report_dir(tmp_path):
    path = tmp_path / "reports"
    path.mkdir()
    return path
