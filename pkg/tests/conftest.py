import numpy as np
import pytest

from patchqa import evalharness as E
from patchqa import train
from patchqa.dffs import train_pca

TRAIN_SEED = 0
TEST_SEED = 1


@pytest.fixture(scope="session")
def train_faces():
    return E.generate_synthetic_faces(TRAIN_SEED, 200)


@pytest.fixture(scope="session")
def test_faces():
    return E.generate_synthetic_faces(TEST_SEED, 50)


@pytest.fixture(scope="session")
def face_model(train_faces):
    return train(train_faces, created="2026-01-01T00:00:00+00:00")


@pytest.fixture(scope="session")
def eigen_model(train_faces):
    return train_pca(train_faces)


@pytest.fixture(scope="session")
def small_model():
    """Cheap model on 32x32 faces for tests that only need some valid model."""
    return train(E.generate_synthetic_faces(5, 20, side=32), created="fixed")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(ok, detail)``."""
    name = request.node.name

    def record(ok, detail=""):
        _ACCEPTANCE.append((name, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
