import numpy as np
import pytest

from latentattr import _backend
from latentattr.model import MlpSpec, linear_mlp, random_mlp


@pytest.fixture(params=_backend.available_backends())
def backend(request):
    """Run a test once per available kernel backend."""
    previous = _backend.BACKEND
    _backend.set_backend(request.param)
    yield request.param
    _backend.set_backend(previous)


@pytest.fixture
def linear2():
    return linear_mlp([[1.0, 2.0], [3.0, 4.0]])


@pytest.fixture
def identity2():
    return linear_mlp(np.eye(2))


@pytest.fixture
def tanh_mlp():
    return random_mlp([20, 16, 4], seed=11, activation="tanh", scale=1.5)


def const_field(F):
    """Vector field MLP that ignores its input and returns the flattened matrix ``F``."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    H, D = F.shape
    return MlpSpec((np.zeros((H * D, H + 1)),), (F.ravel(),), ("identity",))


_acceptance = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    label = marker.args[0]
    ok = call.excinfo is None
    _acceptance[label] = _acceptance.get(label, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_acceptance, key=lambda s: int(s.split("-")[1])):
        terminalreporter.write_line(f"{label}: {'PASS' if _acceptance[label] else 'FAIL'}")
