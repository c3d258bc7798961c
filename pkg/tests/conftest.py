import pytest

from diffusense._accel import JIT_ENV

ACCEPTANCE_LINES = []


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    """Run a test once with the numba kernels and once with the numpy fallback."""
    monkeypatch.setenv(JIT_ENV, "1" if request.param == "numba" else "0")
    return request.param


@pytest.fixture
def numpy_backend(monkeypatch):
    monkeypatch.setenv(JIT_ENV, "0")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
