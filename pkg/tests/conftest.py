import contextlib
import math

import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance criterion for the end-of-run summary.

    Usage: ``with criterion(3, "thermal cross-check") as detail: ...``; the
    block may store a short string in ``detail["text"]``.
    """

    @contextlib.contextmanager
    def _record(number, title):
        detail = {"text": ""}
        try:
            yield detail
        except BaseException:
            _CRITERIA[number] = (title, False, detail["text"])
            raise
        _CRITERIA[number] = (title, True, detail["text"])

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, text = _CRITERIA[number]
        line = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}"
        if text:
            line += f" :: {text}"
        terminalreporter.write_line(line)


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture(scope="session")
def lattice_state():
    """Finite-temperature lattice state used by the volume-law checks."""
    from fermicavity.thermo import CavityModel, ThermalState

    ts = ThermalState(T=1.0, mu=-2.0)
    cavity = CavityModel(volume=1.0e6, lattice_a=1.0 / math.sqrt(2.0))
    return ts, cavity


@pytest.fixture(scope="session")
def gf2d(lattice_state):
    from fermicavity.entanglement import generating_function_2d

    return generating_function_2d(*lattice_state)
