import pytest

from paultrap import floquet
from paultrap.model import TrapConfig
from paultrap.quantum import Grid

_RESULTS = {}


class CriterionLog:
    """Collects the sub-checks of one acceptance criterion."""

    def __init__(self, number, title):
        self.number = number
        self.title = title
        self.parts = []

    def check(self, name, ok, detail=""):
        self.parts.append((name, bool(ok), detail))
        return ok

    @property
    def passed(self):
        return bool(self.parts) and all(ok for _, ok, _ in self.parts)

    def assert_all(self):
        failed = [f"{n} ({d})" for n, ok, d in self.parts if not ok]
        assert not failed, "; ".join(failed)


@pytest.fixture
def criterion():
    logs = []

    def make(number, title):
        log = CriterionLog(number, title)
        logs.append(log)
        _RESULTS[number] = log
        return log

    return make


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")

    def key(k):
        head, _, tail = str(k).partition("-")
        return (int(head), tail)

    for number in sorted(_RESULTS, key=key):
        log = _RESULTS[number]
        status = "PASS" if log.passed else "FAIL"
        tr.write_line(f"[{status}] criterion {number}: {log.title}")
        for name, ok, detail in log.parts:
            tr.write_line(f"    {'ok  ' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture(scope="session")
def standard_cfg():
    return TrapConfig(a=0.0, q=0.4, coupling=0.65, phase=0.0, hbar=0.29)


@pytest.fixture(scope="session")
def default_grid():
    return Grid(-80.0, 80.0, 4096)


@pytest.fixture(scope="session")
def floquet_200(standard_cfg, default_grid):
    """Floquet set of the standard parameters in a 200-state basis with nu = 0.29."""
    basis = floquet.ReferenceBasis(default_grid, 0.29, 200, standard_cfg.hbar)
    mono = floquet.build_monodromy(standard_cfg, basis, floquet.DEFAULT_DT)
    return mono, floquet.floquet_spectrum(mono)
