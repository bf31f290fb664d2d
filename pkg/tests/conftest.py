import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rpesim.fockspace import PureState, atom2, new_space, photon_mode  # noqa: E402

S = 1 / math.sqrt(2)

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, text): exit criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "_acceptance", None)
    if marker:
        number, text = marker
        ok = _acceptance.get(number, (True, text))[0] and report.outcome == "passed"
        _acceptance[number] = (ok, text)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m:
        rep._acceptance = m.args


def pytest_terminal_summary(terminalreporter):
    if _acceptance:
        terminalreporter.section("acceptance criteria")
        for number, (ok, text) in sorted(_acceptance.items()):
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {text}")


@pytest.fixture
def atom_pair_space():
    return new_space([photon_mode("d"), atom2("z1"), atom2("z2")])


@pytest.fixture
def phi_plus(atom_pair_space):
    """(z+z+ + z-z-)/sqrt2 with one photon in d."""
    sp = atom_pair_space
    return PureState.from_terms(sp, {sp.ket(d=1, z1="+", z2="+"): S, sp.ket(d=1, z1="-", z2="-"): S})
