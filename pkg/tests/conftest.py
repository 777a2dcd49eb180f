import os

import pytest
from hypothesis import HealthCheck, settings

from recur_ldp import Bernoulli, Markov

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], print_blob=True
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


@pytest.fixture
def acceptance(request):
    """Recorder for one pass/fail line per acceptance criterion (printed in the summary)."""
    table = request.config.stash[_ACCEPTANCE]

    def record(number, ok, detail, part=None):
        entry = table.setdefault(number, {})
        entry[part or ""] = (bool(ok), detail)
        tag = f"{number}{'/' + part if part else ''}"
        print(f"criterion {tag}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_ACCEPTANCE, {})
    if not table:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(table):
        parts = table[number]
        ok = all(v[0] for v in parts.values())
        detail = "; ".join((f"{k}: " if k else "") + v[1] for k, v in sorted(parts.items()))
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def bern37():
    return Bernoulli("ab", [0.3, 0.7])


@pytest.fixture(scope="session")
def markov_example():
    return Markov("ab", [[0.9, 0.1], [0.5, 0.5]])


@pytest.fixture(scope="session")
def figure_pair():
    return Bernoulli("012", [0.2, 0.3, 0.5]), Bernoulli("012", [0.6, 0.3, 0.1])
