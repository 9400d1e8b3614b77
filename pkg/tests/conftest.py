import os
import sys

from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

import pytest

_LINES = []


@pytest.fixture
def acceptance(capsys):
    """report(k, ok, detail, elapsed, budget): print one PASS/FAIL line and assert."""

    def report(k, ok, detail, elapsed, budget):
        in_time = elapsed < budget
        good = bool(ok) and in_time
        line = (f"{'PASS' if good else 'FAIL'} criterion {k:>2}: {detail} "
                f"[{elapsed:.1f}s, budget {budget:.0f}s{'' if in_time else ', over budget'}]")
        _LINES.append(line)
        with capsys.disabled():
            print("\n" + line, flush=True)
        assert good, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
