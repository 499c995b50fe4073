import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=300)
settings.load_profile(os.environ.get("POLARLAB_HYPOTHESIS", "default"))

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion and print it."""

    def record(number, title, items):
        # items: (label, value, op, threshold) with op "<=" or ">="
        ok = all((v <= t) if op == "<=" else (v >= t) for _, v, op, t in items)
        parts = ", ".join(f"{label} {v:.3g} {op} {t:g}" for label, v, op, t in items)
        line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title} [{parts}]"
        _ACCEPTANCE.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
