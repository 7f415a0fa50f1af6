import math

import pytest
from hypothesis import settings

from orderstat import marginals as mg

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

FAMILIES = [
    mg.Gaussian(1.0),
    mg.Gaussian(2.5),
    mg.Laplace(1.0),
    mg.Laplace(1 / math.sqrt(2)),
    mg.Uniform(math.sqrt(3.0)),
    mg.Uniform(0.4),
    mg.HalfNormalModulus(1.0),
    mg.ShiftedExponential(1.0, True),
    mg.ShiftedExponential(3.0, False),
    mg.PointScaledCopy(mg.ShiftedExponential(1.0, True), -2.0),
    mg.PointScaledCopy(mg.Laplace(1.0), 0.5),
]


@pytest.fixture(params=FAMILIES, ids=lambda m: m.label())
def family(request):
    return request.param


ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, title: str, ok: bool, detail: str = ""):
        ACCEPTANCE[number] = (title, bool(ok), detail)
        print(f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
