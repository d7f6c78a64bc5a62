from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.scn"


def scenario(name: str):
    from derivedint.cli import load_scenario
    return load_scenario(fixture_path(name))


def koszul(name: str):
    from derivedint.cli import koszul_from
    return koszul_from(scenario(name))


def cover(name: str, order: int | None = None):
    from derivedint.cli import cover_from
    sc = scenario(name)
    return cover_from(sc, order if order is not None else sc.options().get("order", 3))


@pytest.fixture(scope="session")
def line_tower():
    from derivedint.obstructions import obstruction_tower
    return obstruction_tower(cover("line-in-p2"))


@pytest.fixture(scope="session")
def conic_tower():
    from derivedint.obstructions import obstruction_tower
    return obstruction_tower(cover("conic-in-p2"))


@pytest.fixture(scope="session")
def diagonal_tower():
    from derivedint.obstructions import obstruction_tower
    return obstruction_tower(cover("diagonal-p1"))


# -- acceptance summary: one PASS/FAIL line per criterion --------------------

_CRITERIA: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _CRITERIA[number] = (title, "PASS" if rep.passed else "FAIL", rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status, took = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status} {took:7.2f}s  {title}")
