from __future__ import annotations

import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "pkg",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "pkg"))


def delta_product(N: int) -> list[int]:
    """q prod (1 - q^n)^24 up to q^N by plain integer convolution."""
    p = [0] * (N + 1)
    p[0] = 1
    for n in range(1, N + 1):
        for _ in range(24):
            for i in range(N, n - 1, -1):
                p[i] -= p[i - n]
    return [0] + p[:N]


@pytest.fixture
def isolated_cache(tmp_path, monkeypatch):
    path = tmp_path / "eigencache.txt"
    monkeypatch.setenv("CUSPVARIANCE_CACHE", str(path))
    return path


# --- acceptance reporting -------------------------------------------------------------------
# Each acceptance test carries @pytest.mark.criterion(n) and may fill the ``criterion_detail``
# dict; one PASS/FAIL line per criterion, taken from the real test outcome, ends the run.

_DETAIL = pytest.StashKey[dict]()
_LINES = pytest.StashKey[dict]()


@pytest.fixture
def criterion_detail(request):
    d: dict = {}
    request.node.stash[_DETAIL] = d
    return d


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    lines = item.config.stash.setdefault(_LINES, {})
    n = mark.args[0]
    if n in lines and lines[n][0] == "FAIL":
        return
    detail = item.stash.get(_DETAIL, {})
    text = " ".join(f"{k}={v}" for k, v in detail.items())
    lines[n] = ("PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL", text)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        status, text = lines[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status} {text}".rstrip())
