import time
from contextlib import contextmanager

import pytest

_CRITERIA = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA] = []


@pytest.fixture
def criterion(request, capsys):
    """Context manager that records one acceptance criterion as PASS or FAIL.

    A criterion fails when its block raises or when it exceeds ``budget``
    seconds. The verdict line is printed immediately and repeated in the
    terminal summary.
    """
    results = request.config.stash[_CRITERIA]

    @contextmanager
    def run(name, budget):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            line = f"{name} FAIL ({time.perf_counter() - start:.2f}s): {exc!s}".splitlines()[0]
            _report(results, capsys, line)
            raise
        elapsed = time.perf_counter() - start
        if elapsed > budget:
            line = f"{name} FAIL ({elapsed:.2f}s): over the {budget:g}s budget"
            _report(results, capsys, line)
            raise AssertionError(line)
        _report(results, capsys, f"{name} PASS ({elapsed:.2f}s)")

    return run


def _report(results, capsys, line):
    results.append(line)
    with capsys.disabled():
        print(f"\n{line}", flush=True)


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
