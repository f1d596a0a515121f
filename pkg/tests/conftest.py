import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion outcome: ``criterion(key, title, ok, detail, seconds)``."""
    results = request.config.stash.setdefault(_RESULTS, {})

    def record(key, title, ok, detail, seconds):
        line = f"{'PASS' if ok else 'FAIL'}  [{key}] {title}: {detail} ({seconds:.1f} s)"
        results[key] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
