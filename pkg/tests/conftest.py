import pytest

_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def acceptance(request):
    """Record ``(criterion, passed, detail)``; the lines are echoed at the end of the run."""
    results = request.config.stash[_RESULTS]

    def record(number, name, passed, detail=""):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        results[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(_RESULTS, {})
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
