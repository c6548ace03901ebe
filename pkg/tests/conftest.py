import pytest

from nilwillmore import revolution

ACCEPTANCE_RESULTS: dict = {}


@pytest.fixture(scope="session")
def cmc_curves():
    """Generated cmc meridians keyed by H (801 samples each)."""
    cache = {}

    def get(H, n=801):
        key = (H, n)
        if key not in cache:
            cache[key] = revolution.generate_cmc_profile(H, n=n)
        return cache[key]

    return get


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE_RESULTS[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
