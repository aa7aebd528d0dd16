import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "repo", deadline=None, derandomize=True, print_blob=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def toy_dataset():
    from ethrep.dataset import read_dataset_csv
    from ethrep.synthetic import bundled_path
    return read_dataset_csv(bundled_path("toy.csv"))


@pytest.fixture(scope="session")
def corpus():
    from ethrep.dataset import read_dataset_csv
    from ethrep.synthetic import bundled_path
    return read_dataset_csv(bundled_path("synthetic_corpus.csv"))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Context manager that records one PASS/FAIL line for an acceptance criterion."""
    from contextlib import contextmanager

    @contextmanager
    def record(name: str, detail=None):
        info = {}
        try:
            yield info
        except BaseException as exc:
            if type(exc).__name__ == "Skipped":
                ACCEPTANCE_LINES.append(f"SKIP  {name}  ({exc})")
            else:
                ACCEPTANCE_LINES.append(f"FAIL  {name}  ({type(exc).__name__}: {exc})".splitlines()[0])
            raise
        extra = ", ".join(f"{k}={v}" for k, v in info.items())
        ACCEPTANCE_LINES.append(f"PASS  {name}" + (f"  ({extra})" if extra else ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
