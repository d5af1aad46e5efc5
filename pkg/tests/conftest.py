from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from logsentinel import dataset as D
from logsentinel import stats
from logsentinel.log_ingest import ingest_lines

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

SELECTED = {"$ne", "$", "planningTimeMicros", "query_length_keywords_only", "label"}


def paper_like(seed=1):
    """Synthetic log -> joined dataset -> significance-reduced dataset."""
    queries = D.bundled_queries()
    records, _ = ingest_lines(D.synth_logs(queries, seed))
    ds, _ = D.build_dataset(records, queries)
    _, reduced = stats.select_features(ds)
    return ds, reduced


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def paper_data():
    return paper_like(1)


# One line per acceptance criterion, filled in by test_acceptance.py.
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
