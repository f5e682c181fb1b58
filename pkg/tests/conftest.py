import numpy as np
import pytest

from tempocap.core import TimeInterval, make_corpus
from tempocap.retrieval import SegmentDoc


def random_corpus(n, dim=8, seed=0, duration=10.0):
    rng = np.random.default_rng(seed)
    return make_corpus(
        {"id": f"c{i:04d}", "caption": f"caption number {i}", "duration_s": duration,
         "embedding": rng.normal(size=dim)}
        for i in range(n)
    )


def random_intervals(rng, count):
    """``count`` valid intervals with endpoints on a coarse grid, so overlaps and gaps both occur."""
    out = []
    for _ in range(count):
        a, b = sorted(rng.choice(11, size=2, replace=False))
        out.append(TimeInterval(a / 10, b / 10))
    return out


def random_doc(rng, doc_id, dim, max_parts=5):
    k = int(rng.integers(1, max_parts + 1))
    return SegmentDoc(doc_id, tuple(zip(random_intervals(rng, k), rng.normal(size=(k, dim)))))


@pytest.fixture
def corpus10():
    return random_corpus(10, dim=16, seed=7)


ACCEPTANCE_RESULTS = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is not None and call.when == "call":
        ACCEPTANCE_RESULTS[marker.args[0]] = (marker.args[1], call.excinfo is None)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, ok = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {number}. {title}")
