import contextlib
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

_RESULTS_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS_KEY] = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion for the end-of-run summary."""
    results = request.config.stash[_RESULTS_KEY]

    @contextlib.contextmanager
    def record(number, title, budget_s):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            elapsed = time.perf_counter() - start
            results[number] = (title, False, f"{elapsed:.2f}s, {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            raise
        elapsed = time.perf_counter() - start
        ok = elapsed < budget_s
        results[number] = (title, ok, f"{elapsed:.2f}s of {budget_s:g}s budget")
        assert ok, f"criterion {number} took {elapsed:.2f}s, budget {budget_s}s"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, ok, detail = results[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {title} ({detail})")


# --------------------------------------------------------------------------
# Shared strategies
# --------------------------------------------------------------------------


@st.composite
def pmfs(draw, min_size=2, max_size=6, allow_zero=False):
    n = draw(st.integers(min_size, max_size))
    lo = 0 if allow_zero else 1
    w = draw(st.lists(st.integers(lo, 100), min_size=n, max_size=n).filter(lambda v: sum(v) > 0))
    w = np.array(w, dtype=float)
    return w / w.sum()


@st.composite
def joints(draw, max_x=5, max_y=4):
    from fanotype import JointDist

    nx = draw(st.integers(2, max_x))
    ny = draw(st.integers(1, max_y))
    py = draw(pmfs(min_size=ny, max_size=ny))
    rows = [draw(pmfs(min_size=nx, max_size=nx, allow_zero=True)) for _ in range(ny)]
    return JointDist(py, np.array(rows))


def random_pmf(rng, n, zeros=False):
    w = rng.dirichlet(np.ones(n))
    if zeros and n > 2:
        w[rng.integers(n)] = 0.0
        w /= w.sum()
    return w
