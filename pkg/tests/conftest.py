import itertools

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def all_indices(dims):
    return np.array(list(itertools.product(*[range(n) for n in dims])), dtype=np.int64)


def dense_from_cores(cores):
    """Brute-force entrywise contraction, independent of the library code."""
    dims = [c.shape[1] for c in cores]
    out = np.empty(dims)
    for idx in itertools.product(*[range(n) for n in dims]):
        v = np.ones((1, 1))
        for k, i in enumerate(idx):
            v = v @ cores[k][:, i, :]
        out[idx] = v[0, 0]
    return out


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for i in sorted(results):
            terminalreporter.write_line(results[i])
