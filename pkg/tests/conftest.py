import numpy as np
import pytest

from lpgcn import _backend
from lpgcn.graph import build_adjacency
from lpgcn.model import Dataset

P_GRID = (1.001, 1.149, 1.32, 1.516, 1.741, 2.0)
FILTERS = ("unnormalized", "normalized", "random_walk", "augmented_normalized")


def random_graph(n, prob, rng):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < prob
    return build_adjacency(np.stack([iu[keep], ju[keep]], axis=1), n)


def path3():
    return build_adjacency([(0, 1), (1, 2)], 3)


def toy_dataset(n=6, d=3, seed=0, labels=None, train=None, edges=None):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    y = labels if labels is not None else np.arange(n) % 2
    tr = train if train is not None else np.arange(0, n, 2)
    te = np.setdiff1d(np.arange(n), tr)
    edges = edges if edges is not None else [(i, i + 1) for i in range(n - 1)]
    return Dataset(x, y, tr, te, build_adjacency(edges, n))


@pytest.fixture(params=_backend.available())
def backend(request):
    return request.param


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def report(criterion, ok, detail):
    ACCEPTANCE[criterion] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[criterion]
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[ok]
        terminalreporter.write_line(f"criterion {criterion:2d}: {status}  {detail}")
