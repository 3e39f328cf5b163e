from collections import deque

import numpy as np
import pytest

from metricseg.loss import LossParams
from metricseg.optimize import FitConfig, fit_embeddings
from metricseg.synth import voronoi_labels


def bfs_components(shape, joined_pairs, active=None):
    """Flood-fill oracle: ``joined_pairs(p, q)`` says whether 4-neighbors join."""
    h, w = shape
    out = np.zeros(shape, dtype=np.int64)
    nxt = 0
    for y in range(h):
        for x in range(w):
            if out[y, x] or (active is not None and not active[y, x]):
                continue
            nxt += 1
            out[y, x] = nxt
            queue = deque([(y, x)])
            while queue:
                cy, cx = queue.popleft()
                for ny, nx in ((cy + 1, cx), (cy - 1, cx), (cy, cx + 1), (cy, cx - 1)):
                    if 0 <= ny < h and 0 <= nx < w and not out[ny, nx] \
                            and (active is None or active[ny, nx]) and joined_pairs((cy, cx), (ny, nx)):
                        out[ny, nx] = nxt
                        queue.append((ny, nx))
    return out


def same_partition(a, b):
    """True if two label maps induce the same partition (up to renaming)."""
    a, b = np.asarray(a).ravel(), np.asarray(b).ravel()
    if a.shape != b.shape:
        return False
    fwd, bwd = {}, {}
    for x, y in zip(a.tolist(), b.tolist()):
        if fwd.setdefault(x, y) != y or bwd.setdefault(y, x) != x:
            return False
    return True


@pytest.fixture(scope="session")
def pipeline_fit():
    """64x64 map with 8 Voronoi objects fitted at dim 8; shared by slow tests."""
    gt = voronoi_labels(64, 64, 8, seed=7)
    result = fit_embeddings(gt, FitConfig(loss=LossParams(dim=8), seed=7))
    return gt, result


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture()
def criterion(request):
    """Recorder for ``test_criterion_<n>_*`` tests: ``criterion(ok, detail)``."""
    number = int(request.node.name.split("_")[2])

    def record(ok, detail=""):
        ACCEPTANCE[number] = (bool(ok), detail)

    yield record
    ACCEPTANCE.setdefault(number, (False, "raised before its checks completed"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
