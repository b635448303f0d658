import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_partition(rng, max_regions=12, max_side=16, min_side=3):
    """Random image plus a compact label map grown by flood fill from seeds."""
    h = int(rng.integers(min_side, max_side + 1))
    w = int(rng.integers(min_side, max_side + 1))
    k = int(rng.integers(1, min(max_regions, h * w) + 1))
    labels = np.full((h, w), -1)
    seeds = rng.choice(h * w, size=k, replace=False)
    frontier = []
    for lbl, s in enumerate(seeds):
        labels.flat[s] = lbl
        frontier.append(s)
    while frontier:
        pos = int(rng.integers(len(frontier)))
        s = frontier.pop(pos)
        y, x = divmod(int(s), w)
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            yy, xx = y + dy, x + dx
            if 0 <= yy < h and 0 <= xx < w and labels[yy, xx] < 0:
                labels[yy, xx] = labels[y, x]
                frontier.append(yy * w + xx)
    return labels


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
