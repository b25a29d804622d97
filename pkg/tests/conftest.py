import math
import os
import sys
import tempfile
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# one results cache per test session, never the user's
os.environ["PLAPEIG_CACHE_DIR"] = tempfile.mkdtemp(prefix="plapeig-cache-")

from plapeig.fem import solve_first_eig  # noqa: E402
from plapeig.geometry import make_disc, make_sector, make_wedge  # noqa: E402

ACCEPTANCE_LINES = []


@lru_cache(maxsize=None)
def disc_mesh(h, order=None):
    return make_disc(1.0, h, order=order)


@lru_cache(maxsize=None)
def wedge_mesh(k, h):
    return make_wedge(1.0, k, h)


@lru_cache(maxsize=None)
def sector_mesh(angle, h):
    return make_sector(1.0, angle, h)


@lru_cache(maxsize=None)
def wedge_eig(k, p, h=0.05):
    return solve_first_eig(wedge_mesh(k, h), p, tol=1e-10)


@lru_cache(maxsize=None)
def disc_eig(p, h=0.05):
    return solve_first_eig(disc_mesh(h), p, tol=1e-10)


@pytest.fixture(scope="session")
def cache():
    from plapeig.harness import ResultCache

    return ResultCache.from_env()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


HALF_PI = math.pi / 2
