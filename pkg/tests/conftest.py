import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

warnings.filterwarnings("ignore", message=".*TBB.*")
sys.path.insert(0, str(Path(__file__).parent))

from ellobst.geometry import QuadraticBlowdown  # noqa: E402
from ellobst.obstacle import GridSpec, solve_obstacle  # noqa: E402
from ellobst.potential import kappa_coefficients  # noqa: E402
from ellobst.solution import EllipsoidSolution  # noqa: E402

SPHEROID_SHAPE = (2.0, 1.0, 1.0)
BOX_RADIUS = 3.0


@pytest.fixture(scope="session")
def spheroid_q():
    return QuadraticBlowdown.normalized(kappa_coefficients(SPHEROID_SHAPE))


@pytest.fixture(scope="session")
def spheroid(spheroid_q):
    return EllipsoidSolution.from_blowdown(spheroid_q)


@pytest.fixture(scope="session")
def ball():
    return EllipsoidSolution.from_blowdown(QuadraticBlowdown((1 / 6, 1 / 6, 1 / 6)))


@pytest.fixture(scope="session")
def spheroid_solves(spheroid):
    """Coarse spheroid solves for the convergence study, with wall times."""
    out = {}
    for m in (33, 65):
        t = time.perf_counter()
        fld = solve_obstacle(GridSpec(3, BOX_RADIUS, m), spheroid)
        out[m] = (fld, time.perf_counter() - t)
    return out


@pytest.fixture(scope="session")
def spheroid_cli_run(tmp_path_factory, spheroid_q):
    """The m=129 spheroid solve, produced by the command line driver."""
    from ellobst.cli import main
    from ellobst.io import read_field

    out = tmp_path_factory.mktemp("spheroid129")
    q = ",".join(repr(v) for v in spheroid_q.diag)
    t = time.perf_counter()
    code = main(["solve", "--q", q, "--m", "129", "--box-radius", str(BOX_RADIUS), "--out", str(out),
                 "--no-figures"])
    elapsed = time.perf_counter() - t
    return {"code": code, "dir": out, "field": read_field(out / "field.bin"), "seconds": elapsed, "q": q}


def unit_directions(count, dim=3, seed=0):
    g = np.random.default_rng(seed).standard_normal((count, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)
