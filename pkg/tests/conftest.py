import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import GAMMA, HY, IG, T  # noqa: E402

from mmquote import IntensityModel, SingleAssetProblem, solve_theta  # noqa: E402


def make_problem(params=IG, xi=GAMMA, **changes):
    lam = IntensityModel.exponential(params["A"], params["k"])
    base = dict(
        sigma=params["sigma"], gamma=GAMMA, xi=xi, delta_qty=params["delta_qty"], Q=params["Q"], T=T, bid_intensity=lam
    )
    base.update(changes)
    return SingleAssetProblem(**base)


def supersolution_slack(surface, problem) -> float:
    """Max of ``theta - (H^b(0) + H^a(0)) (T - t)`` over the surface; must be <= 0."""
    hb = problem.bid_context.hamiltonian(0.0)[0]
    ha = problem.ask_context.hamiltonian(0.0)[0]
    bound = (hb + ha) * (problem.T - surface.time_grid)[:, None]
    return float(np.max(surface.values - bound))


@pytest.fixture(scope="session")
def ig_a():
    p = make_problem(IG, GAMMA)
    return p, solve_theta(p, dt=1.0)


@pytest.fixture(scope="session")
def ig_b():
    p = make_problem(IG, 0.0)
    return p, solve_theta(p, dt=1.0)


@pytest.fixture(scope="session")
def hy_a():
    p = make_problem(HY, GAMMA)
    return p, solve_theta(p, dt=1.0)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(RESULTS):
            terminalreporter.write_line(line)
