import numpy as np
import pytest

from inertia.diffeo import CutoffConfig, TransformedNonlinearity, estimate_lipschitz
from inertia.gaps import find_sequence, squares
from inertia.perron import ManifoldMap, PerronConfig

# Small desk-scale manifold problem shared by the perron/jets/inertial_form tests.
N_MAX = 16
K = 8
CUT = CutoffConfig(0.5, 1.0)


def forcing(n=N_MAX, amp=0.2):
    g = np.zeros(n)
    g[0] = amp
    return g


@pytest.fixture(scope="session")
def nl():
    return TransformedNonlinearity(N_MAX, K, forcing(), CUT)


@pytest.fixture(scope="session")
def lipschitz():
    return estimate_lipschitz(K, CUT.R_big, 20, 0, n_max=N_MAX, g=forcing(), cut=CUT)


@pytest.fixture(scope="session")
def plan(lipschitz):
    return find_sequence(1, lipschitz.L1, lipschitz.L2, squares)


@pytest.fixture(scope="session")
def perron_cfg(plan):
    return PerronConfig.from_plan(plan, dt=1e-2)


@pytest.fixture(scope="session")
def manifold(perron_cfg, nl):
    return ManifoldMap(perron_cfg, nl, N_MAX)


@pytest.fixture
def base_p():
    p = np.zeros(N_MAX)
    p[0], p[1] = 0.3, -0.1
    return p


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k)):
        terminalreporter.write_line(ACCEPTANCE[key])
