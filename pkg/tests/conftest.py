import numpy as np
import pytest

from nsklimit.config import FarField, FluidParams, Formulation, RunConfig, SchemeConfig
from nsklimit.core import Grid1D, State, sharp_riemann_data
from nsklimit.riemann import godunov_trajectory, stationary_shock_states
from nsklimit.solver import Trajectory

RUN_CONFIG_TEXT = """\
# symmetric double rarefaction
gamma = 2.0
a = kinetic
epsilon = 0.1
x_min = -3.0
x_max = 3.0
n = 120
rho_minus = 1.0
u_minus = -0.5
rho_plus = 1.0
u_plus = 0.5
t_end = 0.3
snapshot_times = 0.1, 0.2
window = -1.0, 1.0
"""


@pytest.fixture
def kinetic2():
    return FluidParams.kinetic(2.0)


@pytest.fixture
def unit_gas():
    """a = 1, γ = 2"""
    return FluidParams(a=1.0, gamma=2.0)


@pytest.fixture
def uniform_far():
    return FarField(rho_minus=1.0, u_minus=0.0, rho_plus=1.0, u_plus=0.0)


@pytest.fixture
def rarefaction_far():
    return FarField(rho_minus=1.0, u_minus=-0.5, rho_plus=1.0, u_plus=0.5)


@pytest.fixture
def run_config_text():
    return RUN_CONFIG_TEXT


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(RUN_CONFIG_TEXT, encoding="utf-8")
    return path


def make_constant_trajectory(grid, p, far, times, rho=1.0, v=0.0, formulation=Formulation.EFFECTIVE_V):
    snaps = [
        State(np.full(grid.n, rho), np.full(grid.n, rho * v), formulation, t) for t in times
    ]
    return Trajectory(grid=grid, far=far, params=p, formulation=formulation, snapshots=snaps)


@pytest.fixture
def constant_trajectory(kinetic2, uniform_far):
    grid = Grid1D(-1.0, 1.0, 64)
    return make_constant_trajectory(grid, kinetic2, uniform_far, [0.0, 0.25, 0.5, 0.75, 1.0])


@pytest.fixture
def standing_shock():
    """Godunov run of an admissible standing 1-shock, γ = 2 with kinetic a"""
    p = FluidParams.kinetic(2.0)
    left, right = stationary_shock_states(1.0, 2.0, p)
    far = FarField(rho_minus=left[0], u_minus=left[1], rho_plus=right[0], u_plus=right[1])
    grid = Grid1D(-1.0, 1.0, 100)
    initial = sharp_riemann_data(far, grid)
    return godunov_trajectory(initial, far, p, grid, 0.2, snapshot_times=[0.05, 0.1, 0.15])


@pytest.fixture
def small_scheme():
    return SchemeConfig(t_end=0.1, snapshot_times=[0.05])


@pytest.fixture
def study_config(rarefaction_far):
    return RunConfig(
        fluid=FluidParams.kinetic(2.0),
        far=rarefaction_far,
        scheme=SchemeConfig(t_end=0.4),
        x_min=-3.0,
        x_max=3.0,
        n=60,
        window=(-1.0, 1.0),
    )
