import pytest

from sheathlab import config as cfg
from sheathlab.model import PhysicalParams, degenerate_u_inf
from sheathlab.stationary import Grid, default_grid, default_length, solve_sheath

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance():
    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LINES.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


@pytest.fixture(scope="session")
def nondeg_params():
    return PhysicalParams(m=1.0, gamma=2.0, R=1.0, T_inf=1.0, u_inf=-2.0).with_phi_b(0.05)


@pytest.fixture(scope="session")
def deg_params():
    return PhysicalParams(u_inf=degenerate_u_inf(1.0, 2.0, 1.0, 1.0)).with_phi_b(0.01)


@pytest.fixture(scope="session")
def nondeg_profile(nondeg_params):
    return solve_sheath(nondeg_params, default_grid(nondeg_params, 4096))


@pytest.fixture(scope="session")
def small_profile(nondeg_params):
    return solve_sheath(nondeg_params, Grid(default_length(nondeg_params), 512))


@pytest.fixture(scope="session")
def deg_profile(deg_params):
    return solve_sheath(deg_params, default_grid(deg_params, 8192))


@pytest.fixture(scope="session")
def preset():
    def load(name):
        return cfg.load(preset=name).sim
    return load

