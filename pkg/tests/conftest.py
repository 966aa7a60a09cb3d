import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rydsim.hamiltonian import build_operator
from rydsim.hilbert import BasisConfig, enumerate_basis
from rydsim.lattice import build_lattice, interaction_matrix, v0_for_blockade

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    monkeypatch.setenv("RYDSIM_NO_NUMBA", "1" if request.param == "numpy" else "0")
    return request.param


def make_system(nx, ny, basis="full", rb_over_a=1.15, omega=1.0, truncation=None):
    lat = build_lattice("square", nx, ny)
    inter = interaction_matrix(lat, v0_for_blockade(rb_over_a, omega), truncation)
    b = enumerate_basis(BasisConfig.for_lattice(lat, basis))
    return lat, inter, b, build_operator(b, inter)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
