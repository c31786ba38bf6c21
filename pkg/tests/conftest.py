import os
import time

import numpy as np
import pytest

from drivenwell import ModelParams, solve
from drivenwell.config import RunConfig
from drivenwell.crossing import fit_crossing
from drivenwell.doublewell import build_static_hamiltonian
from drivenwell.experiments import _solved_sweep


def _threads():
    return os.cpu_count() or 1


@pytest.fixture(scope="session")
def sweep_timing():
    return {}


@pytest.fixture(scope="session")
def sweep_main(sweep_timing):
    """101-point omega sweep of the headline regime (D=2, F=1e-3)."""
    config = RunConfig()
    start = time.perf_counter()
    sw = _solved_sweep(config, _threads())
    sweep_timing["sweep_main"] = time.perf_counter() - start
    return sw


@pytest.fixture(scope="session")
def main_fit(sweep_main):
    return fit_crossing(sweep_main)


@pytest.fixture(scope="session")
def center_solution(main_fit):
    return solve(ModelParams(omega=main_fit.center))


@pytest.fixture(scope="session")
def off_solution():
    """Far-detuned reference point on the same sweep axis."""
    return solve(ModelParams(omega=1.45))


@pytest.fixture(scope="session")
def undriven_solution():
    """F = 0 at a driving frequency away from internal resonances."""
    return solve(ModelParams(F=0.0, omega=1.37))


@pytest.fixture(scope="session")
def static_spectrum():
    h = build_static_hamiltonian(ModelParams())
    w, v = np.linalg.eigh(h)
    return w, v
