import math

import pytest
from hypothesis import HealthCheck, settings

from cfsqueezer.config import RunConfig
from cfsqueezer.network import CFSConfig, ControllerBS, PropagationSegment
from cfsqueezer.plants import ButterworthBPF, CavityDOPOParams, LangevinDOPOParams

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BULK_CAVITY = dict(T_o=0.1, L_o=0.005, l_o=0.5, xi=0.9)


def langevin_cfg(R_f=0.5, xi=0.9, L_f=0.02, bpf=None, delta=0.0):
    p = LangevinDOPOParams(BULK_CAVITY["T_o"], BULK_CAVITY["L_o"], BULK_CAVITY["l_o"], xi)
    seg_L = 1 - math.sqrt(1 - L_f)
    return CFSConfig(p, ControllerBS(R_f), PropagationSegment(seg_L, 0.25),
                     PropagationSegment(seg_L, 0.25), bpf, delta)


def freespace_cfg(R_f=0.5, xi=0.9, delta=0.0, bpf=True):
    p = CavityDOPOParams.calibrated(0.9, 0.005, 0.5, 0.01, xi, flat_gain=True)
    seg_L = 1 - math.sqrt(0.98)
    return CFSConfig(p, ControllerBS(R_f), PropagationSegment(seg_L, 0.25),
                     PropagationSegment(seg_L, 0.25),
                     ButterworthBPF(2 * math.pi * 100e9) if bpf else None, delta)


@pytest.fixture(scope="session")
def fs_run():
    return RunConfig.load("freespace_bulk")


@pytest.fixture(scope="session")
def wg_run():
    return RunConfig.load("waveguide_ln")


FS_GRID = [round(v, 4) for v in __import__("numpy").linspace(0, 0.95, 8)]


@pytest.fixture(scope="session")
def fs_map(fs_run):
    from cfsqueezer.feasibility import sweep_map
    return sweep_map(fs_run.build(), FS_GRID, FS_GRID, fs_run.search_options(), fs_run.nyquist_options())


@pytest.fixture(scope="session")
def wg_map(wg_run):
    from cfsqueezer.feasibility import sweep_map
    return sweep_map(wg_run.build(), wg_run.rf_grid(), wg_run.xi_grid(), wg_run.search_options(),
                     wg_run.nyquist_options())


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: float(s.split()[1].rstrip("abcd"))):
            terminalreporter.write_line(line)
