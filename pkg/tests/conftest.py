import sys
from dataclasses import replace
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from neuroswap.accel import SramModel
from neuroswap.config import MS, MW, NJ, PJ, SweepGrid, SystemBudget, Scenario, UJ, US, default_scenario
from neuroswap.flash import FlashDevice, FlashGeometry, FlashPower, FlashTiming


def worked_geometry(chips=1, dies=1, planes=1):
    return FlashGeometry(chips, dies, planes, 4096, 256, 16384)


def worked_timing(**kw):
    base = dict(t_read=25 * US, t_program=200 * US, t_erase=700 * US, bus_bandwidth=200e6, t_cmd=1 * US)
    base.update(kw)
    return FlashTiming(**base)


def worked_power(**kw):
    base = dict(e_read_page=25 * UJ, e_program_page=25 * UJ, e_erase_block=10 * UJ,
                e_bus_per_byte=10 * PJ, p_chip_active=4 * MW, p_chip_idle=0.1 * MW)
    base.update(kw)
    return FlashPower(**base)


def worked_scenario(kernels, chips=4, accel=262_144, controller=0, deadline=20 * MS,
                    power_budget=1.0, leakage=0.0, e_access=0.0, **power_kw):
    """Small hand-checkable scenario: 16 KiB pages, 200 MB/s bus, 1 us command overhead."""
    flash = FlashDevice(worked_geometry(chips), worked_timing(), worked_power(**power_kw))
    budget = SystemBudget(total_data_rate=144e6, sample_bits=16, power_budget=power_budget,
                          response_deadline=deadline, sram_capacity_accel=accel,
                          sram_capacity_controller=controller)
    return Scenario(flash=flash, kernels=tuple(kernels), sram=SramModel(leakage, e_access),
                    budget=budget, grid=SweepGrid(channels=(1000,)))


@pytest.fixture(scope="session")
def default():
    return default_scenario()


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    """Print one PASS/FAIL line for an acceptance criterion, then assert it."""
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
