"""Operating-point enumeration and swap-feasibility classification.

The total data rate is held fixed, so adding channels lowers the per-channel
sampling rate and lengthens the time it takes to fill one processing window.
Each point is classified as cacheable (working sets fit in SRAM), or by
whether its per-window swap traffic finishes before the deadline on the
flash subsystem, and whether the whole system stays within the power budget.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

from .accel import Kernel, overflow_bytes, sram_power, working_set_bytes
from .config import Scenario, SystemBudget
from .emcost import kernel_io_per_window
from .errors import ModelError, NeuroswapError, ParameterError
from .flash import (FlashOp, IoPlan, bus_ceiling, max_parallel_chips, op_energy, op_latency,
                    page_transfer_time)

TIMING_OK = "ok"
LATENCY_LIMITED = "latency_limited"
BANDWIDTH_LIMITED = "bandwidth_limited"

VERDICTS = ("cacheable", "feasible", LATENCY_LIMITED, BANDWIDTH_LIMITED, "power_limited")


@dataclass(frozen=True)
class OperatingPoint:
    channels: int
    sampling_rate: float  # Hz, per channel


def operating_points(budget: SystemBudget, channel_list: Sequence[int]) -> list[OperatingPoint]:
    """Points sharing ``budget.total_data_rate``; those below 1 Hz are dropped with a warning."""
    points = []
    for c in channel_list:
        if c < 1:
            raise ParameterError(f"channel counts must be >= 1, got {c}")
        rate = budget.total_data_rate / (c * budget.sample_bits)
        if rate < 1.0:
            warnings.warn(f"{c} channels gives {rate:.3g} Hz sampling (< 1 Hz); point excluded",
                          stacklevel=2)
            continue
        points.append(OperatingPoint(c, rate))
    return points


def point_for(budget: SystemBudget, channels: int) -> OperatingPoint:
    pts = operating_points(budget, [channels])
    if not pts:
        raise ParameterError(f"{channels} channels is a degenerate operating point (< 1 Hz)")
    return pts[0]


@dataclass(frozen=True)
class SwapTraffic:
    write_bytes: int
    read_bytes: int
    window: float  # seconds to accumulate one processing window


def swap_traffic(kernel: Kernel, point: OperatingPoint, sram_capacity: float, mode: str,
                 block_words: int = 64, word_bytes: int = 4) -> SwapTraffic:
    window = kernel.window / point.sampling_rate
    if mode not in ("naive", "em"):
        raise ParameterError(f"mode must be 'naive' or 'em', got {mode!r}")
    over = overflow_bytes(kernel, point.channels, sram_capacity)
    if over == 0:
        return SwapTraffic(0, 0, window)
    if mode == "naive":
        return SwapTraffic(math.ceil(kernel.dirty_fraction * over), over, window)
    io = kernel_io_per_window(kernel, point.channels, sram_capacity, block_words, word_bytes, "em")
    block = block_words * word_bytes
    return SwapTraffic(io.writes * block, io.reads * block, window)


def kernel_capacities(kernels: Sequence[Kernel], channels: int, budget: SystemBudget) -> list[float]:
    """SRAM available to each kernel: its own accelerator SRAM plus a first-come share
    of the pooled controller SRAM (allocated in kernel order)."""
    pool = budget.sram_capacity_controller
    caps = []
    for k in kernels:
        need = max(0.0, working_set_bytes(k, channels) - budget.sram_capacity_accel)
        take = min(pool, need)
        pool -= take
        caps.append(budget.sram_capacity_accel + take)
    return caps


@dataclass(frozen=True)
class IoSchedule:
    """Per-window flash plans of one kernel (program write-back, then read-in)."""
    program: IoPlan
    read: IoPlan
    program_s: float
    read_s: float

    @property
    def io_s(self) -> float:
        return self.program_s + self.read_s


@dataclass(frozen=True)
class PointModel:
    """Everything the classifier derives for one point; shared with the simulator."""
    point: OperatingPoint
    capacities: tuple[float, ...]
    traffic: tuple[SwapTraffic, ...]
    cacheable: bool
    deadline: float
    sram_watts: float
    chips_active: int
    k: int


def _io_parallelism(scenario: Scenario, sram_watts: float) -> tuple[int, int]:
    b = scenario.budget
    share = max(0.0, b.power_budget - sram_watts - b.controller_overhead)
    geometry = scenario.flash.geometry
    # at least one chip must run to swap at all; the power check flags the overrun
    chips_active = max(1, max_parallel_chips(share, geometry, scenario.flash.power))
    return chips_active, chips_active * geometry.units_per_chip


def model_point(point: OperatingPoint, scenario: Scenario, mode: Optional[str] = None) -> PointModel:
    mode = mode or scenario.mode
    kernels = scenario.kernels
    if not kernels:
        raise ParameterError("at least one kernel is required")
    caps = kernel_capacities(kernels, point.channels, scenario.budget)
    traffic = tuple(swap_traffic(k, point, cap, mode, scenario.em_block_words, scenario.em_word_bytes)
                    for k, cap in zip(kernels, caps))
    cacheable = all(working_set_bytes(k, point.channels) <= cap for k, cap in zip(kernels, caps))
    resident = sum(min(working_set_bytes(k, point.channels), cap) for k, cap in zip(kernels, caps))
    access = scenario.budget.data_rate_bytes * len(kernels)
    sram_watts = sram_power(resident, access, scenario.sram)
    chips_active, k = _io_parallelism(scenario, sram_watts)
    deadline = min(min(t.window for t in traffic), scenario.budget.response_deadline)
    return PointModel(point, tuple(caps), traffic, cacheable, deadline, sram_watts, chips_active, k)


def io_schedule(write_bytes: int, read_bytes: int, pm: PointModel, scenario: Scenario) -> IoSchedule:
    g, t = scenario.flash.geometry, scenario.flash.timing
    prog = IoPlan(FlashOp.PROGRAM, math.ceil(write_bytes / g.page_size), pm.k, pm.chips_active)
    read = IoPlan(FlashOp.READ, math.ceil(read_bytes / g.page_size), pm.k, pm.chips_active)
    return IoSchedule(prog, read, op_latency(prog, g, t), op_latency(read, g, t))


@dataclass(frozen=True)
class FeasibilityReport:
    channels: int
    sampling_rate: float
    cacheable: bool
    timing: str           # ok | latency_limited | bandwidth_limited
    power: str            # ok | over_budget
    overall: bool
    write_bytes: int      # per window, all kernels
    read_bytes: int
    window_s: float       # shortest kernel window
    deadline_s: float
    io_s: float
    achieved_bps: float   # bytes moved per second of I/O time
    watts: float
    sram_watts: float
    flash_watts: float
    k: int
    chips_active: int

    @property
    def swap_bytes(self) -> int:
        return self.write_bytes + self.read_bytes

    @property
    def power_ok(self) -> bool:
        return self.power == "ok"

    @property
    def verdict(self) -> str:
        if not self.cacheable and self.timing != TIMING_OK:
            return self.timing
        if not self.power_ok:
            return "power_limited"
        return "cacheable" if self.cacheable else "feasible"

    @property
    def margin(self) -> float:
        """I/O time over deadline; 1.0 is the timing boundary."""
        return self.io_s / self.deadline_s


def _timing_class(sched: IoSchedule, deadline: float, swap_bytes: int, scenario: Scenario) -> str:
    if sched.io_s <= deadline:
        return TIMING_OK
    g, t = scenario.flash.geometry, scenario.flash.timing
    pages = sched.program.n_units + sched.read.n_units
    bus_s = pages * page_transfer_time(g, t)
    array_s = sched.io_s - bus_s
    demand = swap_bytes / deadline
    # the bus cannot carry it, or bus transfers dominate the I/O time
    if demand > bus_ceiling(g, t) or bus_s > array_s:
        return BANDWIDTH_LIMITED
    return LATENCY_LIMITED


def classify(point: OperatingPoint, scenario: Scenario, mode: Optional[str] = None) -> FeasibilityReport:
    """Classify one operating point of ``scenario`` (all of its kernels together).

    Swap traffic of every kernel is summed into one program plan and one read
    plan that must both finish within min(shortest window, response deadline).
    Flash power is per-kernel window energy over that kernel's window, plus
    idle chips for the remaining time.
    """
    pm = model_point(point, scenario, mode)
    flash = scenario.flash
    g, t, p = flash.geometry, flash.timing, flash.power
    if g.page_size <= 0:
        raise ParameterError("page_size must be > 0")

    w_total = sum(tr.write_bytes for tr in pm.traffic)
    r_total = sum(tr.read_bytes for tr in pm.traffic)
    sched = io_schedule(w_total, r_total, pm, scenario)
    timing = TIMING_OK if pm.cacheable else _timing_class(sched, pm.deadline, w_total + r_total, scenario)

    idle_watts = g.chips * p.p_chip_idle
    flash_watts = 0.0
    busy_fraction = 0.0
    for tr in pm.traffic:
        ks = io_schedule(tr.write_bytes, tr.read_bytes, pm, scenario)
        energy = (op_energy(ks.program, ks.program_s, g, t, p)
                  + op_energy(ks.read, ks.read_s, g, t, p))
        flash_watts += energy / tr.window
        busy_fraction += ks.io_s / tr.window
    flash_watts += idle_watts * max(0.0, 1.0 - busy_fraction)

    watts = pm.sram_watts + flash_watts + scenario.budget.controller_overhead
    power = "ok" if watts <= scenario.budget.power_budget else "over_budget"
    overall = (pm.cacheable or timing == TIMING_OK) and power == "ok"
    swap = w_total + r_total
    return FeasibilityReport(
        channels=point.channels, sampling_rate=point.sampling_rate, cacheable=pm.cacheable,
        timing=timing, power=power, overall=overall, write_bytes=w_total, read_bytes=r_total,
        window_s=min(tr.window for tr in pm.traffic), deadline_s=pm.deadline, io_s=sched.io_s,
        achieved_bps=swap / sched.io_s if sched.io_s > 0 else 0.0,
        watts=watts, sram_watts=pm.sram_watts, flash_watts=flash_watts,
        k=pm.k, chips_active=pm.chips_active,
    )


@dataclass(frozen=True)
class PointError:
    channels: int
    message: str

    @property
    def verdict(self) -> str:
        return "error"


@dataclass
class FeasibilityMap:
    scenario: Scenario
    mode: str
    reports: dict[int, Union[FeasibilityReport, PointError]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.reports)

    def verdicts(self) -> list[tuple[int, str]]:
        return [(c, r.verdict) for c, r in self.reports.items()]

    def feasible_channels(self) -> list[int]:
        return [c for c, r in self.reports.items()
                if isinstance(r, FeasibilityReport) and r.overall]

    def channels_with(self, verdict: str) -> list[int]:
        return [c for c, r in self.reports.items() if r.verdict == verdict]


def _classify_cell(args) -> Union[FeasibilityReport, PointError]:
    point, scenario, mode = args
    try:
        return classify(point, scenario, mode)
    except (NeuroswapError, ModelError) as exc:
        return PointError(point.channels, str(exc))


def sweep(scenario: Scenario, channels: Optional[Sequence[int]] = None, mode: Optional[str] = None,
          workers: int = 1) -> FeasibilityMap:
    """Classify every point of the grid; per-point errors are recorded, not raised.

    The map is identical for any ``workers`` count: cells are independent and
    results are collected in grid order.
    """
    mode = mode or scenario.mode
    channel_list = list(channels) if channels is not None else scenario.grid.channel_list()
    if not channel_list:
        raise ParameterError("sweep grid is empty")
    points = operating_points(scenario.budget, channel_list)
    cells = [(pt, scenario, mode) for pt in points]
    if workers > 1:
        chunk = max(1, len(cells) // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_classify_cell, cells, chunksize=chunk))
    else:
        results = [_classify_cell(c) for c in cells]
    fmap = FeasibilityMap(scenario, mode)
    for pt, rep in zip(points, results):
        fmap.reports[pt.channels] = rep
    return fmap


def sweep_rows(scenario: Scenario, channels: Optional[Sequence[int]] = None,
               mode: Optional[str] = None) -> dict[str, FeasibilityMap]:
    """One map per kernel, each kernel swept alone."""
    rows = {}
    for i, kernel in enumerate(scenario.kernels):
        name = kernel.name if kernel.name not in rows else f"{kernel.name}#{i}"
        rows[name] = sweep(scenario.with_kernels(kernel), channels, mode)
    return rows


def capacity_candidates(kernel: Kernel, channels: int, page_size: int) -> list[int]:
    """Accelerator SRAM sizes searched by ``required_sram``: page multiples below the
    working set, then the working set itself."""
    ws = math.ceil(working_set_bytes(kernel, channels))
    caps = list(range(0, ws, page_size))
    caps.append(ws)
    return caps


def _feasible_at(capacity: int, kernel: Kernel, point: OperatingPoint, scenario: Scenario,
                 mode: Optional[str]) -> bool:
    sc = replace(scenario, kernels=(kernel,),
                 budget=replace(scenario.budget, sram_capacity_accel=capacity))
    try:
        return classify(point, sc, mode).overall
    except ModelError:
        return False


def required_sram(kernel: Kernel, point: OperatingPoint, scenario: Scenario,
                  mode: Optional[str] = None) -> Optional[int]:
    """Smallest accelerator SRAM (page granularity) that makes ``point`` feasible for
    ``kernel``, or None if even holding the whole working set fails.

    Binary search; relies on feasibility being monotone in capacity.
    """
    caps = capacity_candidates(kernel, point.channels, scenario.flash.geometry.page_size)
    if not _feasible_at(caps[-1], kernel, point, scenario, mode):
        return None
    lo, hi = 0, len(caps) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible_at(caps[mid], kernel, point, scenario, mode):
            hi = mid
        else:
            lo = mid + 1
    return caps[lo]
