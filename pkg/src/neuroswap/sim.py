"""Discrete-event simulation of windowed swap traffic over a shared flash bus.

Every kernel starts a processing window every ``window`` seconds. At each
window start it enqueues a program plan (write back the dirty overflow) and
then a read plan (bring the overflow back in). Plans of one kernel run in
order; plans of different kernels compete for the bus and the plane units.

Each plan runs in batches of at most ``k`` pages:

    program: grab units, move each page over the bus, program all units together
    read:    grab units, read all units together, move each page over the bus

Page transfers are atomic and serialize on the bus in request order (FCFS).
With one kernel and no contention this reproduces ``flash.op_latency``.

Time is kept in integer nanoseconds; events are ordered by (time, sequence).
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

from .config import Scenario
from .errors import ParameterError
from .feasibility import FeasibilityMap, FeasibilityReport, PointModel, model_point, point_for
from .flash import FlashOp, IoPlan, op_energy, page_transfer_time

WINDOW_START = "window_start"
IO_ISSUE = "io_issue"
IO_COMPLETE = "io_complete"
SIM_END = "sim_end"

MIN_WINDOWS = 10
BORDERLINE = 0.05


def to_ns(seconds: float) -> int:
    # round first so 82.92e-6 s is 82920 ns, not 82921
    return math.ceil(round(seconds * 1e9, 6))


@dataclass(order=True)
class Event:
    time: int
    sequence: int
    kind: str = field(compare=False)
    action: Optional[Callable[[], None]] = field(compare=False, default=None, repr=False)


@dataclass(frozen=True)
class SimReport:
    windows_total: int
    deadline_misses: int
    worst_io_latency: float
    mean_bus_utilization: float
    energy_total: float
    mean_power: float
    peak_window_power: float
    sim_time: float

    def to_dict(self) -> dict:
        return {
            "windows_total": self.windows_total,
            "deadline_misses": self.deadline_misses,
            "worst_io_latency_s": self.worst_io_latency,
            "mean_bus_utilization": self.mean_bus_utilization,
            "energy_total_j": self.energy_total,
            "mean_power_w": self.mean_power,
            "peak_window_power_w": self.peak_window_power,
            "sim_time_s": self.sim_time,
        }


@dataclass(frozen=True)
class OpRecord:
    """One executed plan and the time it held the chips."""
    kernel: int
    window: int
    plan: IoPlan
    duration: float
    energy: float


@dataclass
class WindowRecord:
    kernel: int
    index: int
    start_ns: int
    deadline_ns: int
    window_ns: int
    write_pages: int
    read_pages: int
    complete_ns: Optional[int] = None
    energy: float = 0.0
    busy_ns: int = 0

    @property
    def latency_ns(self) -> int:
        return self.complete_ns - self.start_ns

    @property
    def missed(self) -> bool:
        return self.complete_ns > self.deadline_ns


TRACE_COLUMNS = ("kernel", "window", "start_s", "deadline_s", "complete_s", "io_latency_s",
                 "missed", "write_pages", "read_pages", "energy_j")


@dataclass
class _Job:
    kernel: int
    window: WindowRecord
    plan: IoPlan


class Simulator:
    """One simulation run; use ``run()`` once, then read ``report``, ``ops``, ``windows``."""

    def __init__(self, scenario: Scenario, channels: int, horizon: Optional[float] = None,
                 mode: Optional[str] = None):
        if not scenario.kernels:
            raise ParameterError("simulation needs at least one kernel")
        self.scenario = scenario
        self.point = point_for(scenario.budget, channels)
        self.model: PointModel = model_point(self.point, scenario, mode)
        g, t = scenario.flash.geometry, scenario.flash.timing

        self.window_ns = [max(1, to_ns(tr.window)) for tr in self.model.traffic]
        self.deadline_ns = [min(w, to_ns(scenario.budget.response_deadline)) for w in self.window_ns]
        self.pages = [(math.ceil(tr.write_bytes / g.page_size), math.ceil(tr.read_bytes / g.page_size))
                      for tr in self.model.traffic]
        min_horizon = MIN_WINDOWS * max(self.window_ns)
        self.horizon_ns = min_horizon if horizon is None else to_ns(horizon)
        if self.horizon_ns < min_horizon:
            raise ParameterError(
                f"horizon {self.horizon_ns * 1e-9:.6g} s covers fewer than {MIN_WINDOWS} windows "
                f"of the slowest kernel ({min_horizon * 1e-9:.6g} s needed)")

        self.t_x_ns = to_ns(page_transfer_time(g, t))
        self.t_array_ns = {FlashOp.READ: to_ns(t.t_read), FlashOp.PROGRAM: to_ns(t.t_program)}
        self.k = self.model.k
        self.chips_active = self.model.chips_active

        self.now = 0
        self._seq = 0
        self._heap: list[Event] = []
        self._bus_busy = False
        self._bus_queue: deque[Callable[[], None]] = deque()
        self._units_free = self.k
        self._unit_queue: deque[tuple[int, Callable[[], None]]] = deque()
        self._kernel_jobs = [deque() for _ in scenario.kernels]
        self._kernel_busy = [False] * len(scenario.kernels)
        self._active_jobs = 0
        self._idle_since = 0
        self._idle_ns = 0
        self.bus_busy_ns = 0
        self.windows: list[WindowRecord] = []
        self.ops: list[OpRecord] = []
        self.report: Optional[SimReport] = None

    # -- event plumbing ------------------------------------------------------

    def _schedule(self, time: int, kind: str, action: Optional[Callable[[], None]] = None) -> None:
        self._seq += 1
        heapq.heappush(self._heap, Event(time, self._seq, kind, action))

    def _acquire_bus(self, then: Callable[[], None]) -> None:
        if self._bus_busy:
            self._bus_queue.append(then)
        else:
            self._bus_busy = True
            self._schedule(self.now, IO_ISSUE, then)

    def _release_bus(self) -> None:
        if self._bus_queue:
            self._schedule(self.now, IO_ISSUE, self._bus_queue.popleft())
        else:
            self._bus_busy = False

    def _acquire_units(self, n: int, then: Callable[[], None]) -> None:
        if not self._unit_queue and self._units_free >= n:
            self._units_free -= n
            self._schedule(self.now, IO_ISSUE, then)
        else:
            self._unit_queue.append((n, then))

    def _release_units(self, n: int) -> None:
        self._units_free += n
        while self._unit_queue and self._unit_queue[0][0] <= self._units_free:
            need, then = self._unit_queue.popleft()
            self._units_free -= need
            self._schedule(self.now, IO_ISSUE, then)

    # -- plan execution ------------------------------------------------------

    def _plan_steps(self, plan: IoPlan) -> Iterator[tuple[str, int]]:
        remaining = plan.n_units
        array_ns = self.t_array_ns[plan.op]
        while remaining:
            batch = min(self.k, remaining)
            yield "units", batch
            if plan.op is FlashOp.PROGRAM:
                for _ in range(batch):
                    yield "bus", self.t_x_ns
                yield "array", array_ns
            else:
                yield "array", array_ns
                for _ in range(batch):
                    yield "bus", self.t_x_ns
            yield "release", batch
            remaining -= batch

    def _start_next_job(self, kernel: int) -> None:
        queue = self._kernel_jobs[kernel]
        if self._kernel_busy[kernel] or not queue:
            return
        job = queue.popleft()
        self._kernel_busy[kernel] = True
        if self._active_jobs == 0:
            self._idle_ns += self.now - self._idle_since
        self._active_jobs += 1
        start = self.now
        steps = self._plan_steps(job.plan)

        def advance() -> None:
            for step, arg in steps:
                if step == "units":
                    self._acquire_units(arg, advance)
                    return
                if step == "bus":
                    def transfer(d=arg):
                        self.bus_busy_ns += d

                        def done():
                            self._release_bus()
                            advance()
                        self._schedule(self.now + d, IO_COMPLETE, done)
                    self._acquire_bus(transfer)
                    return
                if step == "array":
                    self._schedule(self.now + arg, IO_COMPLETE, advance)
                    return
                self._release_units(arg)
            finish()

        def finish() -> None:
            self._finish_job(job, start)

        advance()

    def _finish_job(self, job: _Job, start: int) -> None:
        fl = self.scenario.flash
        duration_ns = self.now - start
        energy = op_energy(job.plan, duration_ns * 1e-9, fl.geometry, fl.timing, fl.power)
        self.ops.append(OpRecord(job.kernel, job.window.index, job.plan, duration_ns * 1e-9, energy))
        job.window.energy += energy
        job.window.busy_ns += duration_ns
        if job.plan.op is FlashOp.READ:
            job.window.complete_ns = self.now
        self._active_jobs -= 1
        if self._active_jobs == 0:
            self._idle_since = self.now
        self._kernel_busy[job.kernel] = False
        self._start_next_job(job.kernel)

    def _window_start(self, kernel: int, index: int) -> None:
        w_pages, r_pages = self.pages[kernel]
        rec = WindowRecord(kernel, index, self.now, self.now + self.deadline_ns[kernel],
                           self.window_ns[kernel], w_pages, r_pages)
        self.windows.append(rec)
        if w_pages == 0 and r_pages == 0:
            rec.complete_ns = self.now
            return
        # write-back of the dirty overflow, then read-in; both always issued so the
        # read plan marks window completion
        for op, n in ((FlashOp.PROGRAM, w_pages), (FlashOp.READ, r_pages)):
            plan = IoPlan(op, n, self.k, self.chips_active)
            self._kernel_jobs[kernel].append(_Job(kernel, rec, plan))
        self._start_next_job(kernel)

    # -- main loop -----------------------------------------------------------

    def run(self) -> SimReport:
        if self.report is not None:
            return self.report
        for kernel, w_ns in enumerate(self.window_ns):
            for j in range(self.horizon_ns // w_ns):
                self._schedule(j * w_ns, WINDOW_START,
                               lambda kernel=kernel, j=j: self._window_start(kernel, j))
        self._schedule(self.horizon_ns, SIM_END)
        while self._heap:
            event = heapq.heappop(self._heap)
            self.now = event.time
            if event.action is not None:
                event.action()
        end_ns = max(self.now, self.horizon_ns)
        if self._active_jobs == 0:
            self._idle_ns += end_ns - self._idle_since
        self.report = self._summarize(end_ns)
        return self.report

    def idle_energy(self) -> float:
        fl = self.scenario.flash
        return self._idle_ns * 1e-9 * fl.geometry.chips * fl.power.p_chip_idle

    def _summarize(self, end_ns: int) -> SimReport:
        fl = self.scenario.flash
        idle_watts = fl.geometry.chips * fl.power.p_chip_idle
        energy_total = math.fsum([op.energy for op in self.ops] + [self.idle_energy()])
        misses = sum(1 for w in self.windows if w.missed)
        worst = max((w.latency_ns for w in self.windows), default=0) * 1e-9
        peak = 0.0
        for w in self.windows:
            window_s = w.window_ns * 1e-9
            idle_part = idle_watts * max(0.0, 1.0 - w.busy_ns / w.window_ns)
            peak = max(peak, w.energy / window_s + idle_part)
        sim_time = end_ns * 1e-9
        return SimReport(
            windows_total=len(self.windows),
            deadline_misses=misses,
            worst_io_latency=worst,
            mean_bus_utilization=self.bus_busy_ns / end_ns,
            energy_total=energy_total,
            mean_power=energy_total / sim_time,
            peak_window_power=peak,
            sim_time=sim_time,
        )

    def trace_rows(self) -> list[tuple]:
        rows = []
        for w in sorted(self.windows, key=lambda w: (w.start_ns, w.kernel)):
            rows.append((w.kernel, w.index, w.start_ns * 1e-9, w.deadline_ns * 1e-9,
                         w.complete_ns * 1e-9, w.latency_ns * 1e-9, int(w.missed),
                         w.write_pages, w.read_pages, w.energy))
        return rows


def simulate(scenario: Scenario, channels: int, horizon: Optional[float] = None,
             mode: Optional[str] = None) -> SimReport:
    """Simulate ``scenario`` at ``channels`` for ``horizon`` seconds (default: 10 slowest windows)."""
    return Simulator(scenario, channels, horizon, mode).run()


@dataclass
class ValidationResult:
    total: int
    agreed: int
    off_boundary_total: int
    off_boundary_agreed: int
    borderline: list[int] = field(default_factory=list)
    disagreements: list[int] = field(default_factory=list)

    @property
    def agreement(self) -> float:
        return self.agreed / self.total if self.total else 1.0

    @property
    def off_boundary_agreement(self) -> float:
        return self.off_boundary_agreed / self.off_boundary_total if self.off_boundary_total else 1.0


def _is_borderline(rep: FeasibilityReport) -> bool:
    return not rep.cacheable and abs(rep.margin - 1.0) <= BORDERLINE


def validate(fmap: FeasibilityMap, scenario: Scenario, horizon: Optional[float] = None) -> ValidationResult:
    """Check the analytic timing verdicts of ``fmap`` against simulation.

    A point agrees when (no deadline misses) <=> (timing ok). Points whose I/O
    time is within 5% of their deadline are counted separately as borderline.
    """
    if fmap.scenario != scenario:
        raise ParameterError("feasibility map was produced from a different scenario")
    res = ValidationResult(0, 0, 0, 0)
    for channels, rep in fmap.reports.items():
        if not isinstance(rep, FeasibilityReport):
            continue
        sim = simulate(scenario, channels, horizon, fmap.mode)
        agree = (sim.deadline_misses == 0) == (rep.cacheable or rep.timing == "ok")
        res.total += 1
        res.agreed += agree
        if _is_borderline(rep):
            res.borderline.append(channels)
        else:
            res.off_boundary_total += 1
            res.off_boundary_agreed += agree
        if not agree:
            res.disagreements.append(channels)
    return res
