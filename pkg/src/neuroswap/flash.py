"""Latency, bandwidth and energy of a NAND-Flash subsystem.

The subsystem is a set of chips hanging off one shared serial bus. Each chip
holds dies, each die holds planes; plane-level units operate in parallel, the
bus does not. All quantities are SI: seconds, bytes, joules, watts.

Latency model (non-overlapped, conservative):

    read    ceil(P/k) * t_read    + P * t_x
    program P * t_x + ceil(P/k)   * t_program
    erase   ceil(P/k) * t_erase

where t_x is the bus time of one page including its command overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ParameterError

# relative slack when comparing a caller-supplied duration against op_latency
_DURATION_RTOL = 1e-12


class FlashOp(str, Enum):
    READ = "read"
    PROGRAM = "program"
    ERASE = "erase"


@dataclass(frozen=True)
class FlashGeometry:
    chips: int
    dies_per_chip: int
    planes_per_die: int
    blocks_per_plane: int
    pages_per_block: int
    page_size: int  # bytes

    def __post_init__(self):
        for name in ("chips", "dies_per_chip", "planes_per_die", "blocks_per_plane",
                     "pages_per_block", "page_size"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ParameterError(f"FlashGeometry.{name} must be an integer >= 1, got {value!r}")

    @property
    def units_per_chip(self) -> int:
        return self.dies_per_chip * self.planes_per_die

    @property
    def max_parallel_units(self) -> int:
        return self.chips * self.units_per_chip

    @property
    def block_size(self) -> int:
        return self.pages_per_block * self.page_size

    @property
    def total_capacity(self) -> int:
        return (self.chips * self.dies_per_chip * self.planes_per_die
                * self.blocks_per_plane * self.pages_per_block * self.page_size)


@dataclass(frozen=True)
class FlashTiming:
    t_read: float         # array read of one page into the page register
    t_program: float      # program one page from the register
    t_erase: float        # erase one block
    bus_bandwidth: float  # bytes/s
    t_cmd: float          # per-page command/addressing overhead on the bus

    def __post_init__(self):
        for name in ("t_read", "t_program", "t_erase", "t_cmd"):
            value = getattr(self, name)
            if not value >= 0:
                raise ParameterError(f"FlashTiming.{name} must be >= 0, got {value!r}")
        if not self.bus_bandwidth > 0:
            raise ParameterError(f"FlashTiming.bus_bandwidth must be > 0, got {self.bus_bandwidth!r}")

    def array_time(self, op: FlashOp) -> float:
        op = FlashOp(op)
        return {FlashOp.READ: self.t_read,
                FlashOp.PROGRAM: self.t_program,
                FlashOp.ERASE: self.t_erase}[op]


@dataclass(frozen=True)
class FlashPower:
    e_read_page: float
    e_program_page: float
    e_erase_block: float
    e_bus_per_byte: float
    p_chip_active: float
    p_chip_idle: float

    def __post_init__(self):
        for name in ("e_read_page", "e_program_page", "e_erase_block", "e_bus_per_byte",
                     "p_chip_active", "p_chip_idle"):
            value = getattr(self, name)
            if not value >= 0:
                raise ParameterError(f"FlashPower.{name} must be >= 0, got {value!r}")
        if self.p_chip_active < self.p_chip_idle:
            raise ParameterError(
                f"FlashPower.p_chip_active ({self.p_chip_active!r}) must be >= "
                f"FlashPower.p_chip_idle ({self.p_chip_idle!r})")

    def op_energy_per_unit(self, op: FlashOp) -> float:
        op = FlashOp(op)
        return {FlashOp.READ: self.e_read_page,
                FlashOp.PROGRAM: self.e_program_page,
                FlashOp.ERASE: self.e_erase_block}[op]


@dataclass(frozen=True)
class FlashDevice:
    """Geometry, timing and power bundled together, as read from a scenario."""
    geometry: FlashGeometry
    timing: FlashTiming
    power: FlashPower


@dataclass(frozen=True)
class IoPlan:
    """A batch of identical operations spread over ``k`` plane-level units.

    ``n_units`` counts pages for read/program and blocks for erase.
    """
    op: FlashOp
    n_units: int
    k: int
    chips_active: int

    def __post_init__(self):
        object.__setattr__(self, "op", FlashOp(self.op))

    def validate(self, geometry: FlashGeometry) -> None:
        if self.n_units < 0:
            raise ParameterError(f"IoPlan.n_units must be >= 0, got {self.n_units}")
        if not 1 <= self.chips_active <= geometry.chips:
            raise ParameterError(
                f"IoPlan.chips_active must be in [1, {geometry.chips}], got {self.chips_active}")
        k_max = self.chips_active * geometry.units_per_chip
        if not 1 <= self.k <= k_max:
            raise ParameterError(f"IoPlan.k must be in [1, {k_max}], got {self.k}")

    def moved_bytes(self, geometry: FlashGeometry) -> int:
        if self.op is FlashOp.ERASE:
            return 0
        return self.n_units * geometry.page_size


def transfer_time(nbytes: float, timing: FlashTiming, page_size: int) -> float:
    """Bus time to move ``nbytes``: streaming time plus one command overhead per page."""
    if nbytes < 0:
        raise ParameterError(f"bytes must be >= 0, got {nbytes}")
    if nbytes == 0:
        return 0.0
    return nbytes / timing.bus_bandwidth + timing.t_cmd * math.ceil(nbytes / page_size)


def page_transfer_time(geometry: FlashGeometry, timing: FlashTiming) -> float:
    return transfer_time(geometry.page_size, timing, geometry.page_size)


def op_latency(plan: IoPlan, geometry: FlashGeometry, timing: FlashTiming) -> float:
    plan.validate(geometry)
    p = plan.n_units
    if p == 0:
        return 0.0
    rounds = math.ceil(p / plan.k)
    if plan.op is FlashOp.ERASE:
        return rounds * timing.t_erase
    bus = p * page_transfer_time(geometry, timing)
    return rounds * timing.array_time(plan.op) + bus


def op_energy(plan: IoPlan, duration: float, geometry: FlashGeometry,
              timing: FlashTiming, power: FlashPower) -> float:
    """Energy of a plan that occupies the chips for ``duration`` seconds.

    Dynamic per-unit and bus energy plus static power of every chip for the
    whole duration (active chips at ``p_chip_active``, the rest idle).
    """
    latency = op_latency(plan, geometry, timing)
    if duration < latency * (1.0 - _DURATION_RTOL):
        raise ParameterError(f"duration {duration!r} s is shorter than op_latency {latency!r} s")
    static = duration * (plan.chips_active * power.p_chip_active
                         + (geometry.chips - plan.chips_active) * power.p_chip_idle)
    return (plan.n_units * power.op_energy_per_unit(plan.op)
            + plan.moved_bytes(geometry) * power.e_bus_per_byte
            + static)


def sustained_bandwidth(op: FlashOp, k: int, geometry: FlashGeometry, timing: FlashTiming) -> float:
    """Long-run bytes/s of a read or program stream using ``k`` parallel units."""
    op = FlashOp(op)
    if op is FlashOp.ERASE:
        raise ParameterError("sustained_bandwidth is defined for read and program only")
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    t_x = page_transfer_time(geometry, timing)
    return geometry.page_size / (timing.array_time(op) / k + t_x)


def bus_ceiling(geometry: FlashGeometry, timing: FlashTiming) -> float:
    """Bus-limited bandwidth: one page per page transfer time, no array latency."""
    return geometry.page_size / page_transfer_time(geometry, timing)


def max_parallel_chips(power_share: float, geometry: FlashGeometry, power: FlashPower) -> int:
    """Most chips that can be active at once while the array stays within ``power_share`` watts."""
    if power_share < 0:
        raise ParameterError(f"power_share must be >= 0, got {power_share}")
    chips = geometry.chips
    for k in range(chips, 0, -1):
        if k * power.p_chip_active + (chips - k) * power.p_chip_idle <= power_share:
            return k
    return 0
