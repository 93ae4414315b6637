"""Scenario files: parsing, validation and normalized serialization.

A scenario is one JSON document. Every numeric key carries its unit in the
name (``t_read_us``, ``bus_mb_per_s``, ``power_budget_mw``) because datasheet
numbers arrive in mixed units. Unknown keys are rejected. Internally all
values are converted to SI (seconds, bytes, joules, watts, bits/s).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import accel
from .accel import KERNEL_NAMES, Kernel, SramModel
from .errors import ConfigError, NeuroswapError, ParameterError
from .flash import FlashDevice, FlashGeometry, FlashPower, FlashTiming

US, MS = 1e-6, 1e-3
MW, UW = 1e-3, 1e-6
UJ, NJ, PJ = 1e-6, 1e-9, 1e-12
NW, PW = 1e-9, 1e-12
MB = 1e6  # decimal megabyte; bus and data rates are quoted in 10**6


# ---------------------------------------------------------------------------
# model-level scenario types


@dataclass(frozen=True)
class SystemBudget:
    total_data_rate: float       # bits/s, fixed across a sweep
    sample_bits: int
    power_budget: float          # W
    response_deadline: float     # s
    sram_capacity_accel: float   # bytes per accelerator
    sram_capacity_controller: float  # bytes, pooled across accelerators
    controller_overhead: float = 0.0  # W, storage controller logic

    def __post_init__(self):
        checks = [
            ("total_data_rate", self.total_data_rate > 0, "> 0"),
            ("sample_bits", self.sample_bits >= 1, ">= 1"),
            ("power_budget", self.power_budget > 0, "> 0"),
            ("response_deadline", self.response_deadline > 0, "> 0"),
            ("sram_capacity_accel", self.sram_capacity_accel >= 0, ">= 0"),
            ("sram_capacity_controller", self.sram_capacity_controller >= 0, ">= 0"),
            ("controller_overhead", self.controller_overhead >= 0, ">= 0"),
        ]
        for name, ok, bound in checks:
            if not ok:
                raise ParameterError(f"SystemBudget.{name} must be {bound}, got {getattr(self, name)!r}")

    @property
    def data_rate_bytes(self) -> float:
        return self.total_data_rate / 8


@dataclass(frozen=True)
class SweepGrid:
    """Explicit channel list, or a log-spaced range rounded to unique integers."""
    channels: tuple[int, ...] = ()
    channels_min: int = 16
    channels_max: int = 2 ** 24
    points: int = 100

    def channel_list(self) -> list[int]:
        if self.channels:
            return list(self.channels)
        return log_channels(self.channels_min, self.channels_max, self.points)


def log_channels(lo: int, hi: int, points: int) -> list[int]:
    if points == 1:
        return [lo]
    ratio = math.log(hi / lo)
    out = {round(lo * math.exp(ratio * i / (points - 1))) for i in range(points)}
    out.add(lo)
    out.add(hi)
    return sorted(c for c in out if lo <= c <= hi)


@dataclass(frozen=True)
class Scenario:
    flash: FlashDevice
    kernels: tuple[Kernel, ...]
    sram: SramModel
    budget: SystemBudget
    grid: SweepGrid = field(default_factory=SweepGrid)
    mode: str = "naive"
    em_block_words: int = 64
    em_word_bytes: int = 4

    def with_kernels(self, *kernels: Kernel) -> "Scenario":
        from dataclasses import replace
        return replace(self, kernels=tuple(kernels))


# ---------------------------------------------------------------------------
# file schema


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GeometryCfg(_Strict):
    chips: int = Field(ge=1)
    dies_per_chip: int = Field(ge=1)
    planes_per_die: int = Field(ge=1)
    blocks_per_plane: int = Field(ge=1)
    pages_per_block: int = Field(ge=1)
    page_size_bytes: int = Field(ge=1)
    # when present the product of the hierarchy must equal it exactly
    total_capacity_bytes: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _capacity(self):
        if self.total_capacity_bytes is not None:
            product = (self.chips * self.dies_per_chip * self.planes_per_die
                       * self.blocks_per_plane * self.pages_per_block * self.page_size_bytes)
            if product != self.total_capacity_bytes:
                raise ValueError(
                    f"total_capacity_bytes={self.total_capacity_bytes} but chips*dies_per_chip*"
                    f"planes_per_die*blocks_per_plane*pages_per_block*page_size_bytes={product}")
        return self


class TimingCfg(_Strict):
    t_read_us: float = Field(ge=0)
    t_program_us: float = Field(ge=0)
    t_erase_us: float = Field(ge=0)
    bus_mb_per_s: float = Field(gt=0)
    t_cmd_us: float = Field(ge=0)


class PowerCfg(_Strict):
    e_read_page_uj: float = Field(ge=0)
    e_program_page_uj: float = Field(ge=0)
    e_erase_block_uj: float = Field(ge=0)
    e_bus_pj_per_byte: float = Field(ge=0)
    p_chip_active_mw: float = Field(ge=0)
    p_chip_idle_mw: float = Field(ge=0)

    @model_validator(mode="after")
    def _active_ge_idle(self):
        if self.p_chip_idle_mw > self.p_chip_active_mw:
            raise ValueError(
                f"p_chip_idle_mw ({self.p_chip_idle_mw}) must be <= p_chip_active_mw "
                f"({self.p_chip_active_mw})")
        return self


class FlashCfg(_Strict):
    part: Optional[str] = None
    geometry: GeometryCfg
    timing: TimingCfg
    power: PowerCfg


class KernelCfg(_Strict):
    name: str
    # factory parameters of the named kernels
    sections: Optional[int] = Field(default=None, ge=1)
    levels: Optional[int] = Field(default=None, ge=1)
    taps: Optional[int] = Field(default=None, ge=1)
    band_width: Optional[int] = Field(default=None, ge=1)
    # explicit overrides; required for "custom"
    alpha_bytes: Optional[float] = Field(default=None, ge=0)
    beta_bytes_per_sample: Optional[float] = Field(default=None, ge=0)
    window_samples: Optional[int] = Field(default=None, ge=1)
    fixed_bytes: Optional[float] = Field(default=None, ge=0)
    dirty_fraction: Optional[float] = Field(default=None, ge=0, le=1)
    em_algorithm: Optional[Literal["scan", "fft", "mergesort"]] = None

    @model_validator(mode="after")
    def _known(self):
        if self.name not in KERNEL_NAMES:
            raise ValueError(
                f"unknown kernel name {self.name!r}; valid names: {', '.join(KERNEL_NAMES)}")
        allowed = {"BBF": {"sections"}, "DWT": {"levels", "taps"}, "FFT": set(), "XCOR": set(),
                   "DTW": {"band_width"}, "custom": set()}[self.name]
        for key in ("sections", "levels", "taps", "band_width"):
            if getattr(self, key) is not None and key not in allowed:
                raise ValueError(f"kernel {self.name} does not take parameter {key!r}")
        if self.name == "custom":
            missing = [k for k in ("alpha_bytes", "beta_bytes_per_sample", "window_samples")
                       if getattr(self, k) is None]
            if missing:
                raise ValueError(f"custom kernel requires {', '.join(missing)}")
        return self


class SramCfg(_Strict):
    leakage_nw_per_byte: float = Field(ge=0)
    e_access_pj_per_byte: float = Field(ge=0)
    capacity_accel_bytes: float = Field(ge=0)
    capacity_controller_bytes: float = Field(ge=0)


class BudgetCfg(_Strict):
    total_data_rate_mbps: float = Field(gt=0)
    sample_bits: int = Field(default=16, ge=1)
    power_budget_mw: float = Field(gt=0)
    response_deadline_ms: float = Field(gt=0)
    controller_overhead_mw: float = Field(default=0.0, ge=0)


class SweepCfg(_Strict):
    channels: Optional[list[int]] = None
    channels_min: Optional[int] = Field(default=None, ge=1)
    channels_max: Optional[int] = Field(default=None, ge=1)
    points: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _one_form(self):
        ranged = (self.channels_min, self.channels_max, self.points)
        if self.channels is not None:
            if any(v is not None for v in ranged):
                raise ValueError("give either channels or channels_min/channels_max/points, not both")
            if not self.channels or any(c < 1 for c in self.channels):
                raise ValueError("channels must be a non-empty list of integers >= 1")
        elif any(v is None for v in ranged):
            raise ValueError("channels_min, channels_max and points are all required for a range")
        elif self.channels_max < self.channels_min:
            raise ValueError("channels_max must be >= channels_min")
        return self


class EmCfg(_Strict):
    block_words: int = Field(default=64, ge=1)
    word_bytes: int = Field(default=4, ge=1)


class ScenarioCfg(_Strict):
    flash: FlashCfg
    kernels: list[KernelCfg] = Field(min_length=1)
    sram: SramCfg
    budget: BudgetCfg
    sweep: SweepCfg
    mode: Literal["naive", "em"] = "naive"
    em: EmCfg = Field(default_factory=EmCfg)


# ---------------------------------------------------------------------------
# conversion


def _kernel_from_cfg(cfg: KernelCfg) -> Kernel:
    if cfg.name == "custom":
        base = Kernel("custom", alpha=0, beta=0, window=1)
    else:
        params = {k: getattr(cfg, k) for k in ("sections", "levels", "taps", "band_width")
                  if getattr(cfg, k) is not None}
        base = accel.KERNEL_FACTORIES[cfg.name](**params)
    return Kernel(
        name=cfg.name,
        alpha=base.alpha if cfg.alpha_bytes is None else cfg.alpha_bytes,
        beta=base.beta if cfg.beta_bytes_per_sample is None else cfg.beta_bytes_per_sample,
        window=base.window if cfg.window_samples is None else cfg.window_samples,
        fixed_bytes=base.fixed_bytes if cfg.fixed_bytes is None else cfg.fixed_bytes,
        dirty_fraction=base.dirty_fraction if cfg.dirty_fraction is None else cfg.dirty_fraction,
        em_algorithm=cfg.em_algorithm or "",
    )


def scenario_from_dict(data: dict) -> Scenario:
    try:
        cfg = ScenarioCfg.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from None
    g, t, p = cfg.flash.geometry, cfg.flash.timing, cfg.flash.power
    try:
        flash = FlashDevice(
            geometry=FlashGeometry(g.chips, g.dies_per_chip, g.planes_per_die,
                                   g.blocks_per_plane, g.pages_per_block, g.page_size_bytes),
            timing=FlashTiming(t_read=t.t_read_us * US, t_program=t.t_program_us * US,
                               t_erase=t.t_erase_us * US, bus_bandwidth=t.bus_mb_per_s * MB,
                               t_cmd=t.t_cmd_us * US),
            power=FlashPower(e_read_page=p.e_read_page_uj * UJ,
                             e_program_page=p.e_program_page_uj * UJ,
                             e_erase_block=p.e_erase_block_uj * UJ,
                             e_bus_per_byte=p.e_bus_pj_per_byte * PJ,
                             p_chip_active=p.p_chip_active_mw * MW,
                             p_chip_idle=p.p_chip_idle_mw * MW),
        )
        b = cfg.budget
        budget = SystemBudget(
            total_data_rate=b.total_data_rate_mbps * MB,
            sample_bits=b.sample_bits,
            power_budget=b.power_budget_mw * MW,
            response_deadline=b.response_deadline_ms * MS,
            sram_capacity_accel=cfg.sram.capacity_accel_bytes,
            sram_capacity_controller=cfg.sram.capacity_controller_bytes,
            controller_overhead=b.controller_overhead_mw * MW,
        )
        s = cfg.sweep
        if s.channels is not None:
            grid = SweepGrid(channels=tuple(s.channels))
        else:
            grid = SweepGrid(channels_min=s.channels_min, channels_max=s.channels_max, points=s.points)
        return Scenario(
            flash=flash,
            kernels=tuple(_kernel_from_cfg(k) for k in cfg.kernels),
            sram=SramModel(leakage_density=cfg.sram.leakage_nw_per_byte * NW,
                           e_access=cfg.sram.e_access_pj_per_byte * PJ),
            budget=budget,
            grid=grid,
            mode=cfg.mode,
            em_block_words=cfg.em.block_words,
            em_word_bytes=cfg.em.word_bytes,
        )
    except NeuroswapError as exc:
        raise ConfigError(str(exc)) from None


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"]) or "<root>"
        if err["type"] == "missing":
            lines.append(f"{loc}: missing required field")
        elif err["type"] == "extra_forbidden":
            lines.append(f"{loc}: unknown field")
        else:
            lines.append(f"{loc}: {err['msg']}")
    return "invalid scenario:\n  " + "\n  ".join(lines)


def parse_config(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    return scenario_from_dict(data)


def default_scenario_path() -> Path:
    return Path(str(resources.files("neuroswap") / "scenarios" / "default.json"))


def default_scenario() -> Scenario:
    return parse_config(default_scenario_path())


def _num(x: float, unit: float = 1.0):
    """Shortest decimal ``v`` with ``v * unit == x`` exactly, so the normalized
    form parses back bit-identical (25e-6 / 1e-6 is 25.000000000000004)."""
    if unit == 1.0:
        v = float(x)
        return int(v) if v.is_integer() and abs(v) < 2 ** 53 else v
    q = x / unit
    candidates = [q]
    lo = hi = q
    for _ in range(4):
        lo, hi = math.nextafter(lo, -math.inf), math.nextafter(hi, math.inf)
        candidates += [lo, hi]
    for digits in (15, 16, 17):
        for c in candidates:
            v = float(f"{c:.{digits}g}")
            if v * unit == x:
                return int(v) if v.is_integer() and abs(v) < 2 ** 53 else v
    raise ParameterError(f"{x!r} has no exact representation in units of {unit!r}")


def scenario_to_dict(sc: Scenario) -> dict:
    """Normalized, fully explicit form. ``scenario_from_dict`` inverts it exactly."""
    g, t, p = sc.flash.geometry, sc.flash.timing, sc.flash.power
    grid = ({"channels": list(sc.grid.channels)} if sc.grid.channels else
            {"channels_min": sc.grid.channels_min, "channels_max": sc.grid.channels_max,
             "points": sc.grid.points})
    return {
        "flash": {
            "geometry": {"chips": g.chips, "dies_per_chip": g.dies_per_chip,
                         "planes_per_die": g.planes_per_die, "blocks_per_plane": g.blocks_per_plane,
                         "pages_per_block": g.pages_per_block, "page_size_bytes": g.page_size,
                         "total_capacity_bytes": g.total_capacity},
            "timing": {"t_read_us": _num(t.t_read, US), "t_program_us": _num(t.t_program, US),
                       "t_erase_us": _num(t.t_erase, US), "bus_mb_per_s": _num(t.bus_bandwidth, MB),
                       "t_cmd_us": _num(t.t_cmd, US)},
            "power": {"e_read_page_uj": _num(p.e_read_page, UJ),
                      "e_program_page_uj": _num(p.e_program_page, UJ),
                      "e_erase_block_uj": _num(p.e_erase_block, UJ),
                      "e_bus_pj_per_byte": _num(p.e_bus_per_byte, PJ),
                      "p_chip_active_mw": _num(p.p_chip_active, MW),
                      "p_chip_idle_mw": _num(p.p_chip_idle, MW)},
        },
        "kernels": [
            {"name": k.name, "alpha_bytes": _num(k.alpha), "beta_bytes_per_sample": _num(k.beta),
             "window_samples": k.window, "fixed_bytes": _num(k.fixed_bytes),
             "dirty_fraction": _num(k.dirty_fraction), "em_algorithm": k.em_algorithm}
            for k in sc.kernels
        ],
        "sram": {"leakage_nw_per_byte": _num(sc.sram.leakage_density, NW),
                 "e_access_pj_per_byte": _num(sc.sram.e_access, PJ),
                 "capacity_accel_bytes": _num(sc.budget.sram_capacity_accel),
                 "capacity_controller_bytes": _num(sc.budget.sram_capacity_controller)},
        "budget": {"total_data_rate_mbps": _num(sc.budget.total_data_rate, MB),
                   "sample_bits": sc.budget.sample_bits,
                   "power_budget_mw": _num(sc.budget.power_budget, MW),
                   "response_deadline_ms": _num(sc.budget.response_deadline, MS),
                   "controller_overhead_mw": _num(sc.budget.controller_overhead, MW)},
        "sweep": grid,
        "mode": sc.mode,
        "em": {"block_words": sc.em_block_words, "word_bytes": sc.em_word_bytes},
    }


def dump_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=2, sort_keys=False) + "\n"
