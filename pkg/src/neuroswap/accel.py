"""Accelerator working sets and the power of holding them in SRAM.

A kernel's working set is affine in the channel count::

    working_set = channels * (alpha + beta * window) + fixed

``alpha`` is per-channel state independent of the window (filter sections,
wavelet levels, DTW band rows), ``beta`` is bytes per buffered sample and
``window`` is samples per channel per processing window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

WORD_BYTES = 4

KERNEL_NAMES = ("BBF", "DWT", "FFT", "XCOR", "DTW", "custom")

# external-memory algorithm shape used in em mode
EM_ALGORITHMS = ("scan", "fft", "mergesort")
_DEFAULT_EM_ALGORITHM = {"BBF": "scan", "DWT": "scan", "XCOR": "scan", "FFT": "fft",
                         "DTW": "mergesort", "custom": "scan"}


@dataclass(frozen=True)
class Kernel:
    name: str
    alpha: float           # bytes per channel, window independent
    beta: float            # bytes per buffered sample
    window: int            # samples per channel per processing window
    fixed_bytes: float = 0
    dirty_fraction: float = 1.0
    em_algorithm: str = ""

    def __post_init__(self):
        if self.name not in KERNEL_NAMES:
            raise ParameterError(
                f"unknown kernel name {self.name!r}; valid names: {', '.join(KERNEL_NAMES)}")
        for field in ("alpha", "beta", "fixed_bytes"):
            if not getattr(self, field) >= 0:
                raise ParameterError(f"Kernel.{field} must be >= 0, got {getattr(self, field)!r}")
        if not isinstance(self.window, int) or self.window < 1:
            raise ParameterError(f"Kernel.window must be an integer >= 1, got {self.window!r}")
        if not 0 <= self.dirty_fraction <= 1:
            raise ParameterError(f"Kernel.dirty_fraction must be in [0, 1], got {self.dirty_fraction!r}")
        if not self.em_algorithm:
            object.__setattr__(self, "em_algorithm", _DEFAULT_EM_ALGORITHM[self.name])
        if self.em_algorithm not in EM_ALGORITHMS:
            raise ParameterError(
                f"Kernel.em_algorithm must be one of {', '.join(EM_ALGORITHMS)}, got {self.em_algorithm!r}")

    @property
    def per_channel_bytes(self) -> float:
        return self.alpha + self.beta * self.window


def bbf(sections: int = 4, window: int = 8) -> Kernel:
    """Butterworth bandpass as cascaded biquads: two state words per section per channel,
    six coefficient words per section shared."""
    if sections < 1:
        raise ParameterError(f"BBF sections must be >= 1, got {sections}")
    return Kernel("BBF", alpha=sections * 2 * WORD_BYTES, beta=0, window=window,
                  fixed_bytes=sections * 6 * WORD_BYTES)


def dwt(levels: int = 4, taps: int = 4) -> Kernel:
    # one decomposition step consumes 2**levels samples
    if levels < 1 or taps < 1:
        raise ParameterError(f"DWT levels and taps must be >= 1, got {levels}, {taps}")
    return Kernel("DWT", alpha=levels * 2 * WORD_BYTES, beta=0, window=2 ** levels,
                  fixed_bytes=2 * taps * WORD_BYTES)


def fft(window: int = 128) -> Kernel:
    # complex words: real + imaginary
    return Kernel("FFT", alpha=0, beta=2 * WORD_BYTES, window=window)


def xcor(window: int = 64) -> Kernel:
    return Kernel("XCOR", alpha=0, beta=WORD_BYTES, window=window,
                  fixed_bytes=window * WORD_BYTES)


def dtw(band_width: int = 16, window: int = 64) -> Kernel:
    # two rows of the banded cost matrix per channel, one shared template
    if band_width < 1:
        raise ParameterError(f"DTW band_width must be >= 1, got {band_width}")
    return Kernel("DTW", alpha=2 * band_width * WORD_BYTES, beta=0, window=window,
                  fixed_bytes=window * WORD_BYTES)


KERNEL_FACTORIES = {"BBF": bbf, "DWT": dwt, "FFT": fft, "XCOR": xcor, "DTW": dtw}


def default_kernels() -> list[Kernel]:
    return [factory() for factory in KERNEL_FACTORIES.values()]


@dataclass(frozen=True)
class SramModel:
    leakage_density: float  # W per resident byte
    e_access: float         # J per byte accessed

    def __post_init__(self):
        if not self.leakage_density >= 0:
            raise ParameterError(f"SramModel.leakage_density must be >= 0, got {self.leakage_density!r}")
        if not self.e_access >= 0:
            raise ParameterError(f"SramModel.e_access must be >= 0, got {self.e_access!r}")


def working_set_bytes(kernel: Kernel, channels: int) -> float:
    if channels < 0:
        raise ParameterError(f"channels must be >= 0, got {channels}")
    return channels * kernel.per_channel_bytes + kernel.fixed_bytes


def sram_power(resident_bytes: float, access_rate: float, sram: SramModel) -> float:
    if resident_bytes < 0 or access_rate < 0:
        raise ParameterError("resident_bytes and access_rate must be >= 0")
    return sram.leakage_density * resident_bytes + sram.e_access * access_rate


def fits_in_sram(kernel: Kernel, channels: int, sram_capacity: float) -> bool:
    return working_set_bytes(kernel, channels) <= sram_capacity


def overflow_bytes(kernel: Kernel, channels: int, sram_capacity: float) -> int:
    """Bytes of the working set that do not fit in ``sram_capacity`` (0 when it fits)."""
    excess = working_set_bytes(kernel, channels) - sram_capacity
    return math.ceil(excess) if excess > 0 else 0
