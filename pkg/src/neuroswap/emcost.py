"""Block I/O counts of external-memory algorithms, with asymmetric weights.

Classic two-level model: a fast memory of ``M`` words, a slow store moved in
blocks of ``B`` words. Reads and writes are counted separately so that a slow
NAND program can be weighted differently from a fast read.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .accel import Kernel, overflow_bytes, working_set_bytes
from .errors import ModelError, ParameterError


@dataclass(frozen=True)
class EmModel:
    M: int  # words of fast memory
    B: int  # words per block
    word_bytes: int = 4

    def __post_init__(self):
        if self.B < 1 or self.M < 2 * self.B:
            raise ModelError(f"external-memory model needs M >= 2B >= 2, got M={self.M}, B={self.B}")
        if self.word_bytes < 1:
            raise ModelError(f"word_bytes must be >= 1, got {self.word_bytes}")

    @property
    def fanout(self) -> int:
        return self.M // self.B - 1

    @property
    def block_bytes(self) -> int:
        return self.B * self.word_bytes

    @classmethod
    def for_capacity(cls, sram_capacity: float, B: int, word_bytes: int) -> "EmModel":
        return cls(M=int(sram_capacity // word_bytes), B=B, word_bytes=word_bytes)


@dataclass(frozen=True)
class IoCount:
    reads: int
    writes: int

    def __post_init__(self):
        if self.reads < 0 or self.writes < 0:
            raise ParameterError(f"IoCount fields must be >= 0, got {self.reads}, {self.writes}")

    @property
    def total(self) -> int:
        return self.reads + self.writes


@dataclass(frozen=True)
class WeightedIoCost:
    """Per-block read and write weights: seconds, joules, or unitless."""
    r: float
    w: float

    def __post_init__(self):
        if self.r < 0 or self.w < 0:
            raise ParameterError(f"weights must be >= 0, got r={self.r}, w={self.w}")

    def total(self, io: IoCount) -> float:
        return weighted_cost(io, self.r, self.w)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _check_n(N: int) -> None:
    if N < 0:
        raise ParameterError(f"N must be >= 0, got {N}")


def scan_cost(N: int, model: EmModel) -> IoCount:
    _check_n(N)
    return IoCount(_ceil_div(N, model.B), 0)


def merge_passes(N: int, model: EmModel) -> int:
    """Merge passes after run formation; 0 when the input fits in memory."""
    _check_n(N)
    if N <= model.M:
        return 0
    if model.fanout < 2:
        raise ModelError(f"fanout floor(M/B)-1 = {model.fanout} < 2: M={model.M} too small to merge")
    runs = _ceil_div(N, model.M)
    passes = 0
    # integer form of ceil(log_fanout(runs)); floating log misrounds at exact powers
    while runs > 1:
        runs = _ceil_div(runs, model.fanout)
        passes += 1
    return passes


def mergesort_cost(N: int, model: EmModel) -> IoCount:
    blocks = _ceil_div(N, model.B)
    n = blocks * (1 + merge_passes(N, model))
    return IoCount(n, n)


def fft_cost(N: int, model: EmModel) -> IoCount:
    """External FFT, costed with the sorting bound (same I/O complexity)."""
    if N < 1 or N & (N - 1):
        raise ParameterError(f"fft_cost needs N a power of two, got {N}")
    return mergesort_cost(N, model)


def weighted_cost(io: IoCount, r: float, w: float) -> float:
    if r == w:
        # one rounding instead of three keeps the symmetric case exact
        return r * (io.reads + io.writes)
    return r * io.reads + w * io.writes


def _next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


def kernel_io_per_window(kernel: Kernel, channels: int, sram_capacity: float,
                         B: int, word_bytes: int, mode: str) -> IoCount:
    """Block reads/writes one processing window costs when the working set overflows SRAM.

    ``naive`` swaps the overflow once (dirty part written, all of it read back).
    ``em`` uses the kernel's external-memory algorithm with M = capacity in words.
    """
    if mode not in ("naive", "em"):
        raise ParameterError(f"mode must be 'naive' or 'em', got {mode!r}")
    over = overflow_bytes(kernel, channels, sram_capacity)
    if over == 0:
        return IoCount(0, 0)
    block = B * word_bytes
    if mode == "naive":
        dirty = math.ceil(kernel.dirty_fraction * over)
        return IoCount(reads=_ceil_div(over, block), writes=_ceil_div(dirty, block))

    model = EmModel.for_capacity(sram_capacity, B, word_bytes)
    if kernel.em_algorithm == "scan":
        n = _ceil_div(over, block)
        return IoCount(n, n)
    n_words = math.ceil(working_set_bytes(kernel, channels) / word_bytes)
    if kernel.em_algorithm == "fft":
        return fft_cost(_next_pow2(n_words), model)
    return mergesort_cost(n_words, model)
