import math
import warnings
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import worked_scenario
from oracles import required_sram_linear
from neuroswap.accel import Kernel, bbf, fft, sram_power, working_set_bytes
from neuroswap.config import MS, MW, US, SystemBudget
from neuroswap.errors import ParameterError
from neuroswap.feasibility import (BANDWIDTH_LIMITED, LATENCY_LIMITED, OperatingPoint, PointError,
                                   capacity_candidates, classify, operating_points, point_for,
                                   required_sram, swap_traffic, sweep, sweep_rows)
from neuroswap.flash import FlashDevice


def budget(**kw):
    base = dict(total_data_rate=144e6, sample_bits=16, power_budget=15 * MW, response_deadline=3 * MS,
                sram_capacity_accel=8192, sram_capacity_controller=4096)
    base.update(kw)
    return SystemBudget(**base)



def swap_feasible(fmap):
    return fmap.channels_with("feasible")


def contiguous(fmap):
    """Swap-feasible points form one run of consecutive grid points."""
    grid = list(fmap.reports)
    idx = [grid.index(c) for c in swap_feasible(fmap)]
    return not idx or idx == list(range(idx[0], idx[-1] + 1))


# -- operating points -----------------------------------------------------------

def test_operating_point_examples():
    b = budget()
    (pt,) = operating_points(b, [1000])
    assert pt.sampling_rate == 9000
    (edge,) = operating_points(b, [9_000_000])
    assert edge.sampling_rate == 1.0


def test_degenerate_points_excluded_with_warning():
    with pytest.warns(UserWarning, match="< 1 Hz"):
        pts = operating_points(budget(), [1000, 9_000_001, 16])
    assert [p.channels for p in pts] == [1000, 16]
    with pytest.raises(ParameterError):
        operating_points(budget(), [0])


@given(c=st.integers(1, 9_000_000), rate=st.floats(1e6, 1e9), bits=st.integers(1, 32))
def test_fixed_total_data_rate(c, rate, bits):
    b = budget(total_data_rate=rate, sample_bits=bits)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pts = operating_points(b, [c])
    for p in pts:
        assert p.channels * p.sampling_rate * bits == pytest.approx(rate, rel=1e-6)


# -- swap traffic ---------------------------------------------------------------

def test_swap_traffic_examples():
    pt = OperatingPoint(1000, 9000.0)
    k = fft(128)
    fits = swap_traffic(k, pt, 2_000_000, "naive")
    assert (fits.write_bytes, fits.read_bytes) == (0, 0)
    assert fits.window == pytest.approx(128 / 9000)
    tr = swap_traffic(k, pt, 262_144, "naive")
    assert (tr.write_bytes, tr.read_bytes) == (761_856, 761_856)
    assert tr.window * 1e3 == pytest.approx(14.22, abs=0.005)


def test_em_traffic_is_whole_blocks():
    tr = swap_traffic(bbf(), OperatingPoint(10_000, 900.0), 1000, "em")
    assert tr.write_bytes % 256 == 0 and tr.read_bytes == tr.write_bytes


# -- classify -------------------------------------------------------------------

def test_classify_fft_example():
    sc = worked_scenario([fft(128)])
    rep = classify(point_for(sc.budget, 1000), sc)
    assert rep.k == 4 and not rep.cacheable
    assert rep.write_bytes == rep.read_bytes == 761_856
    expected = (47 * 82.92 + 12 * 200 + 47 * 82.92 + 12 * 25) * US
    assert rep.io_s == pytest.approx(expected, rel=1e-12)
    assert rep.io_s * 1e3 == pytest.approx(10.49, abs=0.005)
    assert rep.timing == "ok" and rep.overall and rep.verdict == "feasible"


def test_classify_fft_example_under_short_response_deadline():
    sc = worked_scenario([fft(128)], deadline=3 * MS)
    rep = classify(point_for(sc.budget, 1000), sc)
    assert rep.deadline_s == 3 * MS
    assert rep.timing != "ok" and not rep.overall


def test_classify_small_overflow_is_latency_limited():
    one_page = Kernel("custom", alpha=0, beta=0, window=27, fixed_bytes=16384)
    sc = worked_scenario([one_page], chips=1, accel=0)
    rep = classify(point_for(sc.budget, 100), sc)
    assert rep.window_s == pytest.approx(300 * US)
    assert rep.k == 1
    assert rep.io_s == pytest.approx(390.84 * US, rel=1e-12)
    assert rep.swap_bytes / rep.deadline_s < 197.6e6
    assert rep.timing == LATENCY_LIMITED and rep.verdict == LATENCY_LIMITED


def test_classify_bus_saturation_is_bandwidth_limited():
    big = Kernel("custom", alpha=0, beta=0, window=27, fixed_bytes=64 * 16384)
    sc = worked_scenario([big], chips=4, accel=0)
    rep = classify(point_for(sc.budget, 100), sc)
    assert rep.swap_bytes / rep.deadline_s > 197.6e6
    assert rep.timing == BANDWIDTH_LIMITED


def test_classify_cacheable_point():
    sc = worked_scenario([bbf()], accel=10**6)
    rep = classify(point_for(sc.budget, 1000), sc)
    assert rep.cacheable and rep.timing == "ok" and rep.power_ok and rep.overall
    assert rep.verdict == "cacheable" and rep.io_s == 0


def test_classify_power_limited():
    sc = worked_scenario([bbf()], accel=10**6, power_budget=1 * MW, leakage=1e-6)
    rep = classify(point_for(sc.budget, 1000), sc)
    assert rep.cacheable and not rep.power_ok and not rep.overall
    assert rep.verdict == "power_limited"


def test_empty_kernel_list_rejected():
    sc = worked_scenario([])
    with pytest.raises(ParameterError):
        classify(point_for(sc.budget, 1000), sc)


def test_controller_sram_is_pooled_first_come():
    sc = worked_scenario([fft(128), fft(128)], accel=1000, controller=5000)
    rep = classify(point_for(sc.budget, 10), sc)
    ws = working_set_bytes(fft(128), 10)
    # the first kernel takes 5000 bytes of the pool, the second gets none
    assert rep.read_bytes == (ws - 6000) + (ws - 1000)


@settings(max_examples=60, deadline=None)
@given(c=st.integers(1, 2**22))
def test_report_overall_invariant(default, c):
    rep = classify(point_for(default.budget, c), default)
    assert rep.overall == ((rep.cacheable or rep.timing == "ok") and rep.power_ok)


def test_ideal_flash_reduces_to_sram_power_test(default):
    fl = default.flash
    ideal = replace(fl, timing=replace(fl.timing, t_read=0, t_program=0, t_erase=0, t_cmd=0,
                                       bus_bandwidth=1e30),
                    power=replace(fl.power, e_read_page=0, e_program_page=0, e_erase_block=0,
                                  e_bus_per_byte=0, p_chip_active=0, p_chip_idle=0))
    sc = replace(default, flash=ideal)
    for c in (16, 500, 5000, 50_000, 500_000, 5_000_000):
        rep = classify(point_for(sc.budget, c), sc)
        k = sc.kernels[0]
        resident = min(working_set_bytes(k, c), sc.budget.sram_capacity_accel + sc.budget.sram_capacity_controller)
        sram = sram_power(resident, sc.budget.data_rate_bytes, sc.sram)
        assert rep.timing == "ok"
        assert rep.overall == (sram + sc.budget.controller_overhead <= sc.budget.power_budget)


# -- sweep ----------------------------------------------------------------------



@pytest.fixture(scope="module")
def grid(default):
    return [c for c in default.grid.channel_list() if c <= 9_000_000][::25]


def test_single_point_sweep(default):
    assert len(sweep(default, [1000])) == 1


def test_empty_grid_rejected(default):
    with pytest.raises(ParameterError):
        sweep(default, [])


def test_sweep_is_deterministic(default, grid):
    a = sweep(default, grid)
    b = sweep(default, grid)
    c = sweep(default, grid, workers=2)
    assert a.reports == b.reports == c.reports
    assert list(a.reports) == list(c.reports)


def test_sweep_records_point_errors(default):
    sc = replace(default, kernels=(fft(128),), mode="em",
                 budget=replace(default.budget, sram_capacity_accel=256, sram_capacity_controller=0))
    fmap = sweep(sc, [1, 2, 4])
    assert all(isinstance(r, PointError) for r in fmap.reports.values())
    assert fmap.verdicts()[0] == (1, "error")


def test_default_row_is_contiguous(default, grid):
    for fmap in sweep_rows(default, grid).values():
        assert swap_feasible(fmap)
        assert contiguous(fmap)


@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(f1=st.floats(0.6, 3.0), f2=st.floats(0.6, 3.0))
def test_upper_boundary_monotone_in_bus_bandwidth(default, grid, f1, f2):
    lo, hi = sorted((f1, f2))
    t = default.flash.timing
    at = lambda f: replace(default, flash=replace(default.flash, timing=replace(t, bus_bandwidth=t.bus_bandwidth * f)))
    slow, fast = sweep(at(lo), grid), sweep(at(hi), grid)
    assert contiguous(slow) and contiguous(fast)
    if swap_feasible(slow):
        assert swap_feasible(fast) and swap_feasible(fast)[-1] >= swap_feasible(slow)[-1]


@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(f1=st.floats(0.5, 1.5), f2=st.floats(0.5, 1.5))
def test_boundaries_monotone_in_program_latency(default, grid, f1, f2):
    lo, hi = sorted((f1, f2))
    t = default.flash.timing
    at = lambda f: replace(default, flash=replace(default.flash, timing=replace(t, t_program=t.t_program * f)))
    quick, slow = sweep(at(lo), grid), sweep(at(hi), grid)
    assert contiguous(quick) and contiguous(slow)
    assert set(swap_feasible(slow)) <= set(swap_feasible(quick))


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(c=st.integers(16, 2**22), cap1=st.integers(0, 2**23), cap2=st.integers(0, 2**23))
def test_more_sram_never_breaks_feasibility(default, c, cap1, cap2):
    lo, hi = sorted((cap1, cap2))
    pt = point_for(default.budget, c)
    at = lambda cap: replace(default, budget=replace(default.budget, sram_capacity_accel=cap))
    if classify(pt, at(lo)).overall:
        assert classify(pt, at(hi)).overall


def test_em_region_contains_naive_region(default, grid):
    naive = set(sweep(default, grid, mode="naive").feasible_channels())
    em = set(sweep(default, grid, mode="em").feasible_channels())
    assert naive and naive <= em


# -- required_sram ----------------------------------------------------------------

def feasible_with(sc, kernel, pt):
    def check(cap):
        s = replace(sc, kernels=(kernel,), budget=replace(sc.budget, sram_capacity_accel=cap))
        return classify(pt, s).overall
    return check


def test_required_sram_fft_example_matches_linear_scan():
    sc = worked_scenario([fft(128)], accel=0, power_budget=15 * MW, leakage=2e-10)
    k = fft(128)
    pt = point_for(sc.budget, 1000)
    caps = capacity_candidates(k, 1000, sc.flash.geometry.page_size)
    got = required_sram(k, pt, sc)
    assert got == required_sram_linear(feasible_with(sc, k, pt), caps)
    assert got is not None and got < working_set_bytes(k, 1000)


def test_required_sram_minimality_bound(default):
    k = default.kernels[0]
    pt = point_for(default.budget, 2000)
    cap = 12_288
    assert feasible_with(default, k, pt)(cap)
    assert required_sram(k, pt, default) <= cap


def test_required_sram_none_when_power_fails(default):
    sc = replace(default, budget=replace(default.budget, power_budget=0.1 * MW))
    assert required_sram(bbf(), point_for(sc.budget, 1000), sc) is None


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(c=st.integers(16, 60_000), p1=st.floats(5, 40), p2=st.floats(5, 40))
def test_required_sram_monotone_in_power_budget(default, c, p1, p2):
    lo, hi = sorted((p1, p2))
    k = default.kernels[0]
    at = lambda p: replace(default, budget=replace(default.budget, power_budget=p * MW))
    pt = point_for(default.budget, c)
    small, large = required_sram(k, pt, at(lo)), required_sram(k, pt, at(hi))
    if small is not None:
        assert large is not None and large <= small
