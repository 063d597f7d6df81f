"""Acceptance suite: one test per release criterion, one verdict line each.

These run the full-size experiments, so the module takes a few minutes.
Run just this file with `pytest tests/test_acceptance.py -v -s`.
"""

import itertools
import time

import numpy as np
import pytest

from sharpsched import analysis as an
from sharpsched import apsim, cli, dvs
from sharpsched import threshold as th
from sharpsched import workload as wl
from sharpsched.workload import Task, TaskSet


def verdict(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


# --- shared full-size sweeps (reused across criteria 3, 4, 5) -------------

N_LIST = (8, 16, 32, 64)
GRID = dict(u_min=0.6, u_max=1.0, step=0.02, trials=2000)


@pytest.fixture(scope="module")
def uunisort_curves():
    return {
        n: th.sweep(n, seed=100 + k, **GRID) for k, n in enumerate(N_LIST)
    }


@pytest.fixture(scope="module")
def equal_split_curve():
    return th.sweep(32, seed=150, generator="equal-split", **GRID)


@pytest.fixture(scope="module")
def restricted_curve():
    rule = th.PeriodRule(allowed=th.RESTRICTED_PERIOD_SET)
    return th.sweep(32, 0.7, 1.0, 0.02, 2000, seed=200, period_rule=rule)


def curve_crossing(curve, p_values, level=0.5):
    """0.5 crossing of an alternate probability column of the same curve."""
    fit = th.isotonic_decreasing(
        np.array(p_values), np.array(curve.trials, dtype=float)
    )
    return th._crossing(np.array(curve.grid), fit, level)


# --- criteria -------------------------------------------------------------


def test_criterion_01_oracle_equivalence():
    t0 = time.time()
    checked = 0

    def agree(ts):
        return an.rm_schedulable(ts) == an.brute_force_schedulable(ts)

    # exhaustive over two-task sets with periods <= 6 and quarter-grid execs
    for p1, p2 in itertools.product(range(1, 7), repeat=2):
        for q1 in range(1, 4 * p1 + 1):
            for q2 in range(1, 4 * p2 + 1):
                ts = TaskSet((Task(p1, q1 / 4.0), Task(p2, q2 / 4.0)))
                assert agree(ts), f"disagreement on {ts}"
                checked += 1

    # random instances: n <= 4, periods <= 12, execs on a 0.25 grid
    rng = np.random.default_rng(2024)
    for _ in range(10_000):
        n = int(rng.integers(1, 5))
        tasks = []
        for _ in range(n):
            p = int(rng.integers(1, 13))
            q = int(rng.integers(1, 4 * p + 1))
            tasks.append(Task(p, q / 4.0))
        ts = TaskSet(tuple(tasks))
        assert agree(ts), f"disagreement on {ts}"
        checked += 1

    dt = time.time() - t0
    verdict(1, dt < 60.0,
            f"{checked} instances, 0 oracle disagreements, {dt:.1f}s (< 60s)")


def test_criterion_02_liu_layland_sufficiency():
    t0 = time.time()
    rng = np.random.default_rng(7)
    total = 0
    failures = 0
    for n in (2, 8, 32):
        target = an.ll_bound(n) - 0.01
        utils = wl.gen_uunisort_batch(n, target, 100_000 // 3 + 1, rng)
        periods = rng.integers(1, 100_000, size=utils.shape, endpoint=True)
        execs = utils * periods
        for t in range(utils.shape[0]):
            total += 1
            if not an.rm_schedulable_arrays(
                periods[t].astype(float), execs[t]
            ):
                failures += 1
    dt = time.time() - t0
    verdict(2, failures == 0 and dt < 60.0,
            f"{total} sets at ll_bound(n)-0.01, {failures} failures, "
            f"{dt:.1f}s (< 60s)")


def test_criterion_03_large_n_threshold_curve(uunisort_curves):
    curve = uunisort_curves[64]
    est = th.locate_threshold(curve)
    rng_lo = np.random.default_rng(np.random.SeedSequence([300, 0]))
    rng_hi = np.random.default_rng(np.random.SeedSequence([300, 1]))
    mu_lo, _, _ = th.estimate_mu(64, 0.70, 2000, rng_lo)
    mu_hi, _, _ = th.estimate_mu(64, 0.95, 2000, rng_hi)
    ok = 0.78 <= est.u_star <= 0.92 and mu_lo >= 0.98 and mu_hi <= 0.02
    verdict(3, ok,
            f"n=64 u_star={est.u_star:.4f} (band [0.78, 0.92]), "
            f"mu(0.70)={mu_lo:.4f} (>= 0.98), mu(0.95)={mu_hi:.4f} (<= 0.02)")


def test_criterion_04_width_monotone_and_slope(uunisort_curves):
    widths = {
        n: th.locate_threshold(uunisort_curves[n]).width for n in N_LIST
    }
    ordered = all(
        widths[a] > widths[b] for a, b in zip(N_LIST, N_LIST[1:])
    )
    slope = float(np.polyfit(
        np.log(N_LIST), np.log([widths[n] for n in N_LIST]), 1
    )[0])
    ok = ordered and -0.8 <= slope <= -0.2
    detail = ", ".join(f"w({n})={widths[n]:.3f}" for n in N_LIST)
    verdict(4, ok,
            f"{detail} strictly decreasing={ordered}, "
            f"slope={slope:.3f} (band [-0.8, -0.2])")


def test_criterion_05_equal_split_gain(uunisort_curves, equal_split_curve):
    uuni = uunisort_curves[32]
    eq = equal_split_curve
    u_uuni = th.locate_threshold(uuni).u_star
    u_eq = th.locate_threshold(eq).u_star
    # conservative CI on each crossing: cross the interval envelopes
    uuni_hi = curve_crossing(uuni, uuni.ci_hi)
    eq_lo = curve_crossing(eq, eq.ci_lo)
    if uuni_hi is None:
        uuni_hi = float(uuni.grid[-1])
    if eq_lo is None:
        eq_lo = float(eq.grid[0])
    ok = eq_lo - uuni_hi >= 0.02
    verdict(5, ok,
            f"n=32 equal-split u_star={u_eq:.4f} (CI low {eq_lo:.4f}) vs "
            f"uunisort u_star={u_uuni:.4f} (CI high {uuni_hi:.4f}); "
            f"gap beyond CIs = {eq_lo - uuni_hi:+.4f} (need >= 0.02)")


def test_criterion_06_restricted_period_threshold(restricted_curve):
    est = th.locate_threshold(restricted_curve)
    ok = 0.91 <= est.u_star <= 0.97 and est.u_star > 0.88
    verdict(6, ok,
            f"restricted periods n=32 u_star={est.u_star:.4f} "
            f"(band [0.91, 0.97], must exceed 0.88)")


def test_criterion_07_synthetic_bound_guarantee():
    t0 = time.time()
    bound = apsim.SYNTHETIC_UTIL_BOUND
    runs = 0
    misses = 0
    rng = np.random.default_rng(42)
    while runs < 1000:
        n = int(rng.integers(4, 33))
        target = float(rng.uniform(0.1, 0.55))
        try:
            streams = apsim.gen_streams(n, target, rng)
        except ValueError:
            # the drawn stream densities cannot carry this target; redraw
            continue
        jobs = [
            j for s in streams for j in apsim.release_jobs(s, 2000.0, rng)
        ]
        if not jobs:
            continue
        peak = apsim.peak_synthetic_util(jobs, streams)
        if peak > bound:
            jobs, streams = apsim.scale_to_peak_util(jobs, streams, bound)
        rep = apsim.simulate_dm(streams, 2000.0, jobs=jobs)
        assert rep.max_synthetic_util <= bound + 1e-9
        misses += rep.missed
        runs += 1
    dt = time.time() - t0
    verdict(7, misses == 0,
            f"{runs} runs with max U(t) <= {bound:.3f}, "
            f"{misses} deadline misses, {dt:.1f}s")


def test_criterion_08_stream_threshold_crossing():
    curve = apsim.synthetic_sweep(
        32, [round(0.6 + 0.05 * k, 2) for k in range(9)],
        trials=16, horizon=30_000.0, seed=5,
    )
    x = curve.crossing()
    ok = 0.72 <= x <= 0.88
    verdict(8, ok,
            f"zero-miss probability crosses 0.5 at peak U(t)={x:.4f} "
            f"(band [0.72, 0.88])")


def test_criterion_09_energy_and_miss_ladder():
    bound = round(apsim.SYNTHETIC_UTIL_BOUND, 3)
    loads = (0.4, 0.6, 0.8)
    reports = {
        (sp, load): dvs.run_benchmark(sp, load, n_sessions=1000, seed=0)
        for sp in (bound, 0.75, 0.80) for load in loads
    }
    energy_ok = all(
        reports[(0.75, load)].energy <= 0.95 * reports[(bound, load)].energy
        for load in loads
    )
    def pooled_miss(sp):
        admitted = sum(reports[(sp, load)].admitted for load in loads)
        missed = sum(reports[(sp, load)].missed for load in loads)
        return missed / admitted

    m_bound, m_75, m_80 = pooled_miss(bound), pooled_miss(0.75), pooled_miss(0.80)
    miss_ok = m_bound <= 0.03 and m_75 <= 0.05 and m_80 > m_75
    ratios = ", ".join(
        f"{reports[(0.75, load)].energy / reports[(bound, load)].energy:.3f}"
        for load in loads
    )
    verdict(9, energy_ok and miss_ok,
            f"energy(0.75)/energy({bound}) per load = {ratios} (<= 0.95); "
            f"miss {bound}={m_bound:.4f} (<= 0.03), 0.75={m_75:.4f} (<= 0.05), "
            f"0.80={m_80:.4f} (> miss at 0.75)")


def test_criterion_10_byte_identical_reruns(tmp_path):
    cases = {
        "gen": ["gen", "--n", "8", "--utilization", "0.7", "--seed", "4"],
        "sweep": ["sweep", "--n", "8", "--u-min", "0.7", "--u-max", "0.9",
                  "--step", "0.05", "--trials", "200", "--seed", "4"],
        "threshold": ["threshold", "--n", "8", "--u-min", "0.5",
                      "--u-max", "1.0", "--step", "0.05", "--trials", "200",
                      "--seed", "4"],
        "width": ["width", "--n-list", "4,8,16", "--u-min", "0.5",
                  "--u-max", "1.0", "--step", "0.05", "--trials", "100",
                  "--seed", "4"],
        "apsim": ["apsim", "--streams", "16", "--target-util", "0.4",
                  "--horizon", "2000", "--seed", "4"],
        "dvs": ["dvs", "--set-point", "0.7", "--load", "0.5",
                "--sessions", "50", "--seed", "4"],
    }
    stable = []
    for name, argv in cases.items():
        a = tmp_path / f"{name}_a.csv"
        b = tmp_path / f"{name}_b.csv"
        assert cli.main(argv + ["--out", str(a)]) == 0
        assert cli.main(argv + ["--out", str(b)]) == 0
        stable.append(a.read_bytes() == b.read_bytes())
    verdict(10, all(stable),
            f"{sum(stable)}/{len(stable)} subcommands byte-identical on rerun "
            f"({', '.join(cases)})")
