"""Discrete-event simulation of deadline monotonic scheduling of job streams."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .workload import Job, JobStream

#: Worst-case synthetic utilization bound for deadline monotonic scheduling
#: of job streams (2 - sqrt(2)); below it no deadline can be missed.
SYNTHETIC_UTIL_BOUND = 2.0 - math.sqrt(2.0)

DEFAULT_CD_CAP = 0.125
DEFAULT_DEADLINE_RANGE = (10.0, 1000.0)


def gen_streams(
    n_streams: int,
    target_util: float,
    rng: np.random.Generator,
    max_cd_ratio: float = DEFAULT_CD_CAP,
    deadline_range: tuple[float, float] = DEFAULT_DEADLINE_RANGE,
) -> list[JobStream]:
    """Random job streams whose long-run synthetic utilization averages target_util.

    Each stream gets a log-uniform relative deadline, a density c/D uniform
    in (0, max_cd_ratio], and an exponential mean gap sized so the expected
    fraction of time the stream is active yields the requested average U(t).
    """
    if n_streams < 1:
        raise ValueError("need n_streams >= 1")
    if not (0.0 < max_cd_ratio <= 1.0):
        raise ValueError("need 0 < max_cd_ratio <= 1")
    if target_util <= 0.0:
        raise ValueError("target_util must be positive (mean gap would diverge)")
    lo, hi = deadline_range
    if not (0.0 < lo <= hi):
        raise ValueError(f"bad deadline range {deadline_range}")
    deadlines = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n_streams))
    densities = rng.uniform(0.0, max_cd_ratio, size=n_streams)
    densities = np.maximum(densities, 1e-9 * max_cd_ratio)
    total_density = float(densities.sum())
    # occupancy rho = D / (D + gap): expected U(t) = rho * sum of densities
    rho = target_util / total_density
    if rho >= 1.0:
        raise ValueError(
            f"target_util {target_util} unreachable: stream densities sum to "
            f"{total_density:.4f}"
        )
    gaps = deadlines * (1.0 - rho) / rho
    return [
        JobStream(
            id=i,
            exec_time=float(densities[i] * deadlines[i]),
            rel_deadline=float(deadlines[i]),
            mean_gap=float(gaps[i]),
        )
        for i in range(n_streams)
    ]


def release_jobs(
    stream: JobStream, horizon: float, rng: np.random.Generator
) -> list[Job]:
    """Job arrivals for one stream up to the horizon.

    The first arrival and every inter-release gap are exponential with the
    stream's mean gap; consecutive arrivals are separated by at least the
    relative deadline, so jobs of one stream never overlap.
    """
    if horizon <= 0:
        raise ValueError("need horizon > 0")
    jobs = []
    t = float(rng.exponential(stream.mean_gap)) if stream.mean_gap > 0 else 0.0
    while t < horizon:
        jobs.append(
            Job(
                stream_id=stream.id,
                arrival=t,
                abs_deadline=t + stream.rel_deadline,
                exec_time=stream.exec_time,
            )
        )
        gap = float(rng.exponential(stream.mean_gap)) if stream.mean_gap > 0 else 0.0
        t += stream.rel_deadline + gap
    return jobs


@dataclass
class SimReport:
    """Outcome of one simulation run."""

    released: int = 0
    completed: int = 0
    missed: int = 0
    max_synthetic_util: float = 0.0
    per_stream_released: dict = field(default_factory=dict)
    per_stream_missed: dict = field(default_factory=dict)

    @property
    def miss_fraction(self) -> float:
        done = self.completed + self.missed
        return self.missed / done if done else 0.0

    @property
    def in_flight(self) -> int:
        return self.released - self.completed - self.missed


def peak_synthetic_util(jobs: Sequence[Job], streams: Sequence[JobStream]) -> float:
    """Maximum of U(t) = sum of c/D over active jobs along the trace.

    Active means arrival <= t <= absolute deadline; membership does not
    depend on execution progress, so this is exact for any exec scaling.
    """
    density = {s.id: s.density for s in streams}
    events = []  # (time, delta); departures sort before arrivals at a tie
    for j in jobs:
        d = density[j.stream_id]
        events.append((j.arrival, 1, d))
        events.append((j.abs_deadline, 0, -d))
    events.sort()
    u = 0.0
    peak = 0.0
    for _, _, delta in events:
        u += delta
        peak = max(peak, u)
    return peak


def scale_to_peak_util(
    jobs: Sequence[Job], streams: Sequence[JobStream], target_peak: float
) -> tuple[list[Job], list[JobStream]]:
    """Rescale all exec times so the trace's peak U(t) equals target_peak.

    U(t) is linear in a global exec-time scale because active-set membership
    depends only on arrivals and deadlines.
    """
    peak = peak_synthetic_util(jobs, streams)
    if peak <= 0:
        raise ValueError("empty trace; cannot scale")
    f = target_peak / peak
    streams2 = [
        JobStream(
            id=s.id,
            exec_time=s.exec_time * f,
            rel_deadline=s.rel_deadline,
            mean_gap=s.mean_gap,
        )
        for s in streams
    ]
    jobs2 = [
        Job(
            stream_id=j.stream_id,
            arrival=j.arrival,
            abs_deadline=j.abs_deadline,
            exec_time=j.exec_time * f,
        )
        for j in jobs
    ]
    return jobs2, streams2


# deadline events sort before arrivals at the same instant, so U(t)
# bookkeeping never double-counts a departing and an arriving job
_DDL, _ARR = 0, 1


def simulate_dm(
    streams: Sequence[JobStream],
    horizon: float,
    rng: Optional[np.random.Generator] = None,
    jobs: Optional[Sequence[Job]] = None,
    trace: Optional[list] = None,
) -> SimReport:
    """Preemptive deadline monotonic simulation of job streams.

    Jobs are released per stream (or passed in precomputed), scheduled by
    ascending relative deadline with ties broken by stream index, and
    dropped with a recorded miss if work remains at the absolute deadline.
    """
    if jobs is None:
        if rng is None:
            raise ValueError("need an rng when jobs are not precomputed")
        jobs = [j for s in streams for j in release_jobs(s, horizon, rng)]
    rel_deadline = {s.id: s.rel_deadline for s in streams}
    density = {s.id: s.density for s in streams}

    # event queue: (time, kind, stream_id, job_idx); deadlines before
    # arrivals at the same instant keeps U(t) consistent at touch points
    events: list[tuple[float, int, int, int]] = []
    for idx, j in enumerate(jobs):
        heapq.heappush(events, (j.arrival, _ARR, j.stream_id, idx))

    # ready jobs keyed by (rel_deadline, stream_id, job_idx) -> remaining
    ready: dict[tuple[float, int, int], float] = {}
    report = SimReport()
    for s in streams:
        report.per_stream_released[s.id] = 0
        report.per_stream_missed[s.id] = 0
    synth_u = 0.0
    now = 0.0

    def log(kind: str, sid: int, idx: int, detail: str):
        if trace is not None:
            trace.append((now, kind, sid, idx, detail))

    while events:
        t_next, kind, sid, idx = events[0]
        if t_next > horizon:
            break
        # run the processor from `now` to `t_next`
        span = t_next - now
        while span > 1e-15 and ready:
            key = min(ready)
            run = min(ready[key], span)
            ready[key] -= run
            now += run
            span -= run
            if ready[key] <= 1e-12:
                del ready[key]
                report.completed += 1
                log("complete", key[1], key[2], "")
        heapq.heappop(events)
        now = t_next
        job = jobs[idx]
        if kind == _ARR:
            report.released += 1
            report.per_stream_released[sid] += 1
            synth_u += density[sid]
            report.max_synthetic_util = max(report.max_synthetic_util, synth_u)
            ready[(rel_deadline[sid], sid, idx)] = job.exec_time
            heapq.heappush(events, (job.abs_deadline, _DDL, sid, idx))
            log("arrive", sid, idx, f"c={job.exec_time:.6g}")
        else:
            synth_u -= density[sid]
            key = (rel_deadline[sid], sid, idx)
            if key in ready:  # unfinished at deadline: drop
                del ready[key]
                report.missed += 1
                report.per_stream_missed[sid] += 1
                log("miss", sid, idx, "")
    return report


def gen_streams_total_density(
    n_streams: int,
    total_density: float,
    occupancy: float,
    rng: np.random.Generator,
    max_cd_ratio: float = DEFAULT_CD_CAP,
    deadline_range: tuple[float, float] = (10.0, 40.0),
) -> list[JobStream]:
    """Streams whose densities sum to total_density at a fixed occupancy.

    Occupancy is the expected fraction of time a stream has an active job,
    D / (D + mean_gap); near 1 the trace's U(t) stays close to the density
    sum, so the peak tracks it tightly.
    """
    if n_streams < 1:
        raise ValueError("need n_streams >= 1")
    if not (0.0 < occupancy < 1.0):
        raise ValueError("occupancy must be in (0, 1)")
    if total_density <= 0:
        raise ValueError("total_density must be positive")
    if total_density > n_streams * max_cd_ratio + 1e-12:
        raise ValueError(
            f"total_density {total_density} infeasible with {n_streams} streams "
            f"capped at {max_cd_ratio}"
        )
    lo, hi = deadline_range
    deadlines = np.exp(rng.uniform(math.log(lo), math.log(hi), size=n_streams))
    dens = rng.uniform(0.0, 1.0, size=n_streams)
    dens *= total_density / dens.sum()
    # clip at the cap and push the excess onto the remaining streams; this
    # terminates because the clipped mass shrinks every pass
    while np.any(dens > max_cd_ratio + 1e-15):
        over = dens > max_cd_ratio
        excess = float((dens[over] - max_cd_ratio).sum())
        dens[over] = max_cd_ratio
        room = ~over & (dens < max_cd_ratio)
        if not room.any():
            dens[:] = total_density / n_streams
            break
        dens[room] += excess * dens[room] / dens[room].sum()
    gaps = deadlines * (1.0 - occupancy) / occupancy
    return [
        JobStream(id=i, exec_time=float(dens[i] * deadlines[i]),
                  rel_deadline=float(deadlines[i]), mean_gap=float(gaps[i]))
        for i in range(n_streams)
    ]


def synthetic_sweep(
    n_streams: int,
    u_grid: Sequence[float],
    trials: int,
    horizon: float,
    seed: int,
    max_cd_ratio: float = DEFAULT_CD_CAP,
    deadline_range: tuple[float, float] = (10.0, 40.0),
    occupancy: float = 0.99,
) -> "SyntheticCurve":
    """Fraction of runs with zero misses versus peak synthetic utilization.

    Per trial, near-saturated streams are drawn with densities summing to
    the grid value and the trace's exec times are rescaled so its peak U(t)
    lands exactly on that value before simulating.
    """
    from .threshold import wilson_interval

    grid = sorted(u_grid)
    p_hat, ci_lo, ci_hi = [], [], []
    for k, u in enumerate(grid):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        hits = 0
        for _ in range(trials):
            streams = gen_streams_total_density(
                n_streams, u, occupancy, rng,
                max_cd_ratio=max_cd_ratio, deadline_range=deadline_range,
            )
            jobs = [j for s in streams for j in release_jobs(s, horizon, rng)]
            if not jobs:
                continue
            jobs, streams = scale_to_peak_util(jobs, streams, u)
            rep = simulate_dm(streams, horizon, jobs=jobs)
            if rep.missed == 0:
                hits += 1
        lo, hi = wilson_interval(hits, trials)
        p_hat.append(hits / trials)
        ci_lo.append(lo)
        ci_hi.append(hi)
    return SyntheticCurve(
        n_streams=n_streams,
        grid=tuple(grid),
        p_hat=tuple(p_hat),
        ci_lo=tuple(ci_lo),
        ci_hi=tuple(ci_hi),
        trials=trials,
        seed=seed,
    )


@dataclass(frozen=True)
class SyntheticCurve:
    """Zero-miss probability versus peak synthetic utilization."""

    n_streams: int
    grid: tuple[float, ...]
    p_hat: tuple[float, ...]
    ci_lo: tuple[float, ...]
    ci_hi: tuple[float, ...]
    trials: int
    seed: int

    def crossing(self, level: float = 0.5) -> float:
        """Level crossing of the isotonic fit, as in threshold location."""
        from .threshold import ThresholdCurve, locate_threshold

        curve = ThresholdCurve(
            n=self.n_streams,
            grid=self.grid,
            p_hat=self.p_hat,
            ci_lo=self.ci_lo,
            ci_hi=self.ci_hi,
            trials=(self.trials,) * len(self.grid),
            generator="job-streams",
            period_rule="-",
            seed=self.seed,
        )
        if level == 0.5:
            return locate_threshold(curve).u_star
        from .threshold import _crossing

        fit = curve.isotonic()
        x = _crossing(np.array(self.grid), fit, level)
        if x is None:
            raise ValueError("curve does not cross the requested level")
        return x
