"""Simulated power-controlled request server.

Admission control holds the synthetic utilization U(t) under a set point by
stepping the processor frequency up; a hysteresis timer steps it back down.
Energy integrates a frequency/voltage power model over the run, so results
are meaningful as orderings and relative savings, not absolute watts.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

#: Pentium M (1.7 GHz, enhanced SpeedStep) operating points, MHz and volts.
DEFAULT_OPERATING_POINTS = (
    (600, 0.956),
    (800, 1.004),
    (1000, 1.116),
    (1200, 1.228),
    (1400, 1.308),
    (1700, 1.484),
)


@dataclass(frozen=True)
class DvsProfile:
    """Frequency/voltage operating points plus power-model parameters.

    Dynamic power is k * f * V(f)^2; a static fraction s blends in constant
    power at the top operating point: P(f) = (1-s)*k*f*V(f)^2 + s*k*fmax*Vmax^2.
    """

    points: tuple[tuple[float, float], ...] = DEFAULT_OPERATING_POINTS
    k: float = 1.0
    static_fraction: float = 0.0

    def __post_init__(self):
        if not self.points:
            raise ValueError("profile needs at least one operating point")
        freqs = [f for f, _ in self.points]
        volts = [v for _, v in self.points]
        if any(b <= a for a, b in zip(freqs, freqs[1:])):
            raise ValueError("frequencies must be strictly increasing")
        if any(b < a for a, b in zip(volts, volts[1:])):
            raise ValueError("voltages must be nondecreasing")
        if not (0.0 <= self.static_fraction <= 1.0):
            raise ValueError("static_fraction must be in [0, 1]")

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(f for f, _ in self.points)

    @property
    def f_max(self) -> float:
        return self.points[-1][0]

    def voltage(self, f: float) -> float:
        for fi, vi in self.points:
            if fi == f:
                return vi
        raise ValueError(f"{f} is not an operating point of this profile")


def power_at(profile: DvsProfile, f: float) -> float:
    """Model power at an operating point (strictly increasing in f for s < 1)."""
    v = profile.voltage(f)
    fm, vm = profile.points[-1]
    dyn = profile.k * f * v * v
    top = profile.k * fm * vm * vm
    s = profile.static_fraction
    return (1.0 - s) * dyn + s * top


@dataclass(frozen=True)
class ServiceClass:
    """A request class: deadline, exec time at top speed, compute fraction."""

    rel_deadline: float
    base_exec_time: float
    compute_fraction: float = 0.9

    def __post_init__(self):
        if self.rel_deadline <= 0 or self.base_exec_time <= 0:
            raise ValueError("deadline and base_exec_time must be positive")
        if not (0.0 <= self.compute_fraction <= 1.0):
            raise ValueError("compute_fraction must be in [0, 1]")


def default_service_classes(n: int = 6, density: float = 0.1,
                            beta: float = 0.9,
                            spread: float = 1.3) -> list[ServiceClass]:
    """Six geometrically spaced deadline levels from 20 ms, constant c/D."""
    return [
        ServiceClass(
            rel_deadline=20.0 * spread**i,
            base_exec_time=density * 20.0 * spread**i,
            compute_fraction=beta,
        )
        for i in range(n)
    ]


def exec_time_at(cls: ServiceClass, f: float, f_max: float) -> float:
    """Execution time at frequency f: only the compute fraction slows down."""
    if f <= 0:
        raise ValueError("frequency must be positive")
    beta = cls.compute_fraction
    return cls.base_exec_time * (beta * (f_max / f) + (1.0 - beta))


@dataclass(frozen=True)
class Request:
    """One HTTP request: arrival, class index, actual exec-time factor."""

    arrival: float
    cls: int
    session: int
    exec_factor: float = 1.0


@dataclass
class EnergyReport:
    """Energy, power, and deadline-miss accounting for one run."""

    set_point: float
    load: float
    horizon: float = 0.0
    energy: float = 0.0
    admitted: int = 0
    rejected: int = 0
    completed: int = 0
    missed: int = 0
    per_class_admitted: dict = field(default_factory=dict)
    per_class_missed: dict = field(default_factory=dict)
    freq_time: dict = field(default_factory=dict)

    @property
    def avg_power(self) -> float:
        return self.energy / self.horizon if self.horizon > 0 else 0.0

    @property
    def miss_fraction(self) -> float:
        return self.missed / self.admitted if self.admitted else 0.0


def make_workload(
    classes: Sequence[ServiceClass],
    n_sessions: int,
    load: float,
    rng: np.random.Generator,
    session_len_range: tuple[int, int] = (2, 16),
    exec_noise_sd: float = 0.0,
) -> list[Request]:
    """Session-structured request trace at a target load.

    Load is the long-run fraction of top-speed capacity demanded:
    request rate times mean base exec time. Sessions arrive Poisson; each
    issues a uniform-random number of requests with random classes, spaced
    at least one relative deadline apart.
    """
    if n_sessions < 1:
        raise ValueError("need n_sessions >= 1")
    if load <= 0:
        raise ValueError("load must be positive")
    lo, hi = session_len_range
    mean_len = (lo + hi) / 2.0
    mean_exec = float(np.mean([c.base_exec_time for c in classes]))
    session_rate = load / (mean_len * mean_exec)
    requests: list[Request] = []
    t = 0.0
    for s in range(n_sessions):
        t += float(rng.exponential(1.0 / session_rate))
        length = int(rng.integers(lo, hi, endpoint=True))
        a = t
        for _ in range(length):
            cls = int(rng.integers(0, len(classes)))
            factor = 1.0
            if exec_noise_sd > 0:
                factor = max(0.1, 1.0 + float(rng.normal(0.0, exec_noise_sd)))
            requests.append(Request(arrival=a, cls=cls, session=s, exec_factor=factor))
            d = classes[cls].rel_deadline
            a += d + float(rng.exponential(d))
    requests.sort(key=lambda r: (r.arrival, r.session))
    return requests


_DDL, _ARR, _RELAX = 0, 1, 2


class _Controller:
    """Admission + speed state: active-set density split by compute fraction."""

    def __init__(self, profile: DvsProfile, set_point: float):
        self.profile = profile
        self.set_point = set_point
        self.freqs = profile.frequencies
        self.f_idx = 0
        # U(f) = scaled * (f_max / f) + flat over active admitted jobs
        self.scaled = 0.0
        self.flat = 0.0

    @property
    def freq(self) -> float:
        return self.freqs[self.f_idx]

    def util_at(self, f: float, extra_scaled: float = 0.0, extra_flat: float = 0.0) -> float:
        return (self.scaled + extra_scaled) * (self.profile.f_max / f) + self.flat + extra_flat

    def admit(self, cls: ServiceClass) -> bool:
        """Admit if U(t) fits at the current or any higher frequency."""
        a = cls.compute_fraction * cls.base_exec_time / cls.rel_deadline
        b = (1.0 - cls.compute_fraction) * cls.base_exec_time / cls.rel_deadline
        for idx in range(self.f_idx, len(self.freqs)):
            if self.util_at(self.freqs[idx], a, b) <= self.set_point + 1e-12:
                self.f_idx = idx
                self.scaled += a
                self.flat += b
                return True
        return False

    def depart(self, cls: ServiceClass) -> None:
        self.scaled -= cls.compute_fraction * cls.base_exec_time / cls.rel_deadline
        self.flat -= (1.0 - cls.compute_fraction) * cls.base_exec_time / cls.rel_deadline
        self.scaled = max(self.scaled, 0.0)
        self.flat = max(self.flat, 0.0)

    def relax(self) -> None:
        """Step down to the slowest frequency still under the set point."""
        for idx in range(len(self.freqs)):
            if self.util_at(self.freqs[idx]) <= self.set_point + 1e-12:
                self.f_idx = idx
                return


def run_workload(
    profile: DvsProfile,
    classes: Sequence[ServiceClass],
    requests: Sequence[Request],
    set_point: float,
    load: float = float("nan"),
    hysteresis: float = 100.0,
) -> EnergyReport:
    """Simulate the admission-controlled, speed-scaled server on a trace.

    Deadline monotonic among admitted requests; a request that still has
    work at its absolute deadline is dropped and counted as a miss. Energy
    integrates power_at over the whole run, idle included.
    """
    if not (0.0 < set_point <= 1.0):
        raise ValueError("set_point must be in (0, 1]")
    ctl = _Controller(profile, set_point)
    report = EnergyReport(set_point=set_point, load=load)
    for i in range(len(classes)):
        report.per_class_admitted[i] = 0
        report.per_class_missed[i] = 0

    events: list[tuple[float, int, int]] = []
    for idx, r in enumerate(requests):
        heapq.heappush(events, (r.arrival, _ARR, idx))

    # ready jobs: (rel_deadline, request_idx) -> remaining fraction of work
    ready: dict[tuple[float, int], float] = {}
    deadline_of: dict[int, float] = {}
    now = 0.0

    def service_time(idx: int, frac: float) -> float:
        r = requests[idx]
        c = classes[r.cls]
        return frac * exec_time_at(c, ctl.freq, profile.f_max) * r.exec_factor

    while events:
        t_next = events[0][0]
        span = t_next - now
        # execute ready work at the current frequency until the next event
        while span > 1e-15 and ready:
            key = min(ready)
            need = service_time(key[1], ready[key])
            run = min(need, span)
            report.energy += power_at(profile, ctl.freq) * run
            report.freq_time[ctl.freq] = report.freq_time.get(ctl.freq, 0.0) + run
            now += run
            span -= run
            if run >= need - 1e-12:
                del ready[key]
                report.completed += 1
            else:
                ready[key] -= run / (need / ready[key])
        if span > 0:
            report.energy += power_at(profile, ctl.freq) * span
            report.freq_time[ctl.freq] = report.freq_time.get(ctl.freq, 0.0) + span
        now = t_next
        _, kind, idx = heapq.heappop(events)
        if kind == _ARR:
            r = requests[idx]
            cls = classes[r.cls]
            if ctl.admit(cls):
                report.admitted += 1
                report.per_class_admitted[r.cls] += 1
                ready[(cls.rel_deadline, idx)] = 1.0
                deadline_of[idx] = now + cls.rel_deadline
                heapq.heappush(events, (deadline_of[idx], _DDL, idx))
            else:
                report.rejected += 1
        elif kind == _DDL:
            r = requests[idx]
            cls = classes[r.cls]
            ctl.depart(cls)
            key = (cls.rel_deadline, idx)
            if key in ready:
                del ready[key]
                report.missed += 1
                report.per_class_missed[r.cls] += 1
            heapq.heappush(events, (now + hysteresis, _RELAX, idx))
        else:
            ctl.relax()
    report.horizon = now
    return report


def run_benchmark(
    set_point: float,
    load: float,
    n_sessions: int = 1000,
    seed: int = 0,
    profile: Optional[DvsProfile] = None,
    classes: Optional[Sequence[ServiceClass]] = None,
    hysteresis: float = 100.0,
    exec_noise_sd: float = 0.8,
) -> EnergyReport:
    """The fixed benchmark: generate the trace from the seed, then simulate.

    Execution-time noise is on by default here: it models the service-time
    variation a real server sees, which is what produces occasional misses
    at set points above the worst-case bound.

    The trace depends only on (classes, n_sessions, load, seed), so reports
    at different set points compare like-for-like workloads.
    """
    profile = profile or DvsProfile()
    classes = classes if classes is not None else default_service_classes()
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    reqs = make_workload(classes, n_sessions, load, rng, exec_noise_sd=exec_noise_sd)
    return run_workload(profile, classes, reqs, set_point, load=load,
                        hysteresis=hysteresis)


def load_profile(path) -> DvsProfile:
    """Read a profile file: one `freq_mhz voltage` pair per line."""
    points = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected `freq_mhz voltage`")
            points.append((float(fields[0]), float(fields[1])))
    if not points:
        raise ValueError(f"{path}: no operating points found")
    return DvsProfile(points=tuple(points))
