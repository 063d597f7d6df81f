"""Periodic / aperiodic workload model and random workload generators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Task:
    """A periodic task with implicit deadline (deadline defaults to period)."""

    period: int
    exec_time: float
    deadline: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.deadline is None:
            object.__setattr__(self, "deadline", float(self.period))
        if self.period <= 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if self.exec_time <= 0:
            raise ValueError(f"exec_time must be positive, got {self.exec_time}")
        if not (self.exec_time <= self.deadline <= self.period):
            raise ValueError(
                f"need exec_time <= deadline <= period, got "
                f"({self.exec_time}, {self.deadline}, {self.period})"
            )

    @property
    def utilization(self) -> float:
        return self.exec_time / self.period


@dataclass(frozen=True)
class TaskSet:
    """An immutable collection of periodic tasks."""

    tasks: tuple[Task, ...]

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if len(self.tasks) < 1:
            raise ValueError("a task set needs at least one task")

    @property
    def n(self) -> int:
        return len(self.tasks)

    def __iter__(self):
        return iter(self.tasks)

    def __len__(self):
        return len(self.tasks)

    def __getitem__(self, i):
        return self.tasks[i]


@dataclass(frozen=True)
class JobStream:
    """Template for a stream of identical aperiodic jobs.

    Successive jobs are separated by at least the relative deadline, so at
    most one job of a stream is active at any instant.
    """

    id: int
    exec_time: float
    rel_deadline: float
    mean_gap: float

    def __post_init__(self):
        if self.exec_time <= 0:
            raise ValueError("exec_time must be positive")
        if self.rel_deadline <= 0:
            raise ValueError("rel_deadline must be positive")
        if self.mean_gap < 0:
            raise ValueError("mean_gap must be nonnegative")

    @property
    def density(self) -> float:
        return self.exec_time / self.rel_deadline


@dataclass(frozen=True)
class Job:
    """A released job instance of some stream."""

    stream_id: int
    arrival: float
    abs_deadline: float
    exec_time: float


def utilization(ts: TaskSet) -> float:
    """Total utilization: sum of exec_time / period over the set."""
    return sum(t.exec_time / t.period for t in ts)


def gen_uunisort(n: int, total_util: float, rng: np.random.Generator) -> list[float]:
    """Draw n utilizations uniformly from the simplex summing to total_util.

    Sorts n-1 uniforms on [0, U] and takes successive differences against
    the endpoints 0 and U. Vectors containing a component above 1 are
    rejected and redrawn, so the result is uniform on the feasible region.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not (0.0 < total_util <= n):
        raise ValueError(f"need 0 < U <= n, got U={total_util}")
    if n == 1:
        return [total_util]
    while True:
        cuts = np.sort(rng.uniform(0.0, total_util, size=n - 1))
        u = np.diff(np.concatenate(([0.0], cuts, [total_util])))
        if np.all(u <= 1.0):
            return u.tolist()


def gen_uunisort_batch(
    n: int, total_util: float, trials: int, rng: np.random.Generator
) -> np.ndarray:
    """Batched gen_uunisort: returns a (trials, n) array of utilizations."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if not (0.0 < total_util <= n):
        raise ValueError(f"need 0 < U <= n, got U={total_util}")
    if n == 1:
        return np.full((trials, 1), total_util)
    out = np.empty((trials, n))
    need = np.arange(trials)
    while need.size:
        cuts = np.sort(rng.uniform(0.0, total_util, size=(need.size, n - 1)), axis=1)
        pad = np.empty((need.size, n + 1))
        pad[:, 0] = 0.0
        pad[:, 1:-1] = cuts
        pad[:, -1] = total_util
        u = np.diff(pad, axis=1)
        ok = np.all(u <= 1.0, axis=1)
        out[need[ok]] = u[ok]
        need = need[~ok]
    return out


def gen_equal_split(n: int, total_util: float) -> list[float]:
    """Split total_util equally among n tasks."""
    if n < 1 or total_util <= 0:
        raise ValueError("need n >= 1 and U > 0")
    if total_util / n > 1.0:
        raise ValueError(f"per-task utilization {total_util / n} exceeds 1")
    return [total_util / n] * n


def gen_periods(n: int, lo: int, hi: int, rng: np.random.Generator) -> list[int]:
    """Draw n periods i.i.d. uniform over the integers [lo, hi]."""
    if not (1 <= lo <= hi):
        raise ValueError(f"need 1 <= lo <= hi, got [{lo}, {hi}]")
    return rng.integers(lo, hi, size=n, endpoint=True).tolist()


def gen_periods_from_set(
    n: int, allowed: Sequence[int], rng: np.random.Generator
) -> list[int]:
    """Draw n periods i.i.d. uniform over an explicit set (with replacement)."""
    allowed = sorted(set(allowed))
    if not allowed:
        raise ValueError("allowed period set is empty")
    idx = rng.integers(0, len(allowed), size=n)
    return [allowed[i] for i in idx]


def assemble_taskset(utilizations: Sequence[float], periods: Sequence[int]) -> TaskSet:
    """Build a TaskSet with exec_time = u_i * P_i and implicit deadlines."""
    if len(utilizations) != len(periods):
        raise ValueError(
            f"length mismatch: {len(utilizations)} utilizations, {len(periods)} periods"
        )
    tasks = []
    for u, p in zip(utilizations, periods):
        if not (0.0 < u <= 1.0):
            raise ValueError(f"utilization {u} out of (0, 1]")
        tasks.append(Task(period=int(p), exec_time=u * p))
    return TaskSet(tuple(tasks))


def gen_barely_schedulable(periods: Sequence[int]) -> TaskSet:
    """The Liu-Layland critical task set for strictly increasing periods.

    exec_time[i] = P[i+1] - P[i] for i < n-1 and
    exec_time[n-1] = P[n-1] - 2*(sum of the others). The result is
    schedulable under rate monotonic, and increasing any exec_time breaks it.
    """
    periods = list(periods)
    if any(p <= 0 for p in periods):
        raise ValueError("periods must be positive")
    if any(b <= a for a, b in zip(periods, periods[1:])):
        raise ValueError("periods must be strictly increasing")
    n = len(periods)
    if n == 1:
        return TaskSet((Task(period=periods[0], exec_time=float(periods[0])),))
    c = [float(periods[i + 1] - periods[i]) for i in range(n - 1)]
    c_last = periods[-1] - 2.0 * sum(c)
    if c_last <= 0:
        raise ValueError(
            f"period spread too wide: last exec_time would be {c_last} <= 0"
        )
    c.append(c_last)
    return TaskSet(tuple(Task(period=p, exec_time=ci) for p, ci in zip(periods, c)))


# --- task-set file I/O ---------------------------------------------------


def save_taskset(ts: TaskSet, path) -> None:
    """Write a task set in the line-oriented text format."""
    with open(path, "w") as f:
        f.write("# period exec_time [deadline]\n")
        for t in ts:
            if t.deadline == t.period:
                f.write(f"{t.period} {t.exec_time!r}\n")
            else:
                f.write(f"{t.period} {t.exec_time!r} {t.deadline!r}\n")


def load_taskset(path) -> TaskSet:
    """Parse a task-set file: one `period exec_time [deadline]` per line."""
    tasks = []
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) not in (2, 3):
                raise ValueError(
                    f"{path}:{lineno}: expected 2 or 3 fields, got {len(fields)}"
                )
            try:
                period = int(fields[0])
                exec_time = float(fields[1])
                deadline = float(fields[2]) if len(fields) == 3 else None
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if deadline is None:
                tasks.append(Task(period=period, exec_time=exec_time))
            else:
                tasks.append(Task(period=period, exec_time=exec_time, deadline=deadline))
    if not tasks:
        raise ValueError(f"{path}: no tasks found")
    return TaskSet(tuple(tasks))


def taskset_csv_rows(ts: TaskSet) -> list[dict]:
    """Rows for CSV export: index,period,exec_time,deadline,utilization."""
    return [
        {
            "index": i,
            "period": t.period,
            "exec_time": t.exec_time,
            "deadline": t.deadline,
            "utilization": t.utilization,
        }
        for i, t in enumerate(ts)
    ]
