"""Exact and bound-based schedulability tests for fixed-priority scheduling."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .workload import JobStream, TaskSet, utilization

#: Marker returned when the response-time iteration overshoots the deadline.
EXCEEDS_DEADLINE = "exceeds deadline"

_REL_TOL = 1e-12


def rm_order(ts: TaskSet) -> list[int]:
    """Rate monotonic priority order: ascending period, ties by index."""
    return sorted(range(ts.n), key=lambda i: (ts[i].period, i))


def dm_order(streams: Sequence[JobStream]) -> list[int]:
    """Deadline monotonic priority order: ascending relative deadline."""
    return sorted(range(len(streams)), key=lambda i: (streams[i].rel_deadline, i))


def response_time(
    ts: TaskSet, order: Sequence[int], i: int
) -> Union[float, str]:
    """Worst-case response time of task i under the given priority order.

    Iterates L <- c_i + sum over higher-priority j of ceil(L / P_j) * c_j
    from L = c_i. Returns EXCEEDS_DEADLINE as soon as an iterate passes
    the deadline.
    """
    pos = order.index(i)
    hp = [ts[j] for j in order[:pos]]
    c_i = ts[i].exec_time
    d_i = ts[i].deadline
    if not hp:
        return c_i if c_i <= d_i else EXCEEDS_DEADLINE
    p = np.array([t.period for t in hp], dtype=float)
    c = np.array([t.exec_time for t in hp], dtype=float)
    level = c_i
    while True:
        nxt = c_i + float(np.ceil(level / p) @ c)
        if nxt > d_i:
            return EXCEEDS_DEADLINE
        if nxt == level or abs(nxt - level) <= _REL_TOL * d_i:
            return nxt
        level = nxt


def rm_schedulable(ts: TaskSet) -> bool:
    """Exact rate monotonic test: every response time within its deadline."""
    if utilization(ts) > 1.0:
        return False
    order = rm_order(ts)
    periods = np.array([ts[i].period for i in order], dtype=float)
    execs = np.array([ts[i].exec_time for i in order], dtype=float)
    deadlines = np.array([ts[i].deadline for i in order], dtype=float)
    return _rta_all(periods, execs, deadlines)


def _rta_all(periods: np.ndarray, execs: np.ndarray, deadlines: np.ndarray) -> bool:
    """Vectorized fixed-point iteration over all tasks at once.

    Arrays must already be in priority order (highest first). Interference
    on task i comes from tasks j < i via the strict lower triangle.
    """
    n = periods.size
    if np.any(execs > deadlines):
        return False
    mask = np.tril(np.ones((n, n), dtype=bool), k=-1)
    level = execs.copy()
    active = np.ones(n, dtype=bool)
    while np.any(active):
        jobs = np.ceil(level[active, None] / periods[None, :])
        interf = (jobs * execs[None, :] * mask[active]).sum(axis=1)
        nxt = execs[active] + interf
        if np.any(nxt > deadlines[active]):
            return False
        done = (nxt == level[active]) | (
            np.abs(nxt - level[active]) <= _REL_TOL * deadlines[active]
        )
        level[active] = nxt
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return True


def rm_schedulable_arrays(periods: np.ndarray, execs: np.ndarray) -> bool:
    """rm_schedulable on raw arrays with implicit deadlines (fast path)."""
    if (execs / periods).sum() > 1.0:
        return False
    order = np.argsort(periods, kind="stable")
    p = periods[order].astype(float)
    c = execs[order].astype(float)
    return _rta_all(p, c, p.copy())


def ll_bound(n: int) -> float:
    """Liu-Layland sufficient utilization bound n * (2^(1/n) - 1)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    return n * (2.0 ** (1.0 / n) - 1.0)


def _to_quanta(ts: TaskSet, max_denominator: int = 10_000) -> tuple[list[int], list[int], int]:
    """Scale exec times and periods to a common integer quantum.

    Returns (periods, execs) in quanta plus the scale factor. Exec times are
    converted through Fraction with a bounded denominator, so inputs should
    be on a modest rational grid.
    """
    fracs = [Fraction(t.exec_time).limit_denominator(max_denominator) for t in ts]
    scale = 1
    for f in fracs:
        scale = scale * f.denominator // math.gcd(scale, f.denominator)
    periods = [t.period * scale for t in ts]
    execs = [int(f * scale) for f in fracs]
    return periods, execs, scale


def brute_force_schedulable(ts: TaskSet, max_quanta: int = 1_000_000) -> bool:
    """Schedulability oracle: simulate one hyperperiod from synchronous release.

    Preemptive fixed-priority (RM order) event-driven simulation in integer
    quanta. Independent of the response-time analysis. Refuses instances
    whose hyperperiod exceeds max_quanta after scaling.
    """
    if utilization(ts) > 1.0:
        return False
    order = rm_order(ts)
    periods_q, execs_q, _ = _to_quanta(ts)
    periods = [periods_q[i] for i in order]
    execs = [execs_q[i] for i in order]
    n = len(periods)
    if any(c == 0 for c in execs):
        raise ValueError("exec time rounded to zero quanta; raise max_denominator")
    hyper = periods[0]
    for p in periods[1:]:
        hyper = hyper * p // math.gcd(hyper, p)
        if hyper > max_quanta:
            raise ValueError(
                f"hyperperiod exceeds {max_quanta} quanta; shrink the instance"
            )

    # remaining[i]: work left for the current job of priority level i,
    # deadline[i]: its absolute deadline (implicit = next release).
    remaining = list(execs)
    deadline = list(periods)
    next_release = list(periods)
    now = 0
    while now < hyper:
        run = next((i for i in range(n) if remaining[i] > 0), None)
        horizon = min(next_release)
        if run is None:
            now = horizon
        else:
            # run until completion, deadline, or a (possibly preempting) release
            step = min(remaining[run], horizon - now)
            if now + step > deadline[run]:
                return False
            remaining[run] -= step
            now += step
            if remaining[run] > 0 and now == deadline[run]:
                return False
        for i in range(n):
            if next_release[i] == now:
                if remaining[i] > 0:
                    return False
                if now < hyper:  # no fresh releases at the boundary
                    remaining[i] = execs[i]
                    deadline[i] = now + periods[i]
                    next_release[i] = now + periods[i]
    # all deadlines coincide with the hyperperiod boundary
    return all(r == 0 for r in remaining)
