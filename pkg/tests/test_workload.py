import math

import numpy as np
import pytest

from sharpsched import workload as wl
from sharpsched import analysis as an


def rng(seed=0):
    return np.random.default_rng(seed)


class TestTaskModel:
    def test_single_task_utilization(self):
        ts = wl.TaskSet((wl.Task(period=10, exec_time=5.0),))
        assert wl.utilization(ts) == 0.5

    def test_two_task_utilization_fig2(self):
        ts = wl.TaskSet((wl.Task(10, 8.0), wl.Task(18, 3.06)))
        assert wl.utilization(ts) == pytest.approx(0.97, rel=1e-12)

    def test_harmonic_pair(self):
        ts = wl.TaskSet((wl.Task(2, 1.0), wl.Task(3, 1.0)))
        assert wl.utilization(ts) == pytest.approx(5.0 / 6.0, rel=1e-12)

    def test_invalid_task_rejected(self):
        with pytest.raises(ValueError):
            wl.Task(period=0, exec_time=1.0)
        with pytest.raises(ValueError):
            wl.Task(period=5, exec_time=-1.0)
        with pytest.raises(ValueError):
            wl.Task(period=5, exec_time=6.0)

    def test_empty_taskset_rejected(self):
        with pytest.raises(ValueError):
            wl.TaskSet(())


class TestUUniSort:
    def test_single_task_forced(self):
        assert wl.gen_uunisort(1, 0.5, rng()) == [0.5]

    def test_sum_constraint(self):
        u = wl.gen_uunisort(4, 0.8, rng(3))
        assert len(u) == 4
        assert sum(u) == pytest.approx(0.8, abs=1e-9)
        assert all(x >= 0 for x in u)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            wl.gen_uunisort(0, 0.5, rng())
        with pytest.raises(ValueError):
            wl.gen_uunisort(4, 5.0, rng())

    def test_per_index_mean_symmetry(self):
        # simplex symmetry: each component has mean U/n
        u = wl.gen_uunisort_batch(4, 0.8, 100_000, rng(7))
        means = u.mean(axis=0)
        assert np.all(np.abs(means - 0.2) < 0.005)

    def test_batch_matches_scalar_contract(self):
        batch = wl.gen_uunisort_batch(6, 0.9, 500, rng(1))
        assert batch.shape == (500, 6)
        assert np.allclose(batch.sum(axis=1), 0.9, atol=1e-9)

    def test_reproducible(self):
        a = wl.gen_uunisort(8, 0.7, rng(42))
        b = wl.gen_uunisort(8, 0.7, rng(42))
        assert a == b


class TestEqualSplit:
    def test_basic(self):
        assert wl.gen_equal_split(4, 0.8) == pytest.approx([0.2] * 4)

    def test_boundary(self):
        assert wl.gen_equal_split(2, 2.0) == [1.0, 1.0]

    def test_eight_way(self):
        assert wl.gen_equal_split(8, 0.9) == pytest.approx([0.1125] * 8)

    def test_over_capacity(self):
        with pytest.raises(ValueError):
            wl.gen_equal_split(2, 2.5)


class TestPeriods:
    def test_degenerate_range(self):
        assert wl.gen_periods(3, 5, 5, rng()) == [5, 5, 5]

    def test_uniform_mean(self):
        p = wl.gen_periods(100_000, 1, 100_000, rng(5))
        assert np.mean(p) == pytest.approx((1 + 100_000) / 2, rel=0.01)

    def test_bad_range(self):
        with pytest.raises(ValueError):
            wl.gen_periods(3, 9, 5, rng())

    def test_restricted_singleton(self):
        assert wl.gen_periods_from_set(1, {7}, rng()) == [7]

    def test_restricted_membership(self):
        allowed = {3, 8, 11, 16, 20, 42, 120, 300}
        p = wl.gen_periods_from_set(8, allowed, rng(2))
        assert all(x in allowed for x in p)

    def test_restricted_uniform_frequency(self):
        allowed = (3, 8, 11, 16, 20, 42, 120, 300)
        p = wl.gen_periods_from_set(100_000, allowed, rng(4))
        counts = {a: 0 for a in allowed}
        for x in p:
            counts[x] += 1
        for a in allowed:
            assert counts[a] / 100_000 == pytest.approx(1 / 8, abs=0.01)

    def test_empty_set(self):
        with pytest.raises(ValueError):
            wl.gen_periods_from_set(3, set(), rng())


class TestAssemble:
    def test_basic(self):
        ts = wl.assemble_taskset([0.5], [10])
        assert ts[0].period == 10 and ts[0].exec_time == 5.0

    def test_fig2_set(self):
        ts = wl.assemble_taskset([0.8, 0.17], [10, 18])
        assert ts[0].exec_time == pytest.approx(8.0)
        assert ts[1].exec_time == pytest.approx(3.06)

    def test_harmonic(self):
        ts = wl.assemble_taskset([0.5, 1 / 3], [2, 3])
        assert [t.exec_time for t in ts] == pytest.approx([1.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            wl.assemble_taskset([0.5], [2, 3])

    def test_util_out_of_range(self):
        with pytest.raises(ValueError):
            wl.assemble_taskset([1.5], [10])

    def test_total_utilization_preserved(self):
        u = wl.gen_uunisort(16, 0.85, rng(9))
        p = wl.gen_periods(16, 1, 100_000, rng(9))
        ts = wl.assemble_taskset(u, p)
        assert wl.utilization(ts) == pytest.approx(0.85, abs=1e-9)


class TestBarelySchedulable:
    def test_pair_2_3(self):
        ts = wl.gen_barely_schedulable([2, 3])
        assert [(t.period, t.exec_time) for t in ts] == [(2, 1.0), (3, 1.0)]
        assert wl.utilization(ts) == pytest.approx(5 / 6)

    def test_pair_10_18(self):
        ts = wl.gen_barely_schedulable([10, 18])
        assert [(t.period, t.exec_time) for t in ts] == [(10, 8.0), (18, 2.0)]
        assert wl.utilization(ts) == pytest.approx(0.8 + 2 / 18)

    def test_not_strictly_increasing(self):
        with pytest.raises(ValueError):
            wl.gen_barely_schedulable([5, 5])

    def test_too_wide(self):
        with pytest.raises(ValueError):
            wl.gen_barely_schedulable([5, 7, 10])

    @pytest.mark.parametrize("periods", [[2, 3], [10, 18], [3, 4, 5], [9, 10, 11]])
    def test_barely_property(self, periods):
        # schedulable as built; bumping any exec time breaks it
        ts = wl.gen_barely_schedulable(periods)
        assert an.rm_schedulable(ts)
        eps = 1e-6 * periods[0]
        for i in range(ts.n):
            tasks = list(ts.tasks)
            tasks[i] = wl.Task(tasks[i].period, tasks[i].exec_time + eps)
            assert not an.rm_schedulable(wl.TaskSet(tuple(tasks)))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        ts = wl.TaskSet((wl.Task(10, 8.0), wl.Task(18, 3.06)))
        path = tmp_path / "ts.txt"
        wl.save_taskset(ts, path)
        back = wl.load_taskset(path)
        assert [(t.period, t.exec_time, t.deadline) for t in back] == [
            (t.period, t.exec_time, t.deadline) for t in ts
        ]

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "ts.txt"
        path.write_text("# header\n\n10 5.0  # trailing comment\n3 1.0 2.5\n")
        ts = wl.load_taskset(path)
        assert ts.n == 2
        assert ts[1].deadline == 2.5

    def test_bad_field_count(self, tmp_path):
        path = tmp_path / "ts.txt"
        path.write_text("10\n")
        with pytest.raises(ValueError):
            wl.load_taskset(path)

    def test_csv_rows(self):
        ts = wl.TaskSet((wl.Task(10, 5.0),))
        rows = wl.taskset_csv_rows(ts)
        assert rows == [
            {"index": 0, "period": 10, "exec_time": 5.0, "deadline": 10.0,
             "utilization": 0.5}
        ]
