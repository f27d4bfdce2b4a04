import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aggrml.engine import make_plan, run_map_task


def test_plan_cutoff_tenth():
    plan = make_plan({i: float(-i) for i in range(10)}, 0.1)
    assert plan.cutoff == 1


def test_plan_cutoff_ceil_of_half():
    plan = make_plan({i: float(-i) for i in range(10)}, 0.05)
    assert plan.cutoff == 1


def test_plan_zero_epsilon_zero_cutoff():
    plan = make_plan({i: 1.0 for i in range(10)}, 0.0)
    assert plan.cutoff == 0
    assert plan.to_refine == ()


def test_plan_full_epsilon_covers_all():
    plan = make_plan({i: float(i) for i in range(7)}, 1.0)
    assert plan.cutoff == 7
    assert sorted(plan.ranked) == list(range(7))


def test_plan_descending_correlation_order():
    plan = make_plan({1: 0.9, 2: 0.1, 3: 0.5}, 1.0)
    assert plan.ranked == (1, 3, 2)


def test_plan_equal_correlations_ascending_ids():
    plan = make_plan({5: 0.3, 1: 0.3, 3: 0.3}, 1.0)
    assert plan.ranked == (1, 3, 5)


def test_plan_rejects_nan():
    with pytest.raises(ValueError, match="non-finite"):
        make_plan({0: float("nan")}, 0.5)


def test_plan_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        make_plan({0: 1.0}, 1.5)


@settings(max_examples=50)
@given(st.dictionaries(st.integers(0, 50), st.floats(-1, 1, allow_nan=False),
                       min_size=1, max_size=20),
       st.floats(0, 1, allow_nan=False))
def test_plan_permutation_of_ids_and_cutoff_bound(corrs, eps):
    plan = make_plan(corrs, eps)
    assert sorted(plan.ranked) == sorted(corrs)
    expected = 0 if eps == 0 else math.ceil(len(corrs) * eps)
    assert plan.cutoff == expected


@settings(max_examples=30)
@given(st.lists(st.tuples(st.integers(0, 99), st.floats(-1, 1, allow_nan=False)),
                min_size=1, max_size=20, unique_by=lambda t: t[0]),
       st.floats(0, 1, allow_nan=False))
def test_plan_invariant_under_input_order(pairs, eps):
    forward = make_plan(dict(pairs), eps)
    backward = make_plan(dict(reversed(pairs)), eps)
    assert forward == backward


class CountingWorkload:
    """Records which buckets get refined; output is the refined-bucket list."""

    def __init__(self, correlations, fail_nan=False):
        self.correlations = correlations
        self.fail_nan = fail_nan

    def init_output(self, query):
        corrs = dict(self.correlations)
        if self.fail_nan:
            corrs[0] = float("nan")
        return [], corrs

    def refine(self, output, bucket_id, query):
        return output + [bucket_id]

    def finalize(self, output, query):
        return list(output)


def test_run_map_task_refines_in_rank_order():
    wl = CountingWorkload({1: 0.9, 2: 0.1, 3: 0.5})
    sizes = {1: 4, 2: 4, 3: 4}
    res = run_map_task(wl, [("q", None)], sizes, epsilon_max=1.0)
    assert res.records["q"] == [1, 3, 2]
    assert res.originals_refined == 12
    assert res.aggregated_processed == 3


def test_run_map_task_epsilon_zero_touches_nothing():
    wl = CountingWorkload({i: float(i) for i in range(6)})
    res = run_map_task(wl, [("q", None)], {i: 10 for i in range(6)}, 0.0)
    assert res.records["q"] == []
    assert res.originals_refined == 0


def test_run_map_task_nan_correlation_errors():
    wl = CountingWorkload({0: 1.0, 1: 0.5}, fail_nan=True)
    with pytest.raises(ValueError, match="non-finite"):
        run_map_task(wl, [("q", None)], {0: 1, 1: 1}, 0.5)


def test_run_map_task_mismatched_buckets_errors():
    wl = CountingWorkload({0: 1.0})
    with pytest.raises(ValueError, match="bucket ids"):
        run_map_task(wl, [("q", None)], {0: 1, 1: 1}, 0.5)


def test_touch_count_monotone_in_epsilon():
    sizes = {i: 3 + (i % 4) for i in range(20)}
    wl = CountingWorkload({i: np.sin(i * 1.7) for i in range(20)})
    touched = [run_map_task(wl, [("q", None)], sizes, e).originals_refined
               for e in np.linspace(0, 1, 21)]
    assert all(a <= b for a, b in zip(touched, touched[1:]))


def test_work_bound():
    sizes = {i: 2 + (i % 5) for i in range(17)}
    wl = CountingWorkload({i: float(-i) for i in range(17)})
    for eps in (0.0, 0.05, 0.3, 0.77, 1.0):
        res = run_map_task(wl, [("q", None)], sizes, eps)
        bound = math.ceil(17 * eps) * max(sizes.values())
        assert res.originals_refined <= bound
