from dataclasses import replace

import pytest

from aggrml.dataset import synth_clustered, synth_ratings
from aggrml.errors import ConfigError
from aggrml.harness import (JobConfig, accuracy_loss_pct, match_budget,
                            run_comparison, run_job)


@pytest.fixture(scope="module")
def dense():
    return synth_clustered(600, 6, 20, 0.4, seed=12)


@pytest.fixture(scope="module")
def ratings():
    return synth_ratings(120, 40, 0.3, seed=12)


def knn_cfg(**kw):
    base = dict(workload="knn", pipeline="exact", ratio=10, epsilon=0.05,
                seed=1, partitions=4, test_fraction=0.05)
    base.update(kw)
    return JobConfig(**base)


def test_accuracy_loss_examples():
    assert accuracy_loss_pct("knn", 0.9, 0.81) == pytest.approx(10.0)
    assert accuracy_loss_pct("knn", 0.9, 0.9) == 0.0
    assert accuracy_loss_pct("cf", 1.0, 1.1) == pytest.approx(10.0)


def test_config_validation():
    with pytest.raises(ConfigError):
        JobConfig(pipeline="magic").validate()
    with pytest.raises(ConfigError):
        JobConfig(epsilon=1.5).validate()
    with pytest.raises(ConfigError):
        JobConfig(ratio=0.5).validate()
    with pytest.raises(ConfigError):
        JobConfig(pipeline="sampling", sampling_fraction=0.0).validate()


def test_exact_vs_itself_zero_loss(dense):
    res = run_job(knn_cfg(), dense)
    assert accuracy_loss_pct("knn", res.accuracy, res.accuracy) == 0.0


def test_sampling_fraction_one_equals_exact(dense):
    exact = run_job(knn_cfg(), dense)
    samp = run_job(knn_cfg(pipeline="sampling", sampling_fraction=1.0), dense)
    assert samp.predictions == exact.predictions
    assert samp.accuracy == exact.accuracy


def test_sampling_fraction_one_equals_exact_cf(ratings):
    cfg = JobConfig(workload="cf", pipeline="exact", ratio=5, seed=2,
                    partitions=3, active_users=20)
    exact = run_job(cfg, ratings)
    samp = run_job(replace(cfg, pipeline="sampling", sampling_fraction=1.0), ratings)
    assert samp.predictions == exact.predictions


def test_match_budget_epsilon_zero_is_inverse_ratio(dense):
    aml = run_job(knn_cfg(pipeline="accurateml", epsilon=0.0), dense)
    frac = match_budget(aml)
    assert frac == pytest.approx(0.1, abs=0.02)


def test_budget_parity_within_one_rounding_per_task(dense):
    for eps in (0.0, 0.05, 0.2):
        results = run_comparison(knn_cfg(epsilon=eps), dense)
        aml, samp = results["accurateml"], results["sampling"]
        n_queries = len(aml.predictions)
        per_query_gap = abs(samp.touched_points - aml.touched_points) / n_queries
        assert per_query_gap <= aml.config.partitions


def test_epsilon_one_matches_exact_pipeline(dense, ratings):
    results = run_comparison(knn_cfg(epsilon=1.0), dense)
    assert results["accurateml"].predictions == results["exact"].predictions

    cfg = JobConfig(workload="cf", ratio=8, epsilon=1.0, seed=4,
                    partitions=3, active_users=15)
    cres = run_comparison(cfg, ratings)
    aml, exact = cres["accurateml"], cres["exact"]
    assert aml.accuracy == pytest.approx(exact.accuracy, abs=1e-9)
    for u in exact.unclamped_predictions:
        for i, p in exact.unclamped_predictions[u].items():
            assert aml.unclamped_predictions[u][i] == pytest.approx(p, abs=1e-9)


def test_exact_pipeline_invariant_to_partition_count(dense):
    accs = {m: run_job(knn_cfg(partitions=m), dense).accuracy for m in (1, 4, 16)}
    assert len(set(accs.values())) == 1


def test_knn_shuffle_is_k_records_per_query_per_task(dense):
    res = run_job(knn_cfg(pipeline="accurateml", epsilon=0.0), dense)
    n_queries = len(res.predictions)
    assert res.shuffle_records == res.config.k_nn * res.config.partitions * n_queries
    assert res.shuffle_bytes == 32 * res.shuffle_records


def test_report_row_deterministic(dense):
    r1 = run_job(knn_cfg(pipeline="accurateml"), dense).report_row()
    r2 = run_job(knn_cfg(pipeline="accurateml"), dense).report_row()
    assert r1 == r2


def test_threads_do_not_change_results(dense, ratings):
    cfg = knn_cfg(pipeline="accurateml", epsilon=0.1)
    assert (run_job(cfg, dense).report_row()
            == run_job(replace(cfg, threads=4), dense).report_row())
    ccfg = JobConfig(workload="cf", pipeline="accurateml", ratio=5, epsilon=0.1,
                     seed=2, partitions=3, active_users=15)
    assert (run_job(ccfg, ratings).report_row()
            == run_job(replace(ccfg, threads=4), ratings).report_row())


def test_monotone_touch_count_in_epsilon(dense):
    touched = [run_job(knn_cfg(pipeline="accurateml", epsilon=e), dense).touched_points
               for e in (0.0, 0.05, 0.1, 0.3, 0.7, 1.0)]
    assert all(a <= b for a, b in zip(touched, touched[1:]))


def test_sampling_requires_fraction(dense):
    with pytest.raises(ConfigError, match="fraction"):
        run_job(knn_cfg(pipeline="sampling"), dense)


def test_cf_shuffle_shrinks_with_ratio(ratings):
    cfg = JobConfig(workload="cf", pipeline="accurateml", ratio=10, epsilon=0.0,
                    seed=2, partitions=3, active_users=20)
    approx = run_job(cfg, ratings)
    exact = run_job(replace(cfg, pipeline="exact"), ratings)
    assert approx.shuffle_records <= (1 / 10 + 0.05) * exact.shuffle_records
