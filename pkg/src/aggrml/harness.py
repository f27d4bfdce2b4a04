"""Partitioned execution driver with cost accounting.

Runs the exact, aggregation-based, and random-sampling pipelines over m
map tasks, counts touched points and shuffle records/bytes, and merges
task outputs through the workload reducers.

Time columns in the report CSV are deterministic cost-model times derived
from operation counts (1e-3 ms per touched-point operation), so repeated
runs with one seed produce byte-identical reports. Measured wall-clock
times per phase are kept on the job result and written to a separate
sidecar file by the CLI.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import DenseDataset, RatingMatrix, make_partitions
from .engine import run_map_task
from .errors import ConfigError
from .lsh_aggregate import build_buckets, build_user_buckets
from .workload_cf import CfExactTask, CfMapTask, cf_reduce, rmse
from .workload_knn import KnnExactTask, KnnMapTask, classification_accuracy, knn_reduce

PIPELINES = ("exact", "accurateml", "sampling")
MS_PER_OP = 1e-3          # cost-model scale for deterministic report times

CSV_HEADER = ("workload,pipeline,ratio,epsilon,seed,partitions,touched_points,"
              "shuffle_records,shuffle_bytes,t_group_ms,t_agg_ms,t_init_ms,"
              "t_refine_ms,t_total_ms,accuracy,accuracy_loss_pct")


@dataclass
class JobConfig:
    workload: str = "knn"             # knn | cf
    pipeline: str = "exact"           # exact | accurateml | sampling
    ratio: float = 10.0
    epsilon: float = 0.0
    seed: int = 0
    partitions: int = 4
    k_nn: int = 5
    test_fraction: float | None = None    # default 0.005 (knn) / 0.2 (cf)
    active_users: int = 100
    sampling_fraction: float | None = None
    threads: int = 1
    include_build_in_budget: bool = False

    def validate(self):
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline: {self.pipeline}")
        if self.workload not in ("knn", "cf"):
            raise ConfigError(f"unknown workload: {self.workload}")
        if self.ratio < 1:
            raise ConfigError("ratio must be >= 1")
        if not (0 <= self.epsilon <= 1):
            raise ConfigError("epsilon must lie in [0, 1]")
        if self.sampling_fraction is not None and not (0 < self.sampling_fraction <= 1):
            raise ConfigError("sampling fraction must lie in (0, 1]")
        if self.partitions < 1:
            raise ConfigError("partitions must be >= 1")

    @property
    def effective_test_fraction(self) -> float:
        if self.test_fraction is not None:
            return self.test_fraction
        return 0.005 if self.workload == "knn" else 0.2


@dataclass
class JobResult:
    config: JobConfig
    accuracy: float                   # classification accuracy or RMSE
    predictions: dict                 # query id -> label / {item: rating}
    touched_points: int
    shuffle_records: int
    shuffle_bytes: int
    build_ops: int                    # grouping + aggregation touched-point ops
    exact_compute_ops: int            # distance/weight ops of the exact pipeline
    op_counts: dict = field(default_factory=dict)   # per-phase op counts
    wall_times_s: dict = field(default_factory=dict)
    accuracy_loss_pct: float | None = None
    unclamped_predictions: dict | None = None

    def report_row(self) -> str:
        c = self.config
        ops = self.op_counts
        t = {k: ops.get(k, 0) * MS_PER_OP for k in ("group", "agg", "init", "refine")}
        t_total = sum(t.values())
        loss = "" if self.accuracy_loss_pct is None else repr(self.accuracy_loss_pct)
        return (f"{c.workload},{c.pipeline},{c.ratio!r},{c.epsilon!r},{c.seed},"
                f"{c.partitions},{self.touched_points},{self.shuffle_records},"
                f"{self.shuffle_bytes},{t['group']!r},{t['agg']!r},{t['init']!r},"
                f"{t['refine']!r},{t_total!r},{self.accuracy!r},{loss}")


def accuracy_loss_pct(workload: str, exact: float, approx: float) -> float:
    """Percentage accuracy degradation relative to the exact result.

    kNN: decreased classification accuracy; CF: increased RMSE.
    """
    if exact == 0:
        raise ValueError("exact accuracy metric is zero; loss undefined")
    if workload == "knn":
        return (exact - approx) / exact * 100.0
    return (approx - exact) / exact * 100.0


# ---------------------------------------------------------------------------
# kNN job

def split_dense(dataset: DenseDataset, test_fraction: float, seed: int):
    """Deterministic held-out test split; returns (train, test) datasets."""
    n = dataset.n_points
    n_test = max(1, round(test_fraction * n))
    rng = np.random.default_rng(seed + 999331)
    test_ids = np.sort(rng.choice(n, size=n_test, replace=False))
    mask = np.ones(n, dtype=bool)
    mask[test_ids] = False
    train = DenseDataset(dataset.features[mask],
                         tuple(l for l, keep in zip(dataset.labels, mask) if keep))
    test = DenseDataset(dataset.features[test_ids],
                        tuple(dataset.labels[i] for i in test_ids))
    return train, test


def _knn_task(cfg: JobConfig, train: DenseDataset, part, queries):
    """Run one partition's map side; returns per-query candidates + counters."""
    feats = train.features[part.start:part.stop]
    labels = train.labels[part.start:part.stop]
    gids = part.ids
    counters = dict(group=0, agg=0, init=0, refine=0)
    walls = dict(group=0.0, agg=0.0, init=0.0, refine=0.0)
    records: dict[int, list] = {}

    if cfg.pipeline == "accurateml":
        t0 = time.perf_counter()
        build = build_buckets(feats, min(cfg.ratio, len(feats)), seed=cfg.seed + 1000 * part.pid)
        walls["group"] = walls["agg"] = (time.perf_counter() - t0) / 2
        counters["group"] = build.hash_ops
        counters["agg"] = build.agg_ops
        task = KnnMapTask(build, feats, labels, gids, cfg.k_nn)
        t0 = time.perf_counter()
        result = run_map_task(task, queries, task.bucket_sizes, cfg.epsilon)
        walls["init"] = time.perf_counter() - t0
        counters["init"] = result.aggregated_processed
        counters["refine"] = result.originals_refined
        records = result.records
    else:
        if cfg.pipeline == "sampling":
            frac = cfg.sampling_fraction
            if frac is None:
                raise ConfigError("sampling pipeline requires a sampling fraction")
            rng = np.random.default_rng(cfg.seed + 7777 + part.pid)
            size = round(frac * len(part))
            keep = np.sort(rng.choice(len(part), size=size, replace=False))
            feats, gids = feats[keep], gids[keep]
            labels = tuple(labels[i] for i in keep)
        task = KnnExactTask(feats, labels, gids, cfg.k_nn)
        t0 = time.perf_counter()
        for qid, q in queries:
            records[qid] = task.candidates(q)
            counters["init"] += len(feats)
        walls["init"] = time.perf_counter() - t0
    return records, counters, walls


def run_knn_job(cfg: JobConfig, dataset: DenseDataset) -> JobResult:
    cfg.validate()
    if dataset.labels is None:
        raise ConfigError("kNN needs labeled data")
    train, test = split_dense(dataset, cfg.effective_test_fraction, cfg.seed)
    parts = make_partitions(train.n_points, cfg.partitions)
    queries = [(qid, test.features[qid]) for qid in range(test.n_points)]

    def work(part):
        return _knn_task(cfg, train, part, queries)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            task_outs = list(pool.map(work, parts))
    else:
        task_outs = [work(p) for p in parts]

    counters = {k: sum(c[k] for _, c, _ in task_outs) for k in ("group", "agg", "init", "refine")}
    walls = {k: sum(w[k] for _, _, w in task_outs) for k in ("group", "agg", "init", "refine")}
    predictions = {}
    shuffle_records = 0
    for qid, _ in queries:
        per_task = [recs[qid] for recs, _, _ in task_outs]
        shuffle_records += sum(len(c) for c in per_task)
        predictions[qid] = knn_reduce(per_task, cfg.k_nn)
    accuracy = classification_accuracy(
        [predictions[qid] for qid in range(test.n_points)], list(test.labels))

    touched = counters["init"] + counters["refine"]
    if cfg.include_build_in_budget:
        touched += counters["group"] + counters["agg"]
    return JobResult(
        config=cfg, accuracy=accuracy, predictions=predictions,
        touched_points=touched, shuffle_records=shuffle_records,
        shuffle_bytes=shuffle_records * 32,
        build_ops=counters["group"] + counters["agg"],
        exact_compute_ops=train.n_points * len(queries),
        op_counts=counters, wall_times_s=walls)


# ---------------------------------------------------------------------------
# CF job

def split_ratings(matrix: RatingMatrix, active_users: int, test_fraction: float,
                  seed: int):
    """Hold out a fraction of each active user's items as the test set.

    Returns (training matrix, {user: {item: actual rating}}).
    """
    rng = np.random.default_rng(seed + 424243)
    n_active = min(active_users, matrix.n_users)
    actives = np.sort(rng.choice(matrix.n_users, size=n_active, replace=False))
    by_user = [dict(r) for r in matrix.by_user]
    heldout: dict[int, dict[int, float]] = {}
    for u in actives:
        items = sorted(by_user[u])
        n_test = max(1, round(test_fraction * len(items)))
        if n_test >= len(items):
            n_test = len(items) - 1
        if n_test < 1:
            continue
        test_items = rng.choice(items, size=n_test, replace=False)
        heldout[int(u)] = {int(i): by_user[u].pop(int(i)) for i in test_items}
    train = RatingMatrix(matrix.n_users, matrix.n_items, by_user)
    return train, heldout


def _cf_task(cfg: JobConfig, train: RatingMatrix, part, queries):
    user_ids = list(range(part.start, part.stop))
    counters = dict(group=0, agg=0, init=0, refine=0)
    walls = dict(group=0.0, agg=0.0, init=0.0, refine=0.0)
    records: dict[int, list] = {}

    if cfg.pipeline == "accurateml":
        sub = RatingMatrix(len(user_ids), train.n_items,
                           [train.by_user[u] for u in user_ids])
        t0 = time.perf_counter()
        agg_users, index, hash_ops = build_user_buckets(
            sub, min(cfg.ratio, len(user_ids)), seed=cfg.seed + 1000 * part.pid)
        walls["group"] = walls["agg"] = (time.perf_counter() - t0) / 2
        counters["group"] = hash_ops
        counters["agg"] = len(user_ids)
        member_gids = {b: [part.start + u for u in ids] for b, ids in index.members.items()}
        task = CfMapTask(agg_users, index, member_gids, train)
        t0 = time.perf_counter()
        result = run_map_task(task, queries, task.bucket_sizes, cfg.epsilon)
        walls["init"] = time.perf_counter() - t0
        counters["init"] = result.aggregated_processed
        counters["refine"] = result.originals_refined
        records = result.records
    else:
        if cfg.pipeline == "sampling":
            frac = cfg.sampling_fraction
            if frac is None:
                raise ConfigError("sampling pipeline requires a sampling fraction")
            rng = np.random.default_rng(cfg.seed + 7777 + part.pid)
            size = round(frac * len(user_ids))
            user_ids = sorted(int(user_ids[i]) for i in
                              rng.choice(len(user_ids), size=size, replace=False))
        task = CfExactTask(user_ids, train)
        t0 = time.perf_counter()
        for qid, q in queries:
            records[qid] = task.contributions(q)
            counters["init"] += len(user_ids)
        walls["init"] = time.perf_counter() - t0
    return records, counters, walls


def run_cf_job(cfg: JobConfig, matrix: RatingMatrix) -> JobResult:
    cfg.validate()
    train, heldout = split_ratings(matrix, cfg.active_users,
                                   cfg.effective_test_fraction, cfg.seed)
    if not heldout:
        raise ConfigError("no active user has enough ratings to hold out a test set")
    lo, hi = matrix.rating_bounds()
    parts = make_partitions(matrix.n_users, cfg.partitions)
    queries = [(u, (u, sorted(items))) for u, items in sorted(heldout.items())]

    def work(part):
        return _cf_task(cfg, train, part, queries)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            task_outs = list(pool.map(work, parts))
    else:
        task_outs = [work(p) for p in parts]

    counters = {k: sum(c[k] for _, c, _ in task_outs) for k in ("group", "agg", "init", "refine")}
    walls = {k: sum(w[k] for _, _, w in task_outs) for k in ("group", "agg", "init", "refine")}
    predictions: dict[int, dict[int, float]] = {}
    unclamped: dict[int, dict[int, float]] = {}
    shuffle_records = 0
    shuffle_bytes = 0
    pred_list, actual_list = [], []
    for u, (u2, target_items) in queries:
        per_task = [recs[u] for recs, _, _ in task_outs]
        for contribs in per_task:
            shuffle_records += len(contribs)
            shuffle_bytes += 8 * sum(c.n_fields for c in contribs)
        raw = cf_reduce(per_task, float(train.user_means[u]), target_items)
        unclamped[u] = raw
        predictions[u] = {i: min(max(p, lo), hi) for i, p in raw.items()}
        for i in target_items:
            pred_list.append(predictions[u][i])
            actual_list.append(heldout[u][i])
    accuracy = rmse(pred_list, actual_list)

    touched = counters["init"] + counters["refine"]
    if cfg.include_build_in_budget:
        touched += counters["group"] + counters["agg"]
    return JobResult(
        config=cfg, accuracy=accuracy, predictions=predictions,
        unclamped_predictions=unclamped,
        touched_points=touched, shuffle_records=shuffle_records,
        shuffle_bytes=shuffle_bytes,
        build_ops=counters["group"] + counters["agg"],
        exact_compute_ops=matrix.n_users * len(queries),
        op_counts=counters, wall_times_s=walls)


# ---------------------------------------------------------------------------
# Job entry points

def run_job(cfg: JobConfig, data) -> JobResult:
    """Dispatch on workload; `data` is a DenseDataset (knn) or RatingMatrix (cf)."""
    cfg.validate()
    if cfg.workload == "knn":
        return run_knn_job(cfg, data)
    return run_cf_job(cfg, data)


def match_budget(accurateml_result: JobResult) -> float:
    """Sampling fraction whose touched-point count matches the given run's."""
    frac = accurateml_result.touched_points / accurateml_result.exact_compute_ops
    return min(1.0, frac)


def run_comparison(cfg: JobConfig, data) -> dict[str, JobResult]:
    """Exact, AccurateML, and budget-matched sampling runs with losses filled."""
    exact = run_job(replace(cfg, pipeline="exact"), data)
    exact.accuracy_loss_pct = 0.0
    aml = run_job(replace(cfg, pipeline="accurateml"), data)
    aml.accuracy_loss_pct = accuracy_loss_pct(cfg.workload, exact.accuracy, aml.accuracy)
    samp_cfg = replace(cfg, pipeline="sampling", sampling_fraction=match_budget(aml))
    samp = run_job(samp_cfg, data)
    samp.accuracy_loss_pct = accuracy_loss_pct(cfg.workload, exact.accuracy, samp.accuracy)
    return {"exact": exact, "accurateml": aml, "sampling": samp}
