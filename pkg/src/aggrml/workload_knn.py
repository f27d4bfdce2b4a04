"""kNN classification workload.

Map side: per test point, keep the k nearest candidates; bucket
correlation is the negative distance to the bucket's aggregated point.
Aggregated candidates vote with the majority label of their members until
refinement replaces them with the bucket's originals. Reduce side: merge
per-task candidate lists into the global top k and take a majority vote.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .lsh_aggregate import BucketBuild, majority_labels


@dataclass(frozen=True)
class NeighborCandidate:
    distance: float
    point_id: int          # global original id, or bucket id if aggregated
    label: str
    is_aggregated: bool = False

    @property
    def sort_key(self):
        # distance ties keep the lower point id; originals before aggregates
        return (self.distance, self.is_aggregated, self.point_id)


def _dists(points: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.sqrt(((points - q) ** 2).sum(axis=1))


def trim(candidates: list[NeighborCandidate], k_nn: int) -> list[NeighborCandidate]:
    return sorted(candidates, key=lambda c: c.sort_key)[:k_nn]


class KnnMapTask:
    """One partition's map-side state for the approximate pipeline."""

    def __init__(self, build: BucketBuild, features: np.ndarray,
                 labels: tuple[str, ...], global_ids: np.ndarray, k_nn: int):
        self.build = build
        self.features = features            # partition-local originals
        self.labels = labels
        self.global_ids = global_ids
        self.k_nn = k_nn
        self.agg_features = build.agg_features
        self.bucket_labels = majority_labels(build.index, labels)
        self.bucket_sizes = {b: len(ids) for b, ids in build.index.members.items()}

    def init_output(self, q: np.ndarray):
        dists = _dists(self.agg_features, q)
        correlations = {a.bucket_id: -float(d)
                        for a, d in zip(self.build.aggregated, dists)}
        candidates = [
            NeighborCandidate(float(d), a.bucket_id, self.bucket_labels[a.bucket_id],
                              is_aggregated=True)
            for a, d in zip(self.build.aggregated, dists)
        ]
        return trim(candidates, self.k_nn), correlations

    def refine(self, candidates: list[NeighborCandidate], bucket_id: int,
               q: np.ndarray) -> list[NeighborCandidate]:
        kept = [c for c in candidates
                if not (c.is_aggregated and c.point_id == bucket_id)]
        local_ids = self.build.index.members[bucket_id]
        dists = _dists(self.features[local_ids], q)
        kept.extend(
            NeighborCandidate(float(d), int(self.global_ids[i]), self.labels[i])
            for i, d in zip(local_ids, dists))
        return trim(kept, self.k_nn)

    def finalize(self, candidates: list[NeighborCandidate], q) -> list[NeighborCandidate]:
        return candidates


class KnnExactTask:
    """Exact map side: scan every original point in the partition."""

    def __init__(self, features: np.ndarray, labels: tuple[str, ...],
                 global_ids: np.ndarray, k_nn: int):
        self.features = features
        self.labels = labels
        self.global_ids = global_ids
        self.k_nn = k_nn

    def candidates(self, q: np.ndarray) -> list[NeighborCandidate]:
        dists = _dists(self.features, q)
        cands = [NeighborCandidate(float(d), int(g), lbl)
                 for d, g, lbl in zip(dists, self.global_ids, self.labels)]
        return trim(cands, self.k_nn)


def knn_reduce(per_task_candidates: list[list[NeighborCandidate]],
               k_nn: int) -> str:
    """Merge task candidate lists to the global top k and majority-vote.

    Vote ties break by smallest summed distance, then lexicographic label.
    """
    merged = [c for cands in per_task_candidates for c in cands]
    if not merged:
        raise ValueError("no candidates to reduce")
    top = trim(merged, k_nn)
    votes = Counter(c.label for c in top)
    dist_sum: dict[str, float] = defaultdict(float)
    for c in top:
        dist_sum[c.label] += c.distance
    best = max(votes.values())
    tied = [lbl for lbl, v in votes.items() if v == best]
    return min(tied, key=lambda lbl: (dist_sum[lbl], lbl))


def classification_accuracy(predicted: list[str], actual: list[str]) -> float:
    if not predicted or len(predicted) != len(actual):
        raise ValueError("prediction/actual length mismatch or empty")
    return sum(p == a for p, a in zip(predicted, actual)) / len(predicted)
