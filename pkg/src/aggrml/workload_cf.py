"""User-based collaborative-filtering workload.

Map side: per active user, every neighborhood source (aggregated user or
original user) is emitted with its Pearson weight and, per target item it
rated, the weighted deviation w(u,v) * (r_vi - mean_v). Bucket
correlation is the Pearson weight of the aggregated user. Reduce side:
sum deviations and absolute weights per item and apply the weighted-mean
prediction around the active user's mean rating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import RatingMatrix
from .lsh_aggregate import AggregatedUser, BucketIndex

# source keys: ("a", bucket_id) for aggregated users, ("o", user_id) originals
SourceKey = tuple[str, int]


def pearson_weight(u_ratings: dict[int, float], v_ratings: dict[int, float]) -> float:
    """Pearson correlation over co-rated items only.

    Returns 0 for fewer than 2 co-rated items or zero variance on either side.
    """
    common = sorted(set(u_ratings) & set(v_ratings))
    if len(common) < 2:
        return 0.0
    x = np.array([u_ratings[i] for i in common])
    y = np.array([v_ratings[i] for i in common])
    xd = x - x.mean()
    yd = y - y.mean()
    denom = math.sqrt(float(xd @ xd) * float(yd @ yd))
    if denom == 0:
        return 0.0
    return float(xd @ yd) / denom


@dataclass
class WeightedContribution:
    """One source's emission: weight plus per-item weighted deviations."""

    source: SourceKey
    weight: float
    deviations: dict[int, float]      # target item -> w * (r_vi - mean_v)

    @property
    def abs_weight(self) -> float:
        return abs(self.weight)

    @property
    def n_fields(self) -> int:
        # fixed-width source tag+id+weight, then (item, deviation) pairs
        return 3 + 2 * len(self.deviations)


def cf_predict(user_mean: float, contributions: list[WeightedContribution],
               item: int) -> float:
    """Weighted-mean prediction around the active user's mean rating."""
    num = 0.0
    den = 0.0
    for c in contributions:
        if item in c.deviations:
            num += c.deviations[item]
            den += c.abs_weight
    if den == 0:
        return user_mean
    return user_mean + num / den


class CfMapTask:
    """One partition's map-side state for the approximate pipeline."""

    def __init__(self, agg_users: list[AggregatedUser], index: BucketIndex,
                 member_global_ids: dict[int, list[int]], matrix: RatingMatrix):
        self.agg_users = {a.bucket_id: a for a in agg_users}
        self.index = index
        self.member_global_ids = member_global_ids
        self.matrix = matrix
        self.bucket_sizes = {b: len(ids) for b, ids in index.members.items()}

    def init_output(self, query):
        active_user, target_items = query
        u_ratings = self.matrix.by_user[active_user]
        contributions = []
        correlations = {}
        for bid, agg in self.agg_users.items():
            w = pearson_weight(u_ratings, agg.ratings)
            correlations[bid] = w
            devs = {i: w * (agg.ratings[i] - agg.mean_rating)
                    for i in target_items if i in agg.ratings}
            contributions.append(WeightedContribution(("a", bid), w, devs))
        return contributions, correlations

    def refine(self, contributions, bucket_id: int, query):
        active_user, target_items = query
        u_ratings = self.matrix.by_user[active_user]
        kept = [c for c in contributions if c.source != ("a", bucket_id)]
        for v in self.member_global_ids[bucket_id]:
            if v == active_user:
                continue
            v_ratings = self.matrix.by_user[v]
            w = pearson_weight(u_ratings, v_ratings)
            v_mean = float(self.matrix.user_means[v])
            devs = {i: w * (v_ratings[i] - v_mean)
                    for i in target_items if i in v_ratings}
            kept.append(WeightedContribution(("o", v), w, devs))
        return kept

    def finalize(self, contributions, query):
        return contributions


class CfExactTask:
    """Exact map side: every original user in the partition contributes."""

    def __init__(self, user_ids: list[int], matrix: RatingMatrix):
        self.user_ids = user_ids
        self.matrix = matrix

    def contributions(self, query) -> list[WeightedContribution]:
        active_user, target_items = query
        u_ratings = self.matrix.by_user[active_user]
        out = []
        for v in self.user_ids:
            if v == active_user:
                continue
            v_ratings = self.matrix.by_user[v]
            w = pearson_weight(u_ratings, v_ratings)
            v_mean = float(self.matrix.user_means[v])
            devs = {i: w * (v_ratings[i] - v_mean)
                    for i in target_items if i in v_ratings}
            out.append(WeightedContribution(("o", v), w, devs))
        return out


def cf_reduce(per_task_contributions: list[list[WeightedContribution]],
              user_mean: float, target_items: list[int]) -> dict[int, float]:
    """Merge task emissions and predict each target item (unclamped)."""
    merged = [c for contribs in per_task_contributions for c in contribs]
    return {i: cf_predict(user_mean, merged, i) for i in target_items}


def rmse(predictions: list[float], actuals: list[float]) -> float:
    if not predictions or len(predictions) != len(actuals):
        raise ValueError("prediction/actual length mismatch or empty")
    p = np.asarray(predictions)
    a = np.asarray(actuals)
    return float(np.sqrt(((p - a) ** 2).mean()))
