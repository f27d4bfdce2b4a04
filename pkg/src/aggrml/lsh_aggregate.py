"""LSH bucketing and information aggregation.

Similar points are grouped with a p-stable random-projection hash
h(d) = floor((a.d + b) / w), buckets are folded down to the count implied
by the target compression ratio, and each bucket is summarized by the
component-wise mean of its members plus an index mapping bucket ids back
to original point ids.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import RatingMatrix
from .errors import DataFormatError, IndexFormatError


def distance(d: np.ndarray, d2: np.ndarray, s: int = 2) -> float:
    """l_s norm distance between two equal-dimensional points."""
    d = np.asarray(d, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if d.shape != d2.shape:
        raise ValueError(f"dimension mismatch: {d.shape} vs {d2.shape}")
    if s < 1:
        raise ValueError("norm order must be >= 1")
    return float(np.sum(np.abs(d - d2) ** s) ** (1.0 / s))


@dataclass(frozen=True)
class LshFunction:
    """One p-stable projection hash: a ~ N(0,1)^n, b ~ U[0,w)."""

    a: np.ndarray
    b: float
    w: float

    def __post_init__(self):
        if self.w <= 0:
            raise ValueError("w must be positive")
        if not (0 <= self.b < self.w):
            raise ValueError("b must lie in [0, w)")

    @classmethod
    def draw(cls, n_dims: int, w: float, seed: int) -> "LshFunction":
        rng = np.random.default_rng(seed)
        a = rng.standard_normal(n_dims)
        b = float(rng.uniform(0, w))
        return cls(a, b, w)

    def hash_point(self, d: np.ndarray) -> int:
        d = np.asarray(d, dtype=float)
        if d.shape != self.a.shape:
            raise ValueError(f"dimension mismatch: {d.shape} vs {self.a.shape}")
        return int(math.floor((float(self.a @ d) + self.b) / self.w))

    def hash_many(self, features: np.ndarray) -> np.ndarray:
        proj = features @ self.a + self.b
        return np.floor(proj / self.w).astype(np.int64)


@dataclass(frozen=True)
class AggregatedPoint:
    """Mean summary of one bucket of original points."""

    bucket_id: int
    features: np.ndarray
    member_count: int


@dataclass
class BucketIndex:
    """Map bucket id -> sorted member point ids, with ratio bookkeeping."""

    members: dict[int, list[int]]
    compression_ratio_target: float
    compression_ratio_achieved: float

    def __post_init__(self):
        if not self.members:
            raise IndexFormatError("empty bucket index")
        seen: set[int] = set()
        for bid, ids in self.members.items():
            if not ids:
                raise IndexFormatError(f"bucket {bid} is empty")
            if seen.intersection(ids):
                raise IndexFormatError("point assigned to multiple buckets")
            seen.update(ids)

    @property
    def n_buckets(self) -> int:
        return len(self.members)

    @property
    def n_points(self) -> int:
        return sum(len(v) for v in self.members.values())


@dataclass
class BucketBuild:
    """Aggregated points + index produced by one build, with op counts."""

    aggregated: list[AggregatedPoint]
    index: BucketIndex
    hash_ops: int = 0
    agg_ops: int = 0
    lsh: LshFunction | None = None

    @property
    def agg_features(self) -> np.ndarray:
        return np.stack([a.features for a in self.aggregated])


def standardize(features: np.ndarray) -> np.ndarray:
    """Per-dimension z-score; constant dimensions are left centered."""
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std[std == 0] = 1.0
    return (features - mean) / std


def _aggregate(features: np.ndarray, members: dict[int, list[int]],
               target_ratio: float) -> BucketBuild:
    n = features.shape[0]
    index = BucketIndex(members, target_ratio, n / len(members))
    aggregated = [
        AggregatedPoint(bid, features[ids].mean(axis=0), len(ids))
        for bid, ids in sorted(members.items())
    ]
    return BucketBuild(aggregated, index, agg_ops=n)


def _fold_cells(raw: np.ndarray, n_buckets: int) -> dict[int, list[int]]:
    """Group adjacent raw-hash cells into ~n_buckets equal-count runs.

    Cells stay atomic (one cell never splits across buckets), so two
    points with equal raw hash always share a bucket.
    """
    n = len(raw)
    order = np.argsort(raw, kind="stable")
    target = n / n_buckets
    grouped: dict[int, list[int]] = defaultdict(list)
    bucket = 0
    count = 0
    prev_cell = None
    for pid in order:
        cell = raw[pid]
        if cell != prev_cell and count >= target and bucket < n_buckets - 1:
            bucket += 1
            count = 0
        grouped[bucket].append(int(pid))
        count += 1
        prev_cell = cell
    return grouped


def build_buckets(features: np.ndarray, target_ratio: float,
                  s: int = 2, seed: int = 0, max_attempts: int = 8) -> BucketBuild:
    """Bucket points by folded LSH hash and aggregate each bucket's mean.

    Raw hashes (cell width ~ 1/(4B) of the projection range, where
    B = ceil(N / target_ratio)) are folded to B buckets by grouping runs
    of adjacent cells with roughly equal point counts. An attempt that
    leaves fewer than B/2 buckets nonempty triggers a redraw with the
    next seed; after `max_attempts` the attempt whose achieved ratio is
    closest to target wins. Bucket ids are renumbered densely in
    ascending raw-hash order.
    """
    n, n_dims = features.shape
    if target_ratio < 1:
        raise ValueError("target_ratio must be >= 1")
    if target_ratio > n:
        raise ValueError(f"target_ratio {target_ratio} exceeds dataset size {n}")
    n_buckets = math.ceil(n / target_ratio)

    if n_buckets >= n:
        # ratio 1: no compression, every point its own bucket
        members = {i: [i] for i in range(n)}
        return _aggregate(features, members, target_ratio)

    std_features = standardize(features)
    best: tuple[float, dict[int, list[int]], LshFunction] | None = None
    hash_ops = 0
    for attempt in range(max_attempts):
        proj = std_features @ np.random.default_rng(seed + attempt).standard_normal(n_dims)
        span = float(proj.max() - proj.min()) or 1.0
        w = span / (4 * n_buckets)
        lsh = LshFunction.draw(n_dims, w, seed + attempt)
        raw = lsh.hash_many(std_features)
        hash_ops += n
        grouped = _fold_cells(raw, n_buckets)
        achieved = n / len(grouped)
        if best is None or abs(achieved - target_ratio) < abs(best[0] - target_ratio):
            best = (achieved, dict(grouped), lsh)
        if len(grouped) >= 0.5 * n_buckets:
            break

    assert best is not None
    _, grouped, lsh = best
    members = {new: sorted(grouped[b]) for new, b in enumerate(sorted(grouped))}
    build = _aggregate(features, members, target_ratio)
    build.hash_ops = hash_ops
    build.lsh = lsh
    return build


def majority_labels(index: BucketIndex, labels: tuple[str, ...]) -> dict[int, str]:
    """Per bucket, the most common member label; ties to the smallest label."""
    out = {}
    for bid, ids in index.members.items():
        counts = Counter(labels[i] for i in ids)
        top = max(counts.values())
        out[bid] = min(lbl for lbl, c in counts.items() if c == top)
    return out


@dataclass
class AggregatedUser:
    """Per-item mean ratings over the bucket members that rated each item."""

    bucket_id: int
    ratings: dict[int, float]
    item_counts: dict[int, int]
    mean_rating: float = field(init=False)

    def __post_init__(self):
        self.mean_rating = (
            sum(self.ratings.values()) / len(self.ratings) if self.ratings else 0.0)


def build_user_buckets(matrix: RatingMatrix, target_ratio: float,
                       seed: int = 0) -> tuple[list[AggregatedUser], BucketIndex, int]:
    """Bucket user rows (zero-imputed dense vectors, for hashing only) and
    aggregate ratings per item over the members that rated it.

    Returns (aggregated users, index, hash op count).
    """
    dense = np.zeros((matrix.n_users, matrix.n_items))
    for u, row in enumerate(matrix.by_user):
        for i, r in row.items():
            dense[u, i] = r
    build = build_buckets(dense, target_ratio, seed=seed)
    agg_users = []
    for bid, ids in sorted(build.index.members.items()):
        sums: dict[int, float] = defaultdict(float)
        counts: dict[int, int] = defaultdict(int)
        for u in ids:
            for i, r in matrix.by_user[u].items():
                sums[i] += r
                counts[i] += 1
        ratings = {i: sums[i] / counts[i] for i in sums}
        agg_users.append(AggregatedUser(bid, ratings, dict(counts)))
    return agg_users, build.index, build.hash_ops


INDEX_MAGIC = "AGGIDX v1"


def write_index(build: BucketBuild, path: str | Path) -> None:
    agg = build.aggregated
    n_dims = agg[0].features.shape[0]
    idx = build.index
    with open(path, "w") as f:
        f.write(f"{INDEX_MAGIC} n={n_dims} buckets={idx.n_buckets} "
                f"ratio={idx.compression_ratio_achieved!r}\n")
        for point in agg:
            ids = ",".join(str(i) for i in idx.members[point.bucket_id])
            f.write(f"{point.bucket_id}\t{ids}\n")
        for point in agg:
            f.write(" ".join(repr(v) for v in point.features.tolist()) + "\n")


def read_index(path: str | Path) -> BucketBuild:
    path = Path(path)
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith(INDEX_MAGIC):
        raise IndexFormatError(f"{path}: not an {INDEX_MAGIC} file")
    try:
        header = dict(tok.split("=") for tok in lines[0][len(INDEX_MAGIC):].split())
        n_dims = int(header["n"])
        n_buckets = int(header["buckets"])
        ratio = float(header["ratio"])
    except (ValueError, KeyError) as e:
        raise IndexFormatError(f"{path}: bad header: {e}") from None
    if len(lines) != 1 + 2 * n_buckets:
        raise IndexFormatError(f"{path}: expected {1 + 2 * n_buckets} lines, got {len(lines)}")
    members: dict[int, list[int]] = {}
    for line in lines[1:1 + n_buckets]:
        try:
            bid_str, ids_str = line.split("\t")
            members[int(bid_str)] = [int(t) for t in ids_str.split(",")]
        except ValueError as e:
            raise IndexFormatError(f"{path}: bad bucket line: {e}") from None
    aggregated = []
    for bid, line in zip(sorted(members), lines[1 + n_buckets:]):
        feats = np.array([float(t) for t in line.split()])
        if feats.shape[0] != n_dims:
            raise IndexFormatError(f"{path}: feature row has {feats.shape[0]} dims, expected {n_dims}")
        aggregated.append(AggregatedPoint(bid, feats, len(members[bid])))
    index = BucketIndex(members, ratio, ratio)
    return BucketBuild(aggregated, index)
