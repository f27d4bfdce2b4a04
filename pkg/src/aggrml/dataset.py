"""Dataset loading, validation, partitioning, and synthesis.

Two input shapes are supported: dense labeled feature vectors (headerless
CSV, label as optional last column) and sparse user-item rating triplets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataFormatError


@dataclass(frozen=True)
class DenseDataset:
    """Dense point set: an (N, n) feature matrix plus optional labels."""

    features: np.ndarray          # shape (N, n), float64
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DataFormatError("features must be a 2-d array")
        if not np.isfinite(self.features).all():
            raise DataFormatError("non-finite feature value in dataset")
        if self.labels is not None and len(self.labels) != len(self.features):
            raise DataFormatError("label count does not match point count")

    @property
    def n_points(self) -> int:
        return self.features.shape[0]

    @property
    def n_dims(self) -> int:
        return self.features.shape[1]


@dataclass
class RatingMatrix:
    """Sparse user-item ratings with a per-user mean cache."""

    n_users: int
    n_items: int
    # per user: dict item -> rating (immutable after load)
    by_user: list[dict[int, float]]
    user_means: np.ndarray = field(init=False)

    def __post_init__(self):
        means = np.zeros(self.n_users)
        for u, row in enumerate(self.by_user):
            if row:
                means[u] = sum(row.values()) / len(row)
        self.user_means = means

    @property
    def n_ratings(self) -> int:
        return sum(len(r) for r in self.by_user)

    def rating_bounds(self) -> tuple[float, float]:
        lo = min((min(r.values()) for r in self.by_user if r), default=0.0)
        hi = max((max(r.values()) for r in self.by_user if r), default=0.0)
        return lo, hi


@dataclass(frozen=True)
class Partition:
    """Contiguous index slice [start, stop) of a dataset's points/users."""

    pid: int
    start: int
    stop: int

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.start, self.stop)

    def __len__(self) -> int:
        return self.stop - self.start


def load_dense(path: str | Path, has_label: bool = False) -> DenseDataset:
    """Parse a headerless CSV of feature rows, label as last column if any."""
    path = Path(path)
    rows: list[list[float]] = []
    labels: list[str] = []
    width = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            cols = line.split(",")
            if width is None:
                width = len(cols)
            elif len(cols) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: ragged row ({len(cols)} columns, expected {width})")
            if has_label:
                labels.append(cols[-1].strip())
                cols = cols[:-1]
            try:
                vals = [float(c) for c in cols]
            except ValueError as e:
                raise DataFormatError(f"{path}:{lineno}: non-numeric feature: {e}") from None
            if not all(np.isfinite(vals)):
                raise DataFormatError(f"{path}:{lineno}: non-finite feature value")
            rows.append(vals)
    if not rows:
        raise DataFormatError(f"{path}: empty dataset")
    features = np.asarray(rows, dtype=np.float64)
    return DenseDataset(features, tuple(labels) if has_label else None)


def write_dense(dataset: DenseDataset, path: str | Path) -> None:
    with open(path, "w") as f:
        for i in range(dataset.n_points):
            row = ",".join(repr(v) for v in dataset.features[i].tolist())
            if dataset.labels is not None:
                row += "," + dataset.labels[i]
            f.write(row + "\n")


def load_ratings(path: str | Path) -> RatingMatrix:
    """Parse (user, item, rating) triplets, whitespace- or comma-separated."""
    path = Path(path)
    triplets: list[tuple[int, int, float]] = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected 'user item rating'")
            try:
                u, i, r = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as e:
                raise DataFormatError(f"{path}:{lineno}: {e}") from None
            if not np.isfinite(r):
                raise DataFormatError(f"{path}:{lineno}: non-finite rating")
            if u < 0 or i < 0:
                raise DataFormatError(f"{path}:{lineno}: negative id")
            triplets.append((u, i, r))
    if not triplets:
        raise DataFormatError(f"{path}: empty ratings file")
    n_users = max(t[0] for t in triplets) + 1
    n_items = max(t[1] for t in triplets) + 1
    by_user: list[dict[int, float]] = [dict() for _ in range(n_users)]
    for u, i, r in triplets:
        if i in by_user[u]:
            raise DataFormatError(f"duplicate rating for (user={u}, item={i})")
        by_user[u][i] = r
    return RatingMatrix(n_users, n_items, by_user)


def synth_clustered(n_points: int, n_dims: int, n_clusters: int,
                    spread: float, seed: int) -> DenseDataset:
    """Gaussian blobs around random unit-normal centers; label = cluster id."""
    if n_points <= 0 or n_dims <= 0 or n_clusters <= 0:
        raise ValueError("counts must be positive")
    if spread <= 0:
        raise ValueError("spread must be positive")
    if n_clusters > n_points:
        raise ValueError("more clusters than points")
    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((n_clusters, n_dims))
    assign = rng.integers(0, n_clusters, size=n_points)
    features = centers[assign] + spread * rng.standard_normal((n_points, n_dims))
    labels = tuple(str(c) for c in assign)
    return DenseDataset(features, labels)


def synth_ratings(n_users: int, n_items: int, density: float, seed: int,
                  n_tastes: int = 8, scale: tuple[int, int] = (1, 5)) -> RatingMatrix:
    """Synthetic rating matrix with latent taste clusters.

    Users in the same taste cluster rate items similarly, so LSH grouping of
    user rows is meaningful. Ratings are integers on `scale`.
    """
    if not (0 < density <= 1):
        raise ValueError("density must be in (0, 1]")
    rng = np.random.default_rng(seed)
    taste_profiles = rng.uniform(scale[0], scale[1], size=(n_tastes, n_items))
    taste = rng.integers(0, n_tastes, size=n_users)
    by_user: list[dict[int, float]] = []
    for u in range(n_users):
        n_rated = max(2, rng.binomial(n_items, density))
        items = rng.choice(n_items, size=min(n_rated, n_items), replace=False)
        base = taste_profiles[taste[u], items] + rng.normal(0, 0.7, size=len(items))
        ratings = np.clip(np.rint(base), scale[0], scale[1])
        by_user.append({int(i): float(r) for i, r in zip(items, ratings)})
    return RatingMatrix(n_users, n_items, by_user)


def make_partitions(n: int, m: int) -> list[Partition]:
    """Split n indices into m contiguous slices with sizes differing by <= 1."""
    if m < 1:
        raise ValueError("partition count must be >= 1")
    if m > n:
        raise ValueError(f"cannot split {n} points into {m} partitions")
    base, extra = divmod(n, m)
    parts = []
    start = 0
    for pid in range(m):
        size = base + (1 if pid < extra else 0)
        parts.append(Partition(pid, start, start + size))
        start += size
    return parts
