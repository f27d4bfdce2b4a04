"""Two-stage approximate map-task execution.

Stage one processes only the aggregated points to get a fast initial
output plus one correlation score per bucket. Stage two ranks buckets by
correlation and replaces the aggregated contribution of the top fraction
with their original points, so a refinement threshold of 1 reproduces
the exact output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import numpy as np


class Workload(Protocol):
    """Contract each workload implements for one map task."""

    def init_output(self, query: Any) -> tuple[Any, dict[int, float]]:
        """Process all aggregated points: (initial output, bucket correlations)."""

    def refine(self, output: Any, bucket_id: int, query: Any) -> Any:
        """Replace bucket_id's aggregated contribution with its originals'."""

    def finalize(self, output: Any, query: Any) -> list:
        """Emit this query's shuffle records."""


@dataclass(frozen=True)
class RefinementPlan:
    """Bucket ids ranked by descending correlation, with the refine cutoff."""

    ranked: tuple[int, ...]
    epsilon_max: float
    cutoff: int

    @property
    def to_refine(self) -> tuple[int, ...]:
        return self.ranked[:self.cutoff]


def make_plan(correlations: dict[int, float], epsilon_max: float) -> RefinementPlan:
    """Rank buckets by descending correlation (ties by ascending id);
    cutoff = ceil(k * epsilon_max), exactly 0 at epsilon_max = 0."""
    if not (0 <= epsilon_max <= 1):
        raise ValueError("epsilon_max must lie in [0, 1]")
    for bid, c in correlations.items():
        if not np.isfinite(c):
            raise ValueError(f"non-finite correlation for bucket {bid}")
    ranked = tuple(sorted(correlations, key=lambda b: (-correlations[b], b)))
    cutoff = 0 if epsilon_max == 0 else math.ceil(len(ranked) * epsilon_max)
    return RefinementPlan(ranked, epsilon_max, cutoff)


@dataclass
class TaskResult:
    """Per-task emission records and work counters."""

    records: dict[Any, list]          # query id -> shuffle records
    aggregated_processed: int = 0
    originals_refined: int = 0


def run_map_task(workload: Workload, queries: Sequence[tuple[Any, Any]],
                 bucket_sizes: dict[int, int], epsilon_max: float) -> TaskResult:
    """Run the two-stage processing for each (query id, query) pair."""
    result = TaskResult(records={})
    n_buckets = len(bucket_sizes)
    for qid, query in queries:
        output, correlations = workload.init_output(query)
        if set(correlations) != set(bucket_sizes):
            raise ValueError("correlation keys do not match bucket ids")
        plan = make_plan(correlations, epsilon_max)
        for bid in plan.to_refine:
            output = workload.refine(output, bid, query)
            result.originals_refined += bucket_sizes[bid]
        result.aggregated_processed += n_buckets
        result.records[qid] = workload.finalize(output, query)
    return result
