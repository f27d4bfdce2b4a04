"""Aggregation-based approximate processing for ML workloads."""

from .dataset import (DenseDataset, Partition, RatingMatrix, load_dense,
                      load_ratings, make_partitions, synth_clustered,
                      synth_ratings, write_dense)
from .engine import RefinementPlan, TaskResult, make_plan, run_map_task
from .errors import (AggrmlError, ConfigError, DataFormatError,
                     IndexFormatError)
from .harness import (JobConfig, JobResult, accuracy_loss_pct, match_budget,
                      run_comparison, run_job)
from .lsh_aggregate import (AggregatedPoint, AggregatedUser, BucketBuild,
                            BucketIndex, LshFunction, build_buckets,
                            build_user_buckets, distance, majority_labels,
                            read_index, standardize, write_index)
from .workload_cf import cf_predict, pearson_weight, rmse
from .workload_knn import classification_accuracy, knn_reduce

__version__ = "0.1.0"
