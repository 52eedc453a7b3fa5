"""Noise-robust nearest-neighbor search via randomized low-rank subspace
partitioning.

Build an index with ``build_partition_index``, answer queries with ``query``
or ``top_k_search``, and validate against ``brute_force_nn``. See the README
for the CLI and the index file format.
"""

from .errors import RsshError
from .eval import (
    ClassificationReport,
    ConfusionCounts,
    PlantedInstance,
    accuracy,
    classify_by_nn,
    gaussian_blobs,
    generate_planted_instance,
    precision,
    recall_at_k,
)
from .index import (
    BuildParams,
    CaptureMode,
    IndexModel,
    PartitionLevel,
    PointSet,
    build_partition_index,
    capture_set,
    level_count_bound,
    point_subspace_distance,
    subspace_distances,
)
from .io import DatasetDescriptor, load_dataset, load_index, save_index
from .linalg import (
    KrylovParams,
    SubspaceBasis,
    block_lanczos,
    build_krylov_block,
    exact_svd_oracle,
    gaussian_sketch,
    orthonormalize,
    spectral_norm,
    truncated_svd_small,
)
from .query import (
    QueryParams,
    QueryResult,
    brute_force_nn,
    nearest_subspace,
    query,
    search_in_level,
    top_k_search,
)

__version__ = "0.1.0"

__all__ = [
    "BuildParams",
    "CaptureMode",
    "ClassificationReport",
    "ConfusionCounts",
    "DatasetDescriptor",
    "IndexModel",
    "KrylovParams",
    "PartitionLevel",
    "PlantedInstance",
    "PointSet",
    "QueryParams",
    "QueryResult",
    "RsshError",
    "SubspaceBasis",
    "accuracy",
    "block_lanczos",
    "brute_force_nn",
    "build_krylov_block",
    "build_partition_index",
    "capture_set",
    "classify_by_nn",
    "exact_svd_oracle",
    "gaussian_blobs",
    "gaussian_sketch",
    "generate_planted_instance",
    "level_count_bound",
    "load_dataset",
    "load_index",
    "nearest_subspace",
    "orthonormalize",
    "point_subspace_distance",
    "precision",
    "query",
    "recall_at_k",
    "save_index",
    "search_in_level",
    "spectral_norm",
    "subspace_distances",
    "top_k_search",
    "truncated_svd_small",
]
