"""Query answering over a partition index.

A query is routed to the levels whose subspaces it is closest to, then
matched against each probed level's members in that level's projected
coordinates. Projection never increases distances, and within a level the
projected ranking preserves the true ranking up to the guarantees the index
was built under. ``brute_force_nn`` is the exact baseline everything is
validated against.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EmptyModelError, InvalidParamsError
from .index import IndexModel, PartitionLevel, PointSet, point_subspace_distance

DISTANCE_SLACK = 1e-10  # float tolerance on "projection never increases distance"


@dataclass(frozen=True)
class QueryResult:
    """One match: the point, its distances, where it was found, and how many
    candidates were examined to find it. ``level_id`` is None for results
    that did not come from an index (brute force)."""

    point_id: int
    projected_distance: float
    original_distance: float
    level_id: int | None
    candidates_examined: int

    def __post_init__(self):
        if self.projected_distance < 0.0:
            raise InvalidParamsError("projected distance must be non-negative")
        if self.original_distance < self.projected_distance - DISTANCE_SLACK:
            raise InvalidParamsError(
                "original distance cannot be smaller than projected distance"
            )


@dataclass(frozen=True)
class QueryParams:
    """probes: how many nearest levels to search. metric_space: rank
    candidates by 'projected' (default) or 'original' distance."""

    probes: int = 1
    metric_space: str = "projected"

    def __post_init__(self):
        if self.probes < 1:
            raise InvalidParamsError(f"probes must be >= 1, got {self.probes}")
        if self.metric_space not in ("projected", "original"):
            raise InvalidParamsError(
                f"metric_space must be 'projected' or 'original', got {self.metric_space!r}"
            )


def _check_query_vector(q, d: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).ravel()
    if q.shape[0] != d:
        raise DimensionError(f"query has dimension {q.shape[0]}, expected {d}")
    if not np.all(np.isfinite(q)):
        raise InvalidParamsError("query contains non-finite entries")
    return q


def nearest_subspace(q, model: IndexModel) -> list[int]:
    """Level ids sorted by the query's distance to each level's subspace,
    ascending, ties to the lower level id."""
    if not model.levels:
        raise EmptyModelError("model has no levels")
    q = _check_query_vector(q, model.d)
    ranked = sorted(
        (point_subspace_distance(q, level.basis), level.level_id)
        for level in model.levels
    )
    return [level_id for _, level_id in ranked]


def _level_candidates(q, level: PartitionLevel, data: PointSet):
    """Per-member (projected, original) distances for one level."""
    members = data.rows_for_ids(level.member_ids)
    V = level.basis.basis
    proj_delta = members @ V - q @ V
    projected = np.linalg.norm(proj_delta, axis=1)
    original = np.linalg.norm(members - q, axis=1)
    return level.member_ids, projected, original


def _best(ids, key_dist):
    """Index of the minimum, ties to the lower id."""
    best = key_dist.min()
    tied = np.flatnonzero(key_dist == best)
    return tied[np.argmin(ids[tied])]


def search_in_level(
    q, level: PartitionLevel, data: PointSet, metric_space: str = "projected"
) -> QueryResult:
    """Best member of one level under that level's projection.

    Projects the query and every member onto the level basis and returns the
    member minimizing the projected distance (or the original distance when
    ``metric_space='original'``), ties to the lower point id."""
    q = _check_query_vector(q, data.d)
    ids, projected, original = _level_candidates(q, level, data)
    key = projected if metric_space == "projected" else original
    pick = _best(ids, key)
    return QueryResult(
        point_id=int(ids[pick]),
        projected_distance=float(projected[pick]),
        original_distance=float(original[pick]),
        level_id=level.level_id,
        candidates_examined=int(ids.shape[0]),
    )


def query(
    q, model: IndexModel, data: PointSet, params: QueryParams = QueryParams()
) -> QueryResult:
    """Nearest neighbor estimate: probe the closest levels, search each in
    projected coordinates, return the best candidate found.

    Always returns a result for a non-empty model. Ties across levels go to
    the lower point id; ``candidates_examined`` counts every member scanned
    across all probed levels."""
    order = nearest_subspace(q, model)
    q = _check_query_vector(q, model.d)
    levels_by_id = {level.level_id: level for level in model.levels}
    best = None
    examined = 0
    for level_id in order[: params.probes]:
        result = search_in_level(q, levels_by_id[level_id], data, params.metric_space)
        examined += result.candidates_examined
        key = (
            result.projected_distance
            if params.metric_space == "projected"
            else result.original_distance
        )
        if best is None or key < best[0] or (key == best[0] and result.point_id < best[1].point_id):
            best = (key, result)
    return QueryResult(
        point_id=best[1].point_id,
        projected_distance=best[1].projected_distance,
        original_distance=best[1].original_distance,
        level_id=best[1].level_id,
        candidates_examined=examined,
    )


def brute_force_nn(q, data: PointSet) -> QueryResult:
    """Exact nearest neighbor by full scan, ties to the lower point id.

    The search structure plays no part here; both distance fields carry the
    true Euclidean distance and ``level_id`` is unset."""
    q = _check_query_vector(q, data.d)
    dist = np.linalg.norm(data.points - q, axis=1)
    pick = _best(data.ids, dist)
    d = float(dist[pick])
    return QueryResult(
        point_id=int(data.ids[pick]),
        projected_distance=d,
        original_distance=d,
        level_id=None,
        candidates_examined=data.n,
    )


def top_k_search(
    q,
    model: IndexModel,
    data: PointSet,
    K: int,
    params: QueryParams = QueryParams(),
) -> list[QueryResult]:
    """K best members across the probed levels, ascending by distance.

    Candidates are ranked by their own level's projected distance (or
    original distance under ``metric_space='original'``), ties to the lower
    point id. Fewer than K results come back only when the probed levels
    hold fewer than K members."""
    if K < 1:
        raise InvalidParamsError(f"K must be >= 1, got {K}")
    order = nearest_subspace(q, model)
    q = _check_query_vector(q, model.d)
    levels_by_id = {level.level_id: level for level in model.levels}
    all_ids, all_proj, all_orig, all_level = [], [], [], []
    for level_id in order[: params.probes]:
        ids, projected, original = _level_candidates(q, levels_by_id[level_id], data)
        all_ids.append(ids)
        all_proj.append(projected)
        all_orig.append(original)
        all_level.append(np.full(ids.shape[0], level_id, dtype=np.int64))
    ids = np.concatenate(all_ids)
    projected = np.concatenate(all_proj)
    original = np.concatenate(all_orig)
    level_ids = np.concatenate(all_level)
    key = projected if params.metric_space == "projected" else original
    ranking = np.lexsort((ids, key))[:K]
    examined = int(ids.shape[0])
    return [
        QueryResult(
            point_id=int(ids[i]),
            projected_distance=float(projected[i]),
            original_distance=float(original[i]),
            level_id=int(level_ids[i]),
            candidates_examined=examined,
        )
        for i in ranking
    ]
