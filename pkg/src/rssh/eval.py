"""Synthetic instance generation and retrieval/classification metrics.

The planted-instance generator produces the adversarial-noise workload the
index is designed for: clean points on a random k-dimensional subspace, one
planted neighbor within distance 1 of the query, every other point at
distance at least 1+epsilon, and bounded noise (norm at most epsilon/25)
added to every point and to the query. Under that model the noisy nearest
neighbor of the noisy query is provably the planted point, which makes the
generator its own ground truth.
"""

from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import (
    GenerationTimeoutError,
    InvalidParamsError,
    MissingLabelError,
    UndefinedMetricError,
)
from .index import IndexModel, PointSet
from .linalg import orthonormalize
from .query import QueryParams, query

NOISE_FRACTION = 25.0  # noise bound is epsilon / NOISE_FRACTION
_MAX_DRAWS_PER_POINT = 1000


@dataclass(frozen=True, eq=False)
class PlantedInstance:
    """One generated workload, with every piece of bookkeeping retained so
    tests can re-measure all invariants from scratch."""

    data: PointSet                # noisy points, the searchable set
    query: np.ndarray             # noisy query
    planted_id: int
    epsilon: float
    clean_data: PointSet          # noise-free points, same ids and order
    noise_norms: np.ndarray       # per-point noise magnitude, id order
    clean_query: np.ndarray
    query_noise_norm: float
    subspace: np.ndarray          # d-by-k orthonormal basis the clean points live in

    @property
    def alpha(self) -> float:
        return self.epsilon / NOISE_FRACTION


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(dim)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def generate_planted_instance(
    n: int, d: int, k: int, epsilon: float, seed: int
) -> PlantedInstance:
    """Draw a planted instance: n points near a random k-dim subspace of R^d.

    The clean query and planted neighbor sit within [0.5, 1] of each other;
    the remaining n-1 points are placed uniformly on spheres of radius in
    [1+epsilon, 3] around the query (re-drawn if float rounding lands one
    inside the forbidden shell). Independent noise of norm uniform in
    [0, epsilon/25] corrupts every point and the query. Row order is
    shuffled so the planted point's id carries no information.
    """
    if not 2 <= k <= d:
        raise InvalidParamsError(f"need 2 <= k <= d, got k={k}, d={d}")
    if n < 2:
        raise InvalidParamsError(f"need n >= 2, got {n}")
    if not 0.0 < epsilon < 1.0:
        raise InvalidParamsError(f"epsilon must lie in (0, 1), got {epsilon}")
    rng = np.random.default_rng(seed)
    alpha = epsilon / NOISE_FRACTION
    basis = orthonormalize(rng.standard_normal((d, k)))
    if basis.shape[1] != k:
        raise GenerationTimeoutError("random subspace draw collapsed")

    q_coords = rng.standard_normal(k)
    star_coords = q_coords + _unit(rng, k) * rng.uniform(0.5, 1.0)
    far_coords = np.empty((n - 1, k))
    budget = _MAX_DRAWS_PER_POINT * (n - 1)
    placed = 0
    while placed < n - 1:
        if budget <= 0:
            raise GenerationTimeoutError(
                f"could not place {n - 1} far points for d={d}, k={k}, "
                f"epsilon={epsilon}"
            )
        budget -= 1
        cand = q_coords + _unit(rng, k) * rng.uniform(1.0 + epsilon, 3.0)
        if np.linalg.norm(cand - q_coords) >= 1.0 + epsilon:
            far_coords[placed] = cand
            placed += 1

    coords = np.vstack([star_coords, far_coords])
    clean = coords @ basis.T
    clean_query = basis @ q_coords

    noise_norms = rng.uniform(0.0, alpha, size=n)
    noise = np.vstack([_unit(rng, d) for _ in range(n)]) * noise_norms[:, None]
    noisy = clean + noise
    query_noise_norm = float(rng.uniform(0.0, alpha))
    noisy_query = clean_query + _unit(rng, d) * query_noise_norm

    perm = rng.permutation(n)
    planted_id = int(np.flatnonzero(perm == 0)[0])
    ids = np.arange(n, dtype=np.int64)
    return PlantedInstance(
        data=PointSet(points=noisy[perm], ids=ids),
        query=noisy_query,
        planted_id=planted_id,
        epsilon=float(epsilon),
        clean_data=PointSet(points=clean[perm], ids=ids),
        noise_norms=noise_norms[perm],
        clean_query=clean_query,
        query_noise_norm=query_noise_norm,
        subspace=basis,
    )


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise InvalidParamsError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def precision(c: ConfusionCounts) -> float:
    """tp / (tp + fp)."""
    if c.tp + c.fp == 0:
        raise UndefinedMetricError("precision is undefined when tp + fp = 0")
    return c.tp / (c.tp + c.fp)


def accuracy(c: ConfusionCounts) -> float:
    """(tp + tn) / (tp + tn + fp + fn)."""
    if c.total == 0:
        raise UndefinedMetricError("accuracy is undefined on zero counts")
    return (c.tp + c.tn) / c.total


def recall_at_k(retrieved: Sequence, true_neighbors: Sequence, K: int) -> float:
    """|top-K retrieved intersected with top-K true| / K."""
    if K < 1:
        raise InvalidParamsError(f"K must be >= 1, got {K}")
    return len(set(retrieved[:K]) & set(true_neighbors[:K])) / K


@dataclass(frozen=True)
class ClassificationReport:
    """One-vs-rest confusion counts per class plus overall accuracy."""

    per_class: dict
    accuracy: float
    n_queries: int


def classify_by_nn(
    queries: PointSet,
    labels: Mapping[int, Hashable],
    model: IndexModel,
    data: PointSet,
    params: QueryParams = QueryParams(),
) -> ClassificationReport:
    """Assign each query the label of its retrieved nearest neighbor and
    aggregate one-vs-rest confusion counts per class.

    The label map must cover every data id (the predictions) and every query
    id (the ground truth)."""
    for pid in data.ids:
        if int(pid) not in labels:
            raise MissingLabelError(f"data id {int(pid)} has no label")
    for qid in queries.ids:
        if int(qid) not in labels:
            raise MissingLabelError(f"query id {int(qid)} has no label")
    truths, preds = [], []
    for row, qid in zip(queries.points, queries.ids):
        hit = query(row, model, data, params)
        truths.append(labels[int(qid)])
        preds.append(labels[hit.point_id])
    classes = sorted(set(truths) | set(preds), key=repr)
    per_class = {}
    for cls in classes:
        tp = sum(1 for t, p in zip(truths, preds) if t == cls and p == cls)
        fp = sum(1 for t, p in zip(truths, preds) if t != cls and p == cls)
        fn = sum(1 for t, p in zip(truths, preds) if t == cls and p != cls)
        tn = len(truths) - tp - fp - fn
        per_class[cls] = ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)
    correct = sum(1 for t, p in zip(truths, preds) if t == p)
    return ClassificationReport(
        per_class=per_class,
        accuracy=correct / len(truths),
        n_queries=len(truths),
    )


def gaussian_blobs(
    n_per_class: int, d: int, n_classes: int, separation: float, seed: int
):
    """Labeled unit-variance Gaussian clusters with centers `separation`
    apart along coordinate axes. Returns (PointSet, id->label map)."""
    if n_classes > d:
        raise InvalidParamsError("need n_classes <= d for axis-aligned centers")
    rng = np.random.default_rng(seed)
    centers = np.eye(d)[:n_classes] * separation
    rows, labels = [], {}
    pid = 0
    for cls in range(n_classes):
        pts = centers[cls] + rng.standard_normal((n_per_class, d))
        for row in pts:
            rows.append(row)
            labels[pid] = cls
            pid += 1
    points = PointSet.from_points(np.vstack(rows))
    return points, labels
