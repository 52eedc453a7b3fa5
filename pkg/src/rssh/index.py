"""Multi-level partition index.

The builder repeatedly approximates the top-k subspace of the points that
remain, captures everything within a fixed distance of that subspace into a
level, and recurses on the remainder. Under the bounded-noise data model the
fixed threshold sqrt(2)*(1+eta)*alpha captures at least half of the remaining
points per level; a median-distance fallback guarantees the same halving (and
hence the ceil(log2 n)+1 level cap) on arbitrary data.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidParamsError, ZeroMatrixError
from .linalg import KrylovParams, SubspaceBasis, as_matrix, block_lanczos


class CaptureMode(str, enum.Enum):
    """How a level's member set was selected."""

    PAPER_THRESHOLD = "paper-threshold"   # fixed threshold, captured >= half
    MEDIAN_FALLBACK = "median-fallback"   # fixed threshold captured < half; median used
    FINAL_SWEEP = "final-sweep"           # tail level, captures everything left


@dataclass(frozen=True, eq=False)
class PointSet:
    """n points in R^d with stable integer ids, row per point."""

    points: np.ndarray
    ids: np.ndarray

    def __post_init__(self):
        points = as_matrix(self.points, "points")
        ids = np.ascontiguousarray(np.asarray(self.ids, dtype=np.int64).ravel())
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "ids", ids)
        if points.shape[0] < 1:
            raise InvalidParamsError("a PointSet needs at least one point")
        if ids.shape[0] != points.shape[0]:
            raise DimensionError(
                f"{ids.shape[0]} ids for {points.shape[0]} points"
            )
        if np.unique(ids).shape[0] != ids.shape[0]:
            raise InvalidParamsError("point ids must be unique")
        points.setflags(write=False)
        ids.setflags(write=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_points(cls, points) -> "PointSet":
        """PointSet with ids 0..n-1 in row order."""
        points = as_matrix(points, "points")
        return cls(points=points, ids=np.arange(points.shape[0], dtype=np.int64))

    def take_ids(self, wanted) -> "PointSet":
        """Subset by id, preserving this set's row order."""
        mask = np.isin(self.ids, np.asarray(wanted, dtype=np.int64))
        if not mask.any():
            raise InvalidParamsError("subset selects no points")
        return PointSet(points=self.points[mask], ids=self.ids[mask])

    def rows_for_ids(self, wanted) -> np.ndarray:
        """Rows for the given ids, in the order the ids are listed."""
        wanted = np.asarray(wanted, dtype=np.int64).ravel()
        if not hasattr(self, "_id_order"):
            object.__setattr__(self, "_id_order", np.argsort(self.ids, kind="stable"))
        order = self._id_order
        pos = np.searchsorted(self.ids, wanted, sorter=order)
        if np.any(pos >= self.ids.shape[0]) or np.any(
            self.ids[order[np.minimum(pos, self.ids.shape[0] - 1)]] != wanted
        ):
            raise InvalidParamsError("requested ids are not present in this PointSet")
        return self.points[order[pos]]


@dataclass(frozen=True)
class BuildParams:
    """Build-time knobs: subspace rank k, separation epsilon, SVD error eta,
    noise bound alpha (defaults to epsilon/25), RNG seed, optional level cap."""

    k: int
    epsilon: float
    eta: float
    alpha: float | None = None
    seed: int = 0
    max_levels: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParamsError(f"rank k must be >= 1, got {self.k}")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidParamsError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0.0 < self.eta < 1.0:
            raise InvalidParamsError(f"eta must lie in (0, 1), got {self.eta}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", self.epsilon / 25.0)
        if self.alpha <= 0.0:
            raise InvalidParamsError(f"alpha must be positive, got {self.alpha}")
        if self.max_levels is not None and self.max_levels < 1:
            raise InvalidParamsError("max_levels must be >= 1 when given")

    @property
    def capture_threshold(self) -> float:
        return np.sqrt(2.0) * (1.0 + self.eta) * self.alpha


@dataclass(frozen=True, eq=False)
class PartitionLevel:
    """One level: its subspace basis, captured member ids, and the distance
    threshold that was in effect when they were captured."""

    level_id: int
    basis: SubspaceBasis
    member_ids: np.ndarray
    threshold_used: float
    capture_mode: CaptureMode

    def __post_init__(self):
        member_ids = np.ascontiguousarray(
            np.asarray(self.member_ids, dtype=np.int64).ravel()
        )
        object.__setattr__(self, "member_ids", member_ids)
        object.__setattr__(self, "capture_mode", CaptureMode(self.capture_mode))
        if member_ids.shape[0] == 0:
            raise InvalidParamsError("a level must capture at least one point")
        member_ids.setflags(write=False)


@dataclass(frozen=True, eq=False)
class IndexModel:
    """The finished search structure: ordered levels plus build parameters.

    Immutable; safe for unlimited concurrent readers."""

    params: BuildParams
    levels: tuple[PartitionLevel, ...]
    d: int
    total_points: int

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise InvalidParamsError("an IndexModel needs at least one level")
        all_ids = np.concatenate([level.member_ids for level in self.levels])
        if all_ids.shape[0] != self.total_points:
            raise InvalidParamsError(
                f"levels hold {all_ids.shape[0]} ids for {self.total_points} points"
            )
        if np.unique(all_ids).shape[0] != all_ids.shape[0]:
            raise InvalidParamsError("level member ids overlap")
        if len(self.levels) > level_count_bound(self.total_points):
            raise InvalidParamsError(
                f"{len(self.levels)} levels exceeds the bound "
                f"{level_count_bound(self.total_points)}"
            )


def level_count_bound(n: int) -> int:
    """Hard cap on the number of levels: ceil(log2 n) + 1 (integer-exact)."""
    if n < 1:
        raise InvalidParamsError(f"n must be >= 1, got {n}")
    return (n - 1).bit_length() + 1


def point_subspace_distance(p, basis: SubspaceBasis) -> float:
    """Euclidean distance from p to the span of the basis: ||p - V V' p||."""
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.shape[0] != basis.dim:
        raise DimensionError(
            f"point has dimension {p.shape[0]}, basis expects {basis.dim}"
        )
    coords = basis.basis.T @ p
    return float(np.linalg.norm(p - basis.basis @ coords))


def subspace_distances(X, basis: SubspaceBasis) -> np.ndarray:
    """Row-wise distances of X to the span of the basis (vectorized)."""
    X = as_matrix(X, "X")
    if X.shape[1] != basis.dim:
        raise DimensionError(
            f"points have dimension {X.shape[1]}, basis expects {basis.dim}"
        )
    residual = X - (X @ basis.basis) @ basis.basis.T
    return np.linalg.norm(residual, axis=1)


def capture_set(current: PointSet, basis: SubspaceBasis, threshold: float):
    """Split ids into (captured, remaining) by distance to the subspace.

    The boundary is included: distance == threshold captures. Id order is
    preserved on both sides.
    """
    if threshold <= 0.0:
        raise InvalidParamsError(f"threshold must be positive, got {threshold}")
    dist = subspace_distances(current.points, basis)
    mask = dist <= threshold
    return current.ids[mask], current.ids[~mask]


def _trivial_basis(d: int, k: int) -> SubspaceBasis:
    """Standard-basis fallback for an all-zero remainder block."""
    return SubspaceBasis(
        dim=d, k=k, basis=np.eye(d)[:, :k], singular_values=np.zeros(k)
    )


def _level_basis(points: np.ndarray, k: int, eta: float, seed: int) -> SubspaceBasis:
    k_eff = min(k, points.shape[0], points.shape[1])
    try:
        return block_lanczos(points, KrylovParams(k=k_eff, eta=eta, seed=seed))
    except ZeroMatrixError:
        return _trivial_basis(points.shape[1], k_eff)


def build_partition_index(data: PointSet, params: BuildParams) -> IndexModel:
    """Build the multi-level partition of a point set.

    Per level: approximate the top-k subspace of the remaining points
    (seeded with seed + level_id so sketches decorrelate across levels),
    capture everything within sqrt(2)*(1+eta)*alpha, and recurse on the
    rest. If the fixed threshold captures fewer than half, the median
    distance is used instead, which makes the ceil(log2 n)+1 level bound
    unconditional. A remainder smaller than k, or the level cap itself,
    triggers a final sweep that captures everything left.
    """
    if params.k > min(data.n, data.d):
        raise InvalidParamsError(
            f"rank k={params.k} exceeds min(n, d)={min(data.n, data.d)}"
        )
    cap = level_count_bound(data.n)
    if params.max_levels is not None:
        cap = min(cap, params.max_levels)
    levels = []
    remaining = data
    for level_id in range(cap):
        basis = _level_basis(
            remaining.points, params.k, params.eta, params.seed + level_id
        )
        dist = subspace_distances(remaining.points, basis)
        last = level_id == cap - 1
        if last or remaining.n < params.k:
            threshold = float(dist.max())
            mode = CaptureMode.FINAL_SWEEP
            mask = np.ones(remaining.n, dtype=bool)
        else:
            threshold = params.capture_threshold
            mode = CaptureMode.PAPER_THRESHOLD
            mask = dist <= threshold
            if 2 * int(mask.sum()) < remaining.n:
                threshold = float(np.median(dist))
                mode = CaptureMode.MEDIAN_FALLBACK
                mask = dist <= threshold
        levels.append(
            PartitionLevel(
                level_id=level_id,
                basis=basis,
                member_ids=remaining.ids[mask],
                threshold_used=threshold,
                capture_mode=mode,
            )
        )
        if mask.all():
            break
        remaining = PointSet(points=remaining.points[~mask], ids=remaining.ids[~mask])
    return IndexModel(
        params=params, levels=tuple(levels), d=data.d, total_points=data.n
    )
