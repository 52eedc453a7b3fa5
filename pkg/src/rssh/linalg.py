"""Dense matrix kernels for randomized low-rank subspace approximation.

The centerpiece is ``block_lanczos``: a randomized block-Krylov method that
returns an approximate top-k right-singular basis with spectral-norm error
within a (1+eta) factor of optimal, with probability at least 9/10. The
supporting kernels (Gaussian sketching, Krylov block assembly, Gram-Schmidt
orthonormalization, small truncated SVD) are exposed individually so each can
be tested against an independent oracle. ``exact_svd_oracle`` is that oracle:
a deterministic one-sided Jacobi SVD, independent of both the randomized path
and LAPACK.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    InvalidParamsError,
    ZeroMatrixError,
)

ORTHO_TOL = 1e-8        # max |V'V - I| accepted for a basis
DROP_TOL = 1e-10        # post-projection column norm below which a column is dropped
JACOBI_TOL = 1e-12      # relative off-diagonal tolerance of the Jacobi oracle
JACOBI_MAX_SWEEPS = 60  # hitting this cap signals pathological input


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a C-contiguous float64 2-D array."""
    out = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    if out.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise InvalidParamsError(f"{name} contains non-finite entries")
    return out


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """A dim-by-k column-orthonormal basis with approximate singular values.

    ``basis[:, i]`` spans the i-th approximate top singular direction of the
    matrix it was computed from; ``singular_values`` are the matching
    approximations, sorted non-increasing. Arrays are frozen after
    construction and safe to share across threads.
    """

    dim: int
    k: int
    basis: np.ndarray
    singular_values: np.ndarray

    def __post_init__(self):
        basis = np.ascontiguousarray(np.asarray(self.basis, dtype=np.float64))
        sv = np.ascontiguousarray(
            np.asarray(self.singular_values, dtype=np.float64).ravel()
        )
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "singular_values", sv)
        if not (1 <= self.k <= self.dim):
            raise DimensionError(f"rank k={self.k} must satisfy 1 <= k <= dim={self.dim}")
        if basis.shape != (self.dim, self.k):
            raise DimensionError(
                f"basis shape {basis.shape} does not match (dim, k)=({self.dim}, {self.k})"
            )
        if sv.shape != (self.k,):
            raise DimensionError(f"expected {self.k} singular values, got {sv.shape[0]}")
        if not np.all(np.isfinite(basis)):
            raise InvalidParamsError("basis contains non-finite entries")
        if np.any(sv < 0) or np.any(np.diff(sv) > 0):
            raise InvalidParamsError("singular values must be non-negative, non-increasing")
        gram = basis.T @ basis
        if np.max(np.abs(gram - np.eye(self.k))) > ORTHO_TOL:
            raise InvalidParamsError("basis columns are not orthonormal")
        basis.setflags(write=False)
        sv.setflags(write=False)


@dataclass(frozen=True)
class KrylovParams:
    """Parameters for ``block_lanczos``.

    ``r`` is the block-power depth; when None it is derived from the input
    height as ceil(log2(max(m, 2)) / sqrt(eta)), clamped to [2, 64].
    """

    k: int
    eta: float
    r: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidParamsError(f"rank k must be >= 1, got {self.k}")
        if not 0.0 < self.eta < 1.0:
            raise InvalidParamsError(f"eta must lie in (0, 1), got {self.eta}")
        if self.r is not None and self.r < 1:
            raise InvalidParamsError(f"depth r must be >= 1, got {self.r}")


def default_depth(m: int, eta: float) -> int:
    """Block-power depth for an m-row input, clamped to [2, 64]."""
    r = math.ceil(math.log2(max(m, 2)) / math.sqrt(eta))
    return min(64, max(2, r))


def gaussian_sketch(dim: int, k: int, seed: int) -> np.ndarray:
    """dim-by-k matrix of i.i.d. standard normals from a seeded generator."""
    if k < 1 or k > dim:
        raise DimensionError(f"sketch width k={k} must satisfy 1 <= k <= dim={dim}")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((dim, k))


def build_krylov_block(A, sketch, r: int) -> np.ndarray:
    """Stack [A S, (A A')A S, ..., (A A')^r A S] column-wise.

    Powers are applied by repeated multiplication against the current block;
    (A A')^j is never formed explicitly.
    """
    A = as_matrix(A, "A")
    sketch = as_matrix(sketch, "sketch")
    if sketch.shape[0] != A.shape[1]:
        raise DimensionError(
            f"sketch has {sketch.shape[0]} rows but A has {A.shape[1]} columns"
        )
    if r < 1:
        raise InvalidParamsError(f"depth r must be >= 1, got {r}")
    block = A @ sketch
    blocks = [block]
    for _ in range(r):
        block = A @ (A.T @ block)
        blocks.append(block)
    return np.hstack(blocks)


def orthonormalize(K) -> np.ndarray:
    """Orthonormal basis for the column span of K.

    Modified Gram-Schmidt with a second pass per column; columns whose
    residual norm after projection falls below DROP_TOL are dropped, so the
    output can be narrower than K. Raises ZeroMatrixError when every column
    is numerically zero.
    """
    K = as_matrix(K, "K")
    n, c = K.shape
    Q = np.empty((n, c))
    m = 0
    for j in range(c):
        v = K[:, j].copy()
        for _ in range(2):
            if m:
                v -= Q[:, :m] @ (Q[:, :m].T @ v)
        norm = np.linalg.norm(v)
        if norm < DROP_TOL:
            continue
        Q[:, m] = v / norm
        m += 1
    if m == 0:
        raise ZeroMatrixError("all columns are numerically zero")
    return np.ascontiguousarray(Q[:, :m])


def truncated_svd_small(B, k: int):
    """Rank-k truncated SVD (W, sigma, V) of a small dense matrix.

    Only meant for the projected c-by-d problem with c much smaller than the
    original row count; backed by LAPACK.
    """
    B = as_matrix(B, "B")
    c, d = B.shape
    if not 1 <= k <= min(c, d):
        raise DimensionError(f"rank k={k} exceeds min(shape)={min(c, d)}")
    W, sig, Vt = np.linalg.svd(B, full_matrices=False)
    return (
        np.ascontiguousarray(W[:, :k]),
        np.ascontiguousarray(sig[:k]),
        np.ascontiguousarray(Vt[:k].T),
    )


def block_lanczos(A, params: KrylovParams) -> SubspaceBasis:
    """Approximate top-k row-space basis of A by the randomized block-Krylov
    method.

    Draws a seeded Gaussian sketch, builds the depth-r Krylov block,
    orthonormalizes it, and solves the small projected SVD. The returned
    basis V lives in the ambient (column) dimension of A so that V V' can
    project arbitrary d-vectors; with probability at least 9/10,

        ||A - A V V'||_2 <= (1 + eta) * sigma_{k+1}(A)

    and each reported singular value sigma_i satisfies
    |sigma_i_approx^2 - sigma_i^2| <= eta * sigma_{k+1}^2.

    Each Krylov block is rescaled to unit Frobenius norm before the next
    power is applied; this leaves every span unchanged but keeps deep powers
    from overflowing.
    """
    A = as_matrix(A, "A")
    n, d = A.shape
    k = params.k
    if k > min(n, d):
        raise DimensionError(f"rank k={k} exceeds min(n, d)={min(n, d)}")
    r = params.r if params.r is not None else default_depth(n, params.eta)
    block = A @ gaussian_sketch(d, k, params.seed)
    blocks = []
    for j in range(r + 1):
        if j:
            block = A @ (A.T @ block)
        norm = np.linalg.norm(block)
        if norm > 0:
            block = block / norm
        blocks.append(block)
    Q = orthonormalize(np.hstack(blocks))
    B = Q.T @ A
    k_eff = min(k, B.shape[0])
    W, sig, _ = truncated_svd_small(B, k_eff)
    Z = Q @ W
    # right-singular directions recovered from Z'A; columns arrive scaled by
    # their singular value and ordered to match sig, zero directions dropped
    V = orthonormalize((Z.T @ A).T)
    kept = V.shape[1]
    return SubspaceBasis(dim=d, k=kept, basis=V, singular_values=sig[:kept])


def exact_svd_oracle(A, k: int) -> SubspaceBasis:
    """Deterministic one-sided Jacobi SVD, iterated to 1e-12.

    Rotates column pairs of A until all pairs are mutually orthogonal, then
    reads singular values off the column norms and the right-singular basis
    off the accumulated rotations. Serves as ground truth for sigma_i and for
    the optimal rank-k projector; raises ConvergenceError after
    JACOBI_MAX_SWEEPS sweeps, which signals pathological input.
    """
    A = as_matrix(A, "A")
    n, d = A.shape
    if not 1 <= k <= min(n, d):
        raise DimensionError(f"rank k={k} exceeds min(n, d)={min(n, d)}")
    G = A.copy()
    V = np.eye(d)
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for i in range(d - 1):
            for j in range(i + 1, d):
                gi = G[:, i]
                gj = G[:, j]
                aii = gi @ gi
                ajj = gj @ gj
                aij = gi @ gj
                if aii == 0.0 or ajj == 0.0:
                    continue
                if abs(aij) <= JACOBI_TOL * math.sqrt(aii * ajj):
                    continue
                rotated = True
                zeta = (ajj - aii) / (2.0 * aij)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.hypot(1.0, zeta))
                c = 1.0 / math.hypot(1.0, t)
                s = c * t
                gi_new = c * gi - s * gj
                G[:, j] = s * gi + c * gj
                G[:, i] = gi_new
                vi = V[:, i].copy()
                V[:, i] = c * vi - s * V[:, j]
                V[:, j] = s * vi + c * V[:, j]
        if not rotated:
            break
    else:
        raise ConvergenceError(
            f"Jacobi SVD did not converge within {JACOBI_MAX_SWEEPS} sweeps"
        )
    sigmas = np.linalg.norm(G, axis=0)
    order = np.argsort(-sigmas, kind="stable")[:k]
    return SubspaceBasis(
        dim=d, k=k, basis=V[:, order], singular_values=sigmas[order]
    )


def spectral_norm(A, tol: float = 1e-11, max_iter: int = 20000) -> float:
    """Largest singular value, by block power iteration on the Gram operator.

    Iterates a 4-column block on the smaller Gram side with a fixed internal
    seed (the function stays a pure function of A), converging the Rayleigh
    estimate of the top eigenvalue to ~1e-8 relative accuracy. The zero
    matrix returns 0.0; if the cap is hit the best estimate so far is
    returned.
    """
    A = as_matrix(A, "A")
    if A.size == 0 or np.max(np.abs(A)) == 0.0:
        return 0.0
    n, d = A.shape
    work = A if d <= n else A.T
    dim = work.shape[1]
    b = min(4, dim)
    rng = np.random.default_rng(0x5EED)
    V = np.linalg.qr(rng.standard_normal((dim, b)))[0]
    est = 0.0
    hits = 0
    for _ in range(max_iter):
        W = work.T @ (work @ V)
        new_est = float(V[:, 0] @ W[:, 0])
        if abs(new_est - est) <= tol * max(abs(new_est), np.finfo(float).tiny):
            hits += 1
            if hits >= 2:
                est = new_est
                break
        else:
            hits = 0
        est = new_est
        V = np.linalg.qr(W)[0]
    return math.sqrt(max(est, 0.0))
