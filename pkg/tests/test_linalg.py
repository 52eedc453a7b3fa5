import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rssh.errors import (
    ConvergenceError,
    DimensionError,
    InvalidParamsError,
    ZeroMatrixError,
)
from rssh.linalg import (
    KrylovParams,
    SubspaceBasis,
    block_lanczos,
    build_krylov_block,
    default_depth,
    exact_svd_oracle,
    gaussian_sketch,
    orthonormalize,
    spectral_norm,
    truncated_svd_small,
)


def padded_diag(values, n_rows):
    """Diagonal matrix stacked on zero rows: known spectrum, tall shape."""
    d = len(values)
    A = np.zeros((n_rows, d))
    A[:d, :d] = np.diag(values)
    return A


class TestGaussianSketch:
    def test_deterministic_under_fixed_seed(self):
        a = gaussian_sketch(4, 2, seed=7)
        b = gaussian_sketch(4, 2, seed=7)
        assert np.array_equal(a, b)
        assert a.shape == (4, 2)

    def test_different_seeds_differ(self):
        assert not np.array_equal(gaussian_sketch(4, 2, 0), gaussian_sketch(4, 2, 1))

    def test_moments(self):
        # law of large numbers: 1000 draws pin mean/variance within 0.15
        s = gaussian_sketch(1000, 1, seed=3).ravel()
        assert abs(s.mean()) < 0.15
        assert abs(s.var() - 1.0) < 0.15

    def test_k_larger_than_dim_rejected(self):
        with pytest.raises(DimensionError):
            gaussian_sketch(2, 3, seed=0)

    def test_zero_k_rejected(self):
        with pytest.raises(DimensionError):
            gaussian_sketch(2, 0, seed=0)


class TestBuildKrylovBlock:
    def test_identity_absorbs_powers(self):
        K = build_krylov_block(np.eye(2), np.eye(2), r=1)
        assert np.array_equal(K, np.hstack([np.eye(2), np.eye(2)]))

    def test_diagonal_arithmetic(self):
        A = np.diag([2.0, 1.0])
        K = build_krylov_block(A, np.array([[1.0], [1.0]]), r=1)
        assert np.array_equal(K, np.array([[2.0, 8.0], [1.0, 1.0]]))

    def test_matches_naive_power_oracle(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((6, 4))
        sketch = rng.standard_normal((4, 2))
        K = build_krylov_block(A, sketch, r=2)
        gram = A @ A.T
        for j in range(3):
            expected = np.linalg.matrix_power(gram, j) @ A @ sketch
            np.testing.assert_allclose(K[:, 2 * j : 2 * (j + 1)], expected, atol=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            build_krylov_block(np.eye(3), np.eye(2), r=1)


class TestOrthonormalize:
    def test_gram_schmidt_by_hand(self):
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
        Q = orthonormalize(np.column_stack([e1, e1 + e2]))
        assert Q.shape == (3, 2)
        np.testing.assert_allclose(Q.T @ Q, np.eye(2), atol=1e-12)
        # span check: the projector must fix e1 and e2
        P = Q @ Q.T
        np.testing.assert_allclose(P @ e1, e1, atol=1e-12)
        np.testing.assert_allclose(P @ e2, e2, atol=1e-12)

    def test_duplicate_direction_dropped(self):
        e1 = np.array([1.0, 0.0, 0.0])
        Q = orthonormalize(np.column_stack([e1, 2 * e1]))
        assert Q.shape == (3, 1)
        assert np.allclose(np.abs(Q[:, 0]), e1)

    def test_random_projector_residual(self):
        K = np.random.default_rng(8).standard_normal((8, 5))
        Q = orthonormalize(K)
        assert np.max(np.abs(Q.T @ Q - np.eye(Q.shape[1]))) < 1e-8
        np.testing.assert_allclose(Q @ (Q.T @ K), K, atol=1e-6)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ZeroMatrixError):
            orthonormalize(np.zeros((4, 3)))


class TestTruncatedSvdSmall:
    def test_diagonal(self):
        W, sig, V = truncated_svd_small(np.diag([3.0, 2.0, 1.0]), k=2)
        np.testing.assert_allclose(sig, [3.0, 2.0], atol=1e-12)
        # singular vectors of a diagonal matrix are signed basis vectors
        assert np.allclose(np.abs(W), np.eye(3)[:, :2], atol=1e-12)
        assert np.allclose(np.abs(V), np.eye(3)[:, :2], atol=1e-12)

    def test_zero_matrix(self):
        W, sig, V = truncated_svd_small(np.zeros((3, 3)), k=1)
        np.testing.assert_allclose(sig, [0.0])
        np.testing.assert_allclose(W.T @ W, np.eye(1), atol=1e-12)
        np.testing.assert_allclose(V.T @ V, np.eye(1), atol=1e-12)

    def test_best_rank_k_error_matches_jacobi_oracle(self):
        B = np.random.default_rng(4).standard_normal((6, 9))
        W, sig, V = truncated_svd_small(B, k=3)
        got = np.linalg.norm(B - (W * sig) @ V.T)
        oracle = exact_svd_oracle(B, k=6)
        best = np.sqrt(np.sum(oracle.singular_values[3:] ** 2))
        assert abs(got - best) < 1e-8

    def test_rank_too_large(self):
        with pytest.raises(DimensionError):
            truncated_svd_small(np.eye(3), k=4)


class TestBlockLanczos:
    def test_exact_rank_one_input(self):
        rng = np.random.default_rng(2)
        u = rng.standard_normal(8)
        v = rng.standard_normal(5)
        A = np.outer(u, v)
        basis = block_lanczos(A, KrylovParams(k=1, eta=0.5, seed=0))
        V = basis.basis
        assert spectral_norm(A - (A @ V) @ V.T) < 1e-8
        expected = np.linalg.norm(u) * np.linalg.norm(v)
        assert abs(basis.singular_values[0] - expected) < 1e-8

    def test_known_spectrum_bounds(self):
        A = padded_diag([3.0, 2.0, 1.0], 10)
        basis = block_lanczos(A, KrylovParams(k=2, eta=0.1, seed=1))
        V = basis.basis
        assert spectral_norm(A - (A @ V) @ V.T) <= 1.1 * 1.0 + 1e-9
        assert 2.95 <= basis.singular_values[0] <= 3.0 + 1e-9
        assert 1.95 <= basis.singular_values[1] <= 2.0 + 1e-9

    @pytest.mark.parametrize("trial", range(10))
    def test_spectral_bound_against_oracle(self, trial):
        # small-scale spot check of the (1+eta) guarantee; the full 50-trial
        # sweep lives in the acceptance suite
        eta = 0.1
        A = np.random.default_rng(100 + trial).standard_normal((40, 12))
        sigma = exact_svd_oracle(A, k=6).singular_values
        basis = block_lanczos(A, KrylovParams(k=5, eta=eta, seed=200 + trial))
        V = basis.basis
        assert spectral_norm(A - (A @ V) @ V.T) <= (1 + eta) * sigma[5] + 1e-9

    def test_basis_orthonormal(self):
        A = np.random.default_rng(3).standard_normal((30, 12))
        basis = block_lanczos(A, KrylovParams(k=4, eta=0.3, seed=5))
        gram = basis.basis.T @ basis.basis
        assert np.max(np.abs(gram - np.eye(basis.k))) < 1e-8

    def test_residual_monotone_in_k(self):
        A = np.random.default_rng(9).standard_normal((40, 12))
        residuals = []
        for k in range(1, 6):
            V = block_lanczos(A, KrylovParams(k=k, eta=0.1, seed=7)).basis
            residuals.append(spectral_norm(A - (A @ V) @ V.T))
        assert all(a >= b - 1e-9 for a, b in zip(residuals, residuals[1:]))

    def test_projection_idempotent(self):
        A = np.random.default_rng(10).standard_normal((20, 8))
        V = block_lanczos(A, KrylovParams(k=3, eta=0.2, seed=11)).basis
        P = V @ V.T
        x = np.random.default_rng(12).standard_normal(8)
        np.testing.assert_allclose(P @ (P @ x), P @ x, atol=1e-10)

    def test_rank_too_large(self):
        with pytest.raises(DimensionError):
            block_lanczos(np.eye(3), KrylovParams(k=4, eta=0.5))

    def test_zero_matrix_propagates(self):
        with pytest.raises(ZeroMatrixError):
            block_lanczos(np.zeros((4, 3)), KrylovParams(k=1, eta=0.5))


class TestExactSvdOracle:
    def test_identity(self):
        basis = exact_svd_oracle(np.eye(3), k=2)
        np.testing.assert_allclose(basis.singular_values, [1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(basis.basis.T @ basis.basis, np.eye(2), atol=1e-12)

    def test_diagonal(self):
        basis = exact_svd_oracle(np.diag([5.0, 4.0, 3.0, 2.0]), k=4)
        np.testing.assert_allclose(basis.singular_values, [5.0, 4.0, 3.0, 2.0], atol=1e-12)

    def test_beats_random_competitors(self):
        rng = np.random.default_rng(14)
        A = rng.standard_normal((20, 12))
        V = exact_svd_oracle(A, k=6).basis
        ours = np.linalg.norm(A - (A @ V) @ V.T, 2)
        for _ in range(1000):
            W = np.linalg.qr(rng.standard_normal((12, 6)))[0]
            competitor = np.linalg.norm(A - (A @ W) @ W.T, 2)
            assert ours <= competitor + 1e-9

    def test_matches_lapack(self):
        # cross-check of the hand-rolled Jacobi against an unrelated solver
        A = np.random.default_rng(15).standard_normal((17, 9))
        np.testing.assert_allclose(
            exact_svd_oracle(A, k=9).singular_values,
            np.linalg.svd(A, compute_uv=False),
            atol=1e-10,
        )

    def test_rank_too_large(self):
        with pytest.raises(DimensionError):
            exact_svd_oracle(np.eye(3), k=4)


class TestSpectralNorm:
    def test_diagonal(self):
        assert spectral_norm(np.diag([3.0, 2.0])) == pytest.approx(3.0, rel=1e-8)

    def test_zero(self):
        assert spectral_norm(np.zeros((3, 4))) == 0.0

    def test_matches_oracle(self):
        A = np.random.default_rng(16).standard_normal((15, 7))
        top = exact_svd_oracle(A, k=1).singular_values[0]
        assert spectral_norm(A) == pytest.approx(top, abs=1e-6)


class TestParamsAndTypes:
    def test_krylov_params_validation(self):
        with pytest.raises(InvalidParamsError):
            KrylovParams(k=0, eta=0.5)
        with pytest.raises(InvalidParamsError):
            KrylovParams(k=1, eta=1.5)
        with pytest.raises(InvalidParamsError):
            KrylovParams(k=1, eta=0.5, r=0)

    def test_default_depth_clamps(self):
        assert default_depth(1, 0.99) == 2
        assert default_depth(2**100, 0.01) == 64
        assert default_depth(1024, 0.25) == 20  # ceil(10 / 0.5)

    def test_subspace_basis_rejects_non_orthonormal(self):
        with pytest.raises(InvalidParamsError):
            SubspaceBasis(dim=2, k=2, basis=np.ones((2, 2)), singular_values=[1, 1])

    def test_subspace_basis_rejects_unsorted_values(self):
        with pytest.raises(InvalidParamsError):
            SubspaceBasis(dim=2, k=2, basis=np.eye(2), singular_values=[1.0, 2.0])

    def test_subspace_basis_rejects_rank_above_dim(self):
        with pytest.raises(DimensionError):
            SubspaceBasis(dim=2, k=3, basis=np.ones((2, 3)), singular_values=[1, 1, 1])


@settings(deadline=None, max_examples=25)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_sketch_reproducible_for_any_seed(seed):
    assert np.array_equal(gaussian_sketch(6, 3, seed), gaussian_sketch(6, 3, seed))
