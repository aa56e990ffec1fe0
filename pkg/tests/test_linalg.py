import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from mfgmsfem.errors import InputError, PencilError, SolverError
from mfgmsfem.linalg import (PHI1_SERIES_THRESHOLD, PHI2_SERIES_THRESHOLD, EigenPencilDecomp,
                             SPDFactor, apply_phi1_pencil, csr_from_triplets, phi, phi_scalar,
                             smallest_generalized_eig, spd_solve, sym_generalized_eig)

from conftest import phi1_oracle, random_spd


# csr_from_triplets

def test_csr_identity():
    A = csr_from_triplets([0, 1], [0, 1], [1.0, 1.0], 2, 2)
    np.testing.assert_array_equal(A.toarray(), np.eye(2))


def test_csr_duplicates_summed():
    A = csr_from_triplets([0, 0], [0, 0], [1.0, 2.0], 1, 1)
    assert A.nnz == 1 and A[0, 0] == 3.0


def test_csr_empty():
    A = csr_from_triplets([], [], [], 3, 3)
    np.testing.assert_array_equal(A.indptr, [0, 0, 0, 0])
    assert A.shape == (3, 3)


def test_csr_zero_entries_kept_on_request():
    assert csr_from_triplets([0, 0], [1, 1], [1.0, -1.0], 2, 2).nnz == 0
    assert csr_from_triplets([0, 0], [1, 1], [1.0, -1.0], 2, 2, keep_zeros=True).nnz == 1


def test_csr_out_of_bounds():
    with pytest.raises(InputError):
        csr_from_triplets([2], [0], [1.0], 2, 2)
    with pytest.raises(InputError):
        csr_from_triplets([0], [-1], [1.0], 2, 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 5),
                          st.floats(-10, 10, allow_nan=False)), max_size=40))
def test_csr_round_trip(triplets):
    rows = [t[0] for t in triplets]
    cols = [t[1] for t in triplets]
    vals = [t[2] for t in triplets]
    A = csr_from_triplets(rows, cols, vals, 5, 6, keep_zeros=True)
    expected = np.zeros((5, 6))
    for r, c, v in triplets:
        expected[r, c] += v
    np.testing.assert_array_equal(A.toarray(), expected)
    # structural invariants
    assert A.indptr[0] == 0 and A.indptr[-1] == A.nnz
    assert np.all(np.diff(A.indptr) >= 0)
    for i in range(5):
        row = A.indices[A.indptr[i]:A.indptr[i + 1]]
        assert np.all(np.diff(row) > 0)


# spd_solve

def test_spd_solve_identity():
    x = spd_solve(sp.identity(3, format="csr"), np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(x, [1, 2, 3])


def test_spd_solve_2x2():
    x = spd_solve(sp.csr_matrix([[2.0, 1.0], [1.0, 2.0]]), np.array([3.0, 3.0]))
    np.testing.assert_allclose(x, [1.0, 1.0], rtol=1e-14)


def test_spd_solve_vs_dense_oracle(rng):
    n = 50
    B = rng.uniform(-1, 1, (n, n)) * (rng.random((n, n)) < 0.1)
    A = 0.5 * (B + B.T)
    A += np.diag(np.abs(A).sum(axis=1) + 1.0)
    b = rng.standard_normal(n)
    x = spd_solve(sp.csr_matrix(A), b, tol=1e-12)
    np.testing.assert_allclose(x, np.linalg.solve(A, b), rtol=0, atol=1e-9)
    assert np.linalg.norm(A @ x - b) <= 1e-12 * np.linalg.norm(b)


def test_spd_solve_dense_input_and_zero_rhs(rng):
    A = random_spd(rng, 10)
    np.testing.assert_array_equal(spd_solve(A, np.zeros(10)), np.zeros(10))
    b = rng.standard_normal(10)
    assert np.linalg.norm(A @ spd_solve(A, b) - b) <= 1e-10 * np.linalg.norm(b)


def test_spd_solve_bad_tol_and_shape():
    with pytest.raises(InputError):
        spd_solve(sp.identity(2, format="csr"), np.ones(2), tol=0.0)
    with pytest.raises(InputError):
        SPDFactor(sp.csr_matrix(np.ones((2, 3))))
    with pytest.raises(InputError):
        spd_solve(sp.identity(2, format="csr"), np.ones(3))


def test_spd_solve_indefinite_reports_residual():
    A = sp.csr_matrix([[1.0, 0.0], [0.0, -1.0]])
    factor = SPDFactor(A, tol=1e-10)
    factor._direct = False  # force the iterative path
    with pytest.raises(SolverError):
        factor.solve(np.array([1.0, 1.0]))


# sym_generalized_eig

def test_eig_diagonal_pencil():
    vals, vecs = sym_generalized_eig(np.diag([1.0, 2.0]), np.eye(2))
    np.testing.assert_allclose(vals, [1, 2])
    np.testing.assert_allclose(vecs, np.eye(2))


def test_eig_identity_pencil(rng):
    M = random_spd(rng, 12)
    vals, _ = sym_generalized_eig(M, M)
    np.testing.assert_allclose(vals, np.ones(12), rtol=1e-10)


def _cholesky_reduction_oracle(A, M):
    # independent route: L^-1 A L^-T via numpy only
    L = np.linalg.cholesky(M)
    Li = np.linalg.inv(L)
    return np.linalg.eigvalsh(Li @ A @ Li.T)


@pytest.mark.parametrize("n", [5, 40, 100])
def test_eig_random_pencil(rng, n):
    A = random_spd(rng, n)
    M = random_spd(rng, n, cond=50)
    vals, Q = sym_generalized_eig(A, M)
    assert np.all(np.diff(vals) >= 0)
    res = np.linalg.norm(A @ Q - (M @ Q) * vals, axis=0)
    assert res.max() <= 1e-8 * np.linalg.norm(A)
    assert np.abs(Q.T @ M @ Q - np.eye(n)).max() <= 1e-10
    np.testing.assert_allclose(vals, _cholesky_reduction_oracle(A, M), rtol=1e-9)
    # sign convention
    idx = np.argmax(np.abs(Q), axis=0)
    assert np.all(Q[idx, np.arange(n)] > 0)


def test_eig_subset_matches_full(rng):
    A, M = random_spd(rng, 30), random_spd(rng, 30, cond=10)
    full_vals, full_vecs = sym_generalized_eig(A, M)
    vals, vecs = sym_generalized_eig(A, M, subset=(0, 4))
    np.testing.assert_allclose(vals, full_vals[:5], rtol=1e-10)
    np.testing.assert_allclose(vecs, full_vecs[:, :5], atol=1e-8)


def test_eig_rejects_indefinite_mass():
    with pytest.raises(PencilError):
        sym_generalized_eig(np.eye(2), np.diag([1.0, -1.0]))
    with pytest.raises(InputError):
        sym_generalized_eig(np.eye(2), np.eye(3))


def test_sparse_eig_matches_dense(rng):
    n = 300
    main = 2.0 + rng.random(n)
    A = sp.diags([-np.ones(n - 1), main, -np.ones(n - 1)], [-1, 0, 1], format="csr")
    M = sp.diags([0.1 * np.ones(n - 1), np.ones(n), 0.1 * np.ones(n - 1)], [-1, 0, 1],
                 format="csr")
    vals, vecs = smallest_generalized_eig(A, M, 6, sigma=0.0)
    dvals, dvecs = sym_generalized_eig(A, M, subset=(0, 5))
    np.testing.assert_allclose(vals, dvals, rtol=1e-10)
    np.testing.assert_allclose(vecs, dvecs, atol=1e-7)
    assert np.abs(vecs.T @ (M @ vecs) - np.eye(6)).max() <= 1e-10


# phi functions

def test_phi1_special_values():
    assert phi_scalar(1, 0.0) == 1.0
    assert phi_scalar(1, -1.0) == pytest.approx(0.632120558829, rel=1e-12)
    assert phi_scalar(1, -1e-8) == pytest.approx(phi1_oracle(-1e-8), rel=1e-12)
    assert phi_scalar(1, -1e-8) == pytest.approx(0.999999995, rel=1e-12)


def test_phi0_and_phi2():
    assert phi_scalar(0, -2.0) == pytest.approx(math.exp(-2.0), rel=1e-15)
    assert phi_scalar(2, 0.0) == 0.5
    z = -3.0
    assert phi_scalar(2, z) == pytest.approx((math.expm1(z) / z - 1.0) / z, rel=1e-14)
    with pytest.raises(InputError):
        phi(3, 1.0)


@pytest.mark.parametrize("p,threshold", [(1, PHI1_SERIES_THRESHOLD), (2, PHI2_SERIES_THRESHOLD)])
def test_phi_branch_continuity(p, threshold):
    below = np.nextafter(-threshold, 0.0)
    series = phi(p, np.array([below]))[0]
    direct = phi(p, np.array([-threshold]))[0]
    assert abs(series - direct) <= 1e-12 * abs(direct)


def test_phi2_recurrence_against_oracle():
    import mpmath

    for z in (-1e-7, -1e-3, -0.5, -20.0, -1e4):
        with mpmath.workdps(50):
            zz = mpmath.mpf(z)
            ref = float(((mpmath.expm1(zz) / zz) - 1) / zz)
        assert phi_scalar(2, z) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-1e6, max_value=0.0, allow_nan=False))
def test_phi1_property_against_oracle(z):
    assert phi_scalar(1, z) == pytest.approx(phi1_oracle(z), rel=1e-12)


def test_phi_vectorized_shape():
    z = np.linspace(-5, 0, 12).reshape(3, 4)
    assert phi(1, z).shape == (3, 4)


# pencil application

def test_apply_phi1_zero_pencil_is_identity(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    d = EigenPencilDecomp(np.zeros(6), Q, np.eye(6))
    r = rng.standard_normal(6)
    np.testing.assert_allclose(apply_phi1_pencil(d, r), r, atol=1e-14)


def test_apply_phi1_scalar_pencil():
    from mfgmsfem.timeint import coarse_pencil_eig

    d = coarse_pencil_eig(np.array([[2.0]]), np.array([[2.0]]), 1.0)
    assert d.eigenvalues[0] == pytest.approx(-1.0)
    assert abs(d.eigenvectors[0, 0]) == pytest.approx(1 / math.sqrt(2))
    out = apply_phi1_pencil(d, np.array([3.0]))
    assert out[0] == pytest.approx((1 - math.exp(-1)) / 2 * 3.0, rel=1e-14)


def test_apply_phi1_vs_dense_matrix_function(rng):
    from mfgmsfem.timeint import coarse_pencil_eig

    n, tau = 20, 0.3
    M0 = random_spd(rng, n, cond=20)
    A0 = random_spd(rng, n, cond=1e3)
    d = coarse_pencil_eig(M0, A0, tau)
    r = rng.standard_normal(n)
    # oracle: phi_1(-tau M0^-1 A0) M0^-1 r through the eigendecomposition of the
    # nonsymmetric matrix N = M0^-1 A0
    N = np.linalg.solve(M0, A0)
    w, V = np.linalg.eig(-tau * N)
    w, V = w.real, V.real
    phiN = V @ np.diag(np.expm1(w) / w) @ np.linalg.inv(V)
    expected = phiN @ np.linalg.solve(M0, r)
    np.testing.assert_allclose(apply_phi1_pencil(d, r), expected, rtol=1e-10, atol=1e-12)


def test_apply_phi1_linearity_and_errors(rng):
    from mfgmsfem.timeint import coarse_pencil_eig

    d = coarse_pencil_eig(random_spd(rng, 8), random_spd(rng, 8), 0.1)
    r1, r2 = rng.standard_normal(8), rng.standard_normal(8)
    lhs = apply_phi1_pencil(d, 2.0 * r1 - 3.0 * r2)
    rhs = 2.0 * apply_phi1_pencil(d, r1) - 3.0 * apply_phi1_pencil(d, r2)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-13)
    block = apply_phi1_pencil(d, np.column_stack([r1, r2]))
    np.testing.assert_allclose(block[:, 1], apply_phi1_pencil(d, r2), rtol=1e-14)
    with pytest.raises(InputError):
        apply_phi1_pencil(d, np.ones(7))


def test_with_tau_rescales(rng):
    d = EigenPencilDecomp(np.array([-2.0, -1.0]), np.eye(2), np.eye(2), tau=1.0)
    d2 = d.with_tau(0.5)
    np.testing.assert_allclose(d2.eigenvalues, [-1.0, -0.5])
    assert d2.tau == 0.5
