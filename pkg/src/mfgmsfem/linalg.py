"""
Sparse and dense linear algebra used throughout the package.

Sparse matrices are :class:`scipy.sparse.csr_matrix` with sorted column
indices and no duplicate entries; dense matrices are 2-D ``numpy`` arrays.
"""
from dataclasses import dataclass
from math import factorial
import logging

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InputError, PencilError, SolverError

log = logging.getLogger(__name__)

# below this |z| the phi-functions switch to their Taylor series
PHI1_SERIES_THRESHOLD = 1e-5
PHI2_SERIES_THRESHOLD = 1e-2


def csr_from_triplets(rows, cols, values, n_rows, n_cols, keep_zeros=False):
    """Build a CSR matrix from coordinate triplets, summing duplicates.

    Parameters
    ----------
    rows, cols : array_like of int
    values : array_like of float
    n_rows, n_cols : int
    keep_zeros : bool
        Keep entries whose (summed) value is exactly zero.
    """
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if not (rows.size == cols.size == values.size):
        raise InputError("rows, cols and values must have equal length")
    if rows.size and (rows.min() < 0 or rows.max() >= n_rows
                      or cols.min() < 0 or cols.max() >= n_cols):
        raise InputError(f"triplet index outside a {n_rows}x{n_cols} matrix")
    mat = sp.coo_matrix((values, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
    mat.sum_duplicates()
    if not keep_zeros:
        mat.eliminate_zeros()
    mat.sort_indices()
    return mat


class SPDFactor:
    """Factor-once solver for a symmetric positive definite matrix.

    Sparse input is factored with SuperLU in symmetric mode; dense input
    with a Cholesky factorization.  ``solve`` checks the residual against
    ``tol`` and falls back to Jacobi-preconditioned CG when the direct
    solution misses it.
    """

    def __init__(self, A, tol=1e-10):
        if A.shape[0] != A.shape[1]:
            raise InputError(f"matrix must be square, got {A.shape}")
        self.A = A
        self.tol = tol
        self.n = A.shape[0]
        self._sparse = sp.issparse(A)
        try:
            if self._sparse:
                self._lu = spla.splu(
                    sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0, options={"SymmetricMode": True})
            else:
                self._cho = sla.cho_factor(np.asarray(A), lower=True)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            log.warning("direct factorization failed (%s); using PCG", exc)
            self._lu = None
            self._cho = None
            self._direct = False
        else:
            self._direct = True

    def _direct_solve(self, b):
        if self._sparse:
            return self._lu.solve(b)
        return sla.cho_solve(self._cho, b)

    def _pcg(self, b, x0=None):
        diag = self.A.diagonal()
        if np.any(diag <= 0):
            raise SolverError("matrix has a nonpositive diagonal; not SPD")
        precond = spla.LinearOperator(self.A.shape, matvec=lambda v: v / diag)
        x, info = spla.cg(self.A, b, x0=x0, rtol=self.tol, atol=0.0,
                          maxiter=10 * self.n, M=precond)
        res = np.linalg.norm(b - self.A @ x)
        if info != 0 or res > self.tol * np.linalg.norm(b):
            raise SolverError(f"PCG did not converge (info={info}, "
                              f"residual={res:.3e})", residual=res)
        return x

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise InputError(f"rhs length {b.shape[0]} != matrix size {self.n}")
        if self.n == 0:
            return b.copy()
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b)
        x = self._direct_solve(b) if self._direct else None
        if x is not None:
            r = b - self.A @ x
            if np.linalg.norm(r) <= self.tol * bnorm:
                return x
            # one step of iterative refinement before giving up on the factor
            x = x + self._direct_solve(r)
            if np.linalg.norm(b - self.A @ x) <= self.tol * bnorm:
                return x
        if b.ndim > 1:
            return np.column_stack([self._pcg(col) for col in b.T])
        return self._pcg(b, x0=x)


def spd_solve(A, rhs, tol=1e-10):
    """Solve ``A x = rhs`` for SPD ``A`` with ``||A x - rhs|| <= tol ||rhs||``."""
    if tol <= 0:
        raise InputError("tol must be positive")
    return SPDFactor(A, tol=tol).solve(rhs)


def _fix_signs(vectors):
    # largest-magnitude component of every column made positive; ties go to the first index
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_generalized_eig(A, M, subset=None):
    """Solve the symmetric-definite pencil ``A q = lam M q``.

    Parameters
    ----------
    A : (n, n) array_like
        Symmetric matrix (dense or sparse).
    M : (n, n) array_like
        Symmetric positive definite matrix.
    subset : (int, int), optional
        Inclusive index range of eigenpairs to return (ascending order).

    Returns
    -------
    eigenvalues : ndarray
        Ascending.
    eigenvectors : ndarray
        Columns are M-orthonormal, sign-normalized so the largest-magnitude
        entry of each column is positive.
    """
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    M = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
    if A.shape != M.shape or A.shape[0] != A.shape[1]:
        raise InputError(f"pencil shapes differ: {A.shape} vs {M.shape}")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise PencilError("mass matrix of the pencil is not positive definite") from exc
    vals, vecs = sla.eigh(A, M, subset_by_index=subset)
    return vals, _fix_signs(vecs)


def smallest_generalized_eig(A, M, k, sigma=None, tol=1e-12):
    """Lowest ``k`` eigenpairs of a large sparse pencil via shift-invert Lanczos.

    The Ritz vectors are post-processed by a Rayleigh-Ritz step so that the
    returned vectors are M-orthonormal to machine precision.
    """
    n = A.shape[0]
    if k >= n - 1:
        return sym_generalized_eig(A, M, subset=(0, k - 1))
    A = sp.csc_matrix(A)
    M = sp.csc_matrix(M)
    if sigma is None:
        sigma = -1.0
    v0 = np.ones(n) + np.linspace(0.0, 1e-3, n)
    try:
        _, vecs = spla.eigsh(A, k=k, M=M, sigma=sigma, which="LM", v0=v0, tol=tol)
    except RuntimeError as exc:
        raise PencilError(f"sparse eigensolver failed: {exc}") from exc
    red_a = vecs.T @ (A @ vecs)
    red_m = vecs.T @ (M @ vecs)
    red_a = 0.5 * (red_a + red_a.T)
    red_m = 0.5 * (red_m + red_m.T)
    vals, y = sla.eigh(red_a, red_m)
    return vals, _fix_signs(vecs @ y)


def phi(p, z):
    """phi-function of order ``p`` in {0, 1, 2}, elementwise on ``z``.

    phi_0(z) = exp(z) and phi_{p+1}(z) = (phi_p(z) - 1/p!) / z, extended
    continuously to z = 0 by phi_p(0) = 1/p!.
    """
    z = np.asarray(z, dtype=float)
    if p == 0:
        return np.exp(z)
    if p not in (1, 2):
        raise InputError(f"phi order must be 0, 1 or 2, got {p}")
    out = np.empty_like(z)
    az = np.abs(z)
    if p == 1:
        small = az < PHI1_SERIES_THRESHOLD
        zs = z[small]
        # 8-term Taylor series sum z^k / (k+1)!, Horner form
        acc = np.full_like(zs, 1.0 / factorial(8))
        for k in range(6, -1, -1):
            acc = acc * zs + 1.0 / factorial(k + 1)
        out[small] = acc
        zl = z[~small]
        out[~small] = np.expm1(zl) / zl
    else:
        small = az < PHI2_SERIES_THRESHOLD
        zs = z[small]
        acc = np.full_like(zs, 1.0 / factorial(13))
        for k in range(10, -1, -1):
            acc = acc * zs + 1.0 / factorial(k + 2)
        out[small] = acc
        zl = z[~small]
        out[~small] = (np.expm1(zl) / zl - 1.0) / zl
    return out


def phi_scalar(p, z):
    """Scalar convenience wrapper around :func:`phi`."""
    return float(phi(p, np.array([z]))[0])


@dataclass(frozen=True)
class EigenPencilDecomp:
    """Eigendecomposition ``-tau A0 Q = M0 Q D`` with ``Q^T M0 Q = I``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mass: object
    tau: float = 1.0

    def with_tau(self, tau):
        """Same decomposition for another step size (D scales linearly in tau)."""
        return EigenPencilDecomp(self.eigenvalues * (tau / self.tau),
                                 self.eigenvectors, self.mass, tau)

    def phi_diag(self, p=1):
        return phi(p, self.eigenvalues)


def apply_phi1_pencil(decomp, r):
    """Return ``Q phi_1(D) Q^T r``."""
    r = np.asarray(r, dtype=float)
    Q = decomp.eigenvectors
    if r.shape[0] != Q.shape[0]:
        raise InputError(f"vector of length {r.shape[0]} for a pencil of size {Q.shape[0]}")
    weights = decomp.phi_diag(1)
    if r.ndim == 2:
        weights = weights[:, None]
    return Q @ (weights * (Q.T @ r))
