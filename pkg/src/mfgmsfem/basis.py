"""
Local spectral bases, meshfree shape functions and the projection matrix
onto the multiscale space.
"""
from dataclasses import dataclass
import logging

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .coarsening import PointCloud
from .errors import CoverageError, InputError, SpaceConstructionError
from .fem import local_matrices
from .linalg import csr_from_triplets, smallest_generalized_eig, sym_generalized_eig

log = logging.getLogger(__name__)

# neighborhoods with at most this many DOFs use the dense eigensolver
DENSE_EIG_LIMIT = 600


@dataclass(frozen=True, eq=False)
class LocalEigenBasis:
    """Lowest eigenpairs of ``-div(kappa grad psi) = lam kappa psi`` on one neighborhood.

    ``eigenvalues`` and ``eigenvectors`` may hold more pairs than the
    ``n_b`` retained ones; the extra pair feeds the interpolation bound.
    """

    index: int
    nodes: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_b: int
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix

    @property
    def retained(self):
        return self.eigenvectors[:, :self.n_b]

    def truncated(self, n_b):
        if n_b > self.eigenvalues.size:
            raise InputError(f"only {self.eigenvalues.size} eigenpairs available, asked for {n_b}")
        return LocalEigenBasis(self.index, self.nodes, self.eigenvalues, self.eigenvectors,
                               n_b, self.stiffness, self.mass)


def local_spectral_basis(nbhd, index, mesh, kappa, n_b, n_extra=1):
    """Solve the Neumann spectral problem on neighborhood ``index``.

    Computes ``n_b + n_extra`` eigenpairs (fewer if the neighborhood is
    smaller) normalized so that ``int kappa psi^2 = 1``.
    """
    cells = nbhd.cells[index]
    nodes, A, M = local_matrices(mesh, kappa, cells)
    n = nodes.size
    if n_b > n:
        raise InputError(f"neighborhood {index} has {n} DOFs, fewer than n_b={n_b}")
    k = min(n_b + n_extra, n)
    if n <= DENSE_EIG_LIMIT:
        vals, vecs = sym_generalized_eig(A, M, subset=(0, k - 1))
    else:
        diam = 2.0 * float(np.max(np.linalg.norm(
            mesh.vertices[nodes] - mesh.vertices[nodes].mean(axis=0), axis=1)))
        vals, vecs = smallest_generalized_eig(A, M, k, sigma=-1.0 / diam ** 2)
    return LocalEigenBasis(index, nodes, vals, vecs, n_b, A, M)


def local_spectral_bases(nbhd, mesh, kappa, n_b, n_extra=1):
    return [local_spectral_basis(nbhd, i, mesh, kappa, n_b, n_extra) for i in range(len(nbhd))]


def cubic_spline_kernel(r):
    """Compactly supported cubic spline of the normalized distance ``r``."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inner = r <= 0.5
    outer = (r > 0.5) & (r < 1.0)
    out[inner] = 2.0 * (2.0 / 3.0 + 4.0 * (r[inner] - 1.0) * r[inner] ** 2)
    out[outer] = 2.0 * (4.0 / 3.0) * (1.0 - r[outer]) ** 3
    return out


def shape_functions(nbhd, mesh):
    """Shepard partition of unity at the fine nodes.

    Parameters
    ----------
    nbhd : Neighborhoods or PointCloud
        With neighborhoods, kernel ``i`` is cut off outside the node set of
        ``S_i`` before normalization so that ``W_i`` is supported in ``S_i``.
        A bare point cloud (with radii) uses the kernel supports as they are.
    mesh : FineMesh

    Returns
    -------
    csc_matrix
        ``(n_nodes, n_points)``; column ``i`` holds ``W_i``.
    """
    if isinstance(nbhd, PointCloud):
        cloud = nbhd
        if cloud.radii is None:
            raise InputError("point cloud has no radii")
        tree = cKDTree(mesh.vertices)
        node_sets = [np.asarray(sorted(tree.query_ball_point(x, r)), dtype=np.int64)
                     for x, r in zip(cloud.points, cloud.radii)]
    else:
        cloud = nbhd.cloud
        node_sets = nbhd.nodes
    rows, cols, vals = [], [], []
    for i, nodes in enumerate(node_sets):
        d = np.linalg.norm(mesh.vertices[nodes] - cloud.points[i], axis=1)
        w = cubic_spline_kernel(d / cloud.radii[i])
        keep = w > 0
        rows.append(nodes[keep])
        cols.append(np.full(keep.sum(), i))
        vals.append(w[keep])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    total = np.bincount(rows, vals, minlength=mesh.n_nodes)
    bad = np.flatnonzero(total <= 0)
    if bad.size:
        raise CoverageError(f"{bad.size} fine nodes lie outside every kernel support "
                            f"(first: {bad[:10].tolist()})", bad)
    vals = vals / total[rows]
    W = csr_from_triplets(rows, cols, vals, mesh.n_nodes, cloud.n_points)
    return W.tocsc()


@dataclass(frozen=True, eq=False)
class MultiscaleSpace:
    """Projection ``R0`` (coarse rows by interior fine DOFs) and row bookkeeping.

    ``labels[r] = (i, k)``: row ``r`` is ``W_i psi_k`` on the interior nodes.
    """

    R0: sp.csr_matrix
    labels: np.ndarray
    dropped: tuple = ()
    shapes: object = None

    @property
    def n_coarse(self):
        return self.R0.shape[0]

    @property
    def n_fine(self):
        return self.R0.shape[1]

    def prolongate(self, coarse):
        coarse = np.asarray(coarse, dtype=float)
        if coarse.shape[0] != self.n_coarse:
            raise InputError(f"expected {self.n_coarse} coarse values, got {coarse.shape[0]}")
        return self.R0.T @ coarse

    def restrict(self, fine):
        fine = np.asarray(fine, dtype=float)
        if fine.shape[0] != self.n_fine:
            raise InputError(f"expected {self.n_fine} fine values, got {fine.shape[0]}")
        return self.R0 @ fine


def build_multiscale_space(bases, shapes, mesh, mass=None):
    """Stack the nodal values of ``W_i psi_k`` on interior DOFs into ``R0``.

    Rows with a vanishing interior trace are dropped.  When ``mass`` (the
    reduced fine mass) is given, ``R0 M R0^T`` is checked for positive
    definiteness.
    """
    shapes = sp.csc_matrix(shapes)
    rows, cols, vals, labels, dropped = [], [], [], [], []
    r = 0
    for basis in bases:
        i = basis.index
        w = shapes[:, i].toarray().ravel()[basis.nodes]
        red = mesh.reduced_index[basis.nodes]
        inner = red >= 0
        for k in range(basis.n_b):
            v = (w * basis.eigenvectors[:, k])[inner]
            nz = v != 0
            if not nz.any():
                dropped.append((i, k))
                log.info("dropping basis function (%d, %d): zero on interior nodes", i, k)
                continue
            rows.append(np.full(nz.sum(), r))
            cols.append(red[inner][nz])
            vals.append(v[nz])
            labels.append((i, k))
            r += 1
    if r == 0:
        raise SpaceConstructionError("multiscale space is empty")
    R0 = csr_from_triplets(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                           r, mesh.n_interior)
    space = MultiscaleSpace(R0, np.array(labels, dtype=np.int64).reshape(-1, 2),
                            tuple(dropped), shapes)
    if mass is not None:
        M0 = (R0 @ mass @ R0.T).toarray()
        try:
            np.linalg.cholesky(0.5 * (M0 + M0.T))
        except np.linalg.LinAlgError:
            w, v = np.linalg.eigh(M0)
            worst = np.argsort(-np.abs(v[:, 0]))[:5]
            culprits = [tuple(space.labels[j]) for j in worst]
            raise SpaceConstructionError(
                f"coarse mass matrix is singular (min eigenvalue {w[0]:.3e}); "
                f"suspect rows {culprits}", culprits) from None
    return space


def coarse_matrices(space, M, A):
    """Galerkin triple products ``R0 M R0^T`` and ``R0 A R0^T`` (exactly symmetric)."""
    R0 = space.R0
    if M.shape != (space.n_fine, space.n_fine) or A.shape != M.shape:
        raise InputError(f"fine matrices {M.shape}, {A.shape} do not match R0 {R0.shape}")
    out = []
    for mat in (M, A):
        prod = (R0 @ (sp.csr_matrix(mat) @ R0.T)).tocsr()
        out.append(((prod + prod.T) * 0.5).tocsr())
    return out[0], out[1]


@dataclass(frozen=True)
class InterpolantCheck:
    index: int
    lhs: float
    energy: float
    lam_next: float
    vacuous: bool

    @property
    def holds(self):
        return self.vacuous or self.lhs <= self.energy / self.lam_next + 1e-9


def coarse_interpolant_report(space, bases, u, kappa, mesh):
    """Local kappa-projections of ``u`` and the truncation-bound check per neighborhood.

    Returns ``(I0u, checks)`` where ``I0u`` is the full nodal vector
    ``sum_i W_i I^{S_i} u`` (``None`` if ``space`` carries no shape
    functions) and ``checks`` lists one :class:`InterpolantCheck` per
    neighborhood.  The local kappa-weighted matrices come from the bases;
    ``kappa`` is kept in the signature for symmetry with assembly routines.
    """
    shapes = space.shapes
    u = np.asarray(u, dtype=float)
    if u.shape[0] != mesh.n_nodes:
        raise InputError(f"expected {mesh.n_nodes} nodal values, got {u.shape[0]}")
    checks = []
    i0u = np.zeros(mesh.n_nodes) if shapes is not None else None
    if shapes is not None:
        shapes = sp.csc_matrix(shapes)
    for basis in bases:
        ul = u[basis.nodes]
        psi = basis.retained
        coef = psi.T @ (basis.mass @ ul)
        proj = psi @ coef
        diff = ul - proj
        lhs = float(diff @ (basis.mass @ diff))
        energy = float(ul @ (basis.stiffness @ ul))
        if basis.eigenvalues.size > basis.n_b:
            lam = float(basis.eigenvalues[basis.n_b])
        else:
            lam = 0.0
        checks.append(InterpolantCheck(basis.index, lhs, energy, lam, lam <= 1e-12))
        if shapes is not None:
            w = shapes[:, basis.index].toarray().ravel()[basis.nodes]
            i0u[basis.nodes] += w * proj
    return i0u, checks
