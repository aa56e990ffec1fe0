"""
Meshfree coarse scale: density field, CVT point cloud, radii and overlapping
neighborhoods built from unions of fine cells.
"""
from dataclasses import dataclass, replace
import logging
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import CoverageError, InputError
from .fem import apply_dirichlet, assemble_mass, assemble_stiffness
from .linalg import spd_solve

log = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-6


def compute_density(mesh, kappa, p0, beta, floor=DENSITY_FLOOR):
    """Smoothed density ``rho`` from ``(M + beta A) rho = M p0``, ``rho = 0`` on the boundary.

    The result is scaled to unit maximum and clamped from below by ``floor``
    so that no region gets zero CVT weight.
    """
    if beta < 0:
        raise InputError(f"beta must be >= 0, got {beta}")
    p0 = np.asarray(p0, dtype=float)
    mass = assemble_mass(mesh)
    system = mass + beta * assemble_stiffness(mesh, kappa) if beta > 0 else mass
    K, rhs = apply_dirichlet(system, mass @ p0, mesh)
    rho = mesh.to_full(spd_solve(K, rhs, tol=1e-10))
    peak = rho.max()
    if peak > 0:
        rho = rho / peak
    return np.maximum(rho, floor)


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    radii: np.ndarray = None
    seed: int = 0
    gamma: float = None
    # 0 free, 1 slides along x (y fixed), 2 slides along y (x fixed), 3 fixed corner
    constraint: np.ndarray = None

    @property
    def n_points(self):
        return self.points.shape[0]


def _initial_points(n_points, rng, boundary):
    if boundary and n_points >= 4:
        k = math.ceil(math.sqrt(n_points))
        g = np.linspace(0.0, 1.0, k)
        X, Y = np.meshgrid(g, g)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        on_x = np.isin(pts[:, 0], (0.0, 1.0))
        on_y = np.isin(pts[:, 1], (0.0, 1.0))
        constraint = np.zeros(len(pts), dtype=np.int8)
        constraint[on_y & ~on_x] = 1
        constraint[on_x & ~on_y] = 2
        constraint[on_x & on_y] = 3
        spacing = 1.0 / (k - 1)
    else:
        k = math.ceil(math.sqrt(n_points))
        g = (np.arange(k) + 0.5) / k
        X, Y = np.meshgrid(g, g)
        pts = np.column_stack([X.ravel(), Y.ravel()])
        constraint = np.zeros(len(pts), dtype=np.int8)
        spacing = 1.0 / k

    extra = len(pts) - n_points
    if extra > 0:
        # drop surplus points, interior ones first
        order = np.r_[rng.permutation(np.flatnonzero(constraint == 0)),
                      rng.permutation(np.flatnonzero(constraint == 1)),
                      rng.permutation(np.flatnonzero(constraint == 2))]
        keep = np.sort(np.setdiff1d(np.arange(len(pts)), order[:extra]))
        pts, constraint = pts[keep], constraint[keep]

    jitter = rng.uniform(-0.25 * spacing, 0.25 * spacing, size=pts.shape)
    jitter[constraint == 1, 1] = 0.0
    jitter[constraint == 2, 0] = 0.0
    jitter[constraint == 3] = 0.0
    pts = np.clip(pts + jitter, 0.0, 1.0)
    return pts, constraint


def generate_point_cloud(density, mesh, n_points, seed=0, max_iters=100,
                         boundary=True, tol=1e-6):
    """Density-weighted discrete Lloyd iteration over fine-cell centroids.

    Parameters
    ----------
    density : ndarray
        Nodal density (length ``mesh.n_nodes``).
    boundary : bool
        Start from a grid that includes the domain boundary; points placed on
        an edge only slide along it and corner points stay fixed.  With
        ``False`` the initial grid is interior and all points move freely.
    """
    n_points = int(n_points)
    if n_points < 1:
        raise InputError("n_points must be >= 1")
    if n_points > mesh.n_cells:
        raise InputError(f"{n_points} points exceed the {mesh.n_cells} fine cells")
    density = np.asarray(density, dtype=float)
    if density.shape[0] != mesh.n_nodes:
        raise InputError("density must be a full nodal vector")

    rng = np.random.default_rng(seed)
    pts, constraint = _initial_points(n_points, rng, boundary)
    centroids = mesh.centroids
    weights = density[mesh.triangles].mean(axis=1) * mesh.areas
    wx = weights * centroids[:, 0]
    wy = weights * centroids[:, 1]

    for it in range(max_iters):
        _, owner = cKDTree(pts).query(centroids)
        wsum = np.bincount(owner, weights, minlength=n_points)
        cx = np.bincount(owner, wx, minlength=n_points)
        cy = np.bincount(owner, wy, minlength=n_points)
        new = pts.copy()
        active = wsum > 0
        new[active, 0] = cx[active] / wsum[active]
        new[active, 1] = cy[active] / wsum[active]
        new[constraint == 1, 1] = pts[constraint == 1, 1]
        new[constraint == 2, 0] = pts[constraint == 2, 0]
        new[constraint == 3] = pts[constraint == 3]
        move = np.max(np.linalg.norm(new - pts, axis=1))
        pts = new
        if move < tol:
            log.debug("Lloyd converged after %d iterations", it + 1)
            break
    return PointCloud(points=pts, seed=seed, constraint=constraint)


def compute_radii(cloud, gamma):
    """``r_i = gamma * (distance from x_i to its nearest other point)``."""
    if not gamma > 1:
        raise InputError(f"gamma must be > 1 for the neighborhoods to cover the domain, got {gamma}")
    if cloud.n_points < 2:
        raise InputError("radii need at least two points")
    dist, _ = cKDTree(cloud.points).query(cloud.points, k=2)
    return gamma * dist[:, 1]


def with_radii(cloud, gamma):
    return replace(cloud, radii=compute_radii(cloud, gamma), gamma=float(gamma))


@dataclass(frozen=True, eq=False)
class Neighborhoods:
    """Overlapping neighborhoods, one per coarse point.

    ``cells[i]`` are fine-cell indices, ``nodes[i]`` the sorted full node
    indices they touch and ``interior[i]`` the positions of the non-boundary
    nodes in the reduced (interior) numbering.  ``cloud`` carries the radii
    after coverage repair.
    """

    cells: list
    nodes: list
    interior: list
    cloud: PointCloud
    repair_rounds: int = 0

    def __len__(self):
        return len(self.cells)

    def incidence(self, n_cells):
        """Sparse (n_cells, n_neighborhoods) 0/1 membership matrix."""
        rows = np.concatenate(self.cells)
        cols = np.repeat(np.arange(len(self.cells)), [c.size for c in self.cells])
        return sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n_cells, len(self.cells)))

    def cover_count(self, n_cells):
        return np.bincount(np.concatenate(self.cells), minlength=n_cells)


def _neighborhood_cells(mesh, tree, center, radius, anchor):
    # a centroid is never farther than the farthest vertex, so this search is exhaustive
    cand = np.asarray(tree.query_ball_point(center, radius), dtype=np.int64)
    if cand.size:
        far = np.max(np.linalg.norm(mesh.cell_coords[cand] - center, axis=2), axis=1)
        cand = cand[far <= radius]
    cells = np.union1d(cand, [anchor])
    if cells.size > 1:
        sub = mesh.cell_adjacency[cells][:, cells]
        _, labels = connected_components(sub, directed=False)
        pos = np.searchsorted(cells, anchor)
        cells = cells[labels == labels[pos]]
    return cells


def build_neighborhoods(mesh, cloud, max_repairs=20, growth=1.1):
    """Cells whose farthest vertex lies within ``r_i`` of ``x_i``.

    Each neighborhood is the connected component containing the fine cell
    nearest to its point.  If some cell is left uncovered every radius is
    multiplied by ``growth`` and membership recomputed, at most
    ``max_repairs`` times.
    """
    if cloud.radii is None:
        raise InputError("point cloud has no radii; call with_radii first")
    tree = cKDTree(mesh.centroids)
    _, anchors = tree.query(cloud.points)
    radii = np.asarray(cloud.radii, dtype=float).copy()
    for rounds in range(max_repairs + 1):
        cells = [_neighborhood_cells(mesh, tree, x, r, a)
                 for x, r, a in zip(cloud.points, radii, anchors)]
        count = np.bincount(np.concatenate(cells), minlength=mesh.n_cells)
        uncovered = np.flatnonzero(count == 0)
        if uncovered.size == 0:
            break
        if rounds == max_repairs:
            raise CoverageError(
                f"{uncovered.size} fine cells still uncovered after {max_repairs} "
                f"radius repairs (first: {uncovered[:10].tolist()})", uncovered)
        log.info("coverage repair %d: %d uncovered cells, scaling radii by %g",
                 rounds + 1, uncovered.size, growth)
        radii *= growth
    nodes = [np.unique(mesh.triangles[c]) for c in cells]
    interior = [mesh.reduced_index[n][mesh.reduced_index[n] >= 0] for n in nodes]
    return Neighborhoods(cells, nodes, interior, replace(cloud, radii=radii), rounds)


@dataclass(frozen=True)
class CoverReport:
    covered: bool
    c_ov: int
    delta: float
    lambda_max_overlap: float
    # largest number of neighborhoods meeting any single one (diagonal included)
    max_overlap_degree: int = 0

    def to_dict(self):
        return {
            "covered": self.covered,
            "C_ov": self.c_ov,
            "delta": self.delta if math.isfinite(self.delta) else None,
            "lambda_max_overlap": self.lambda_max_overlap,
            "max_overlap_degree": self.max_overlap_degree,
        }


def _point_segment_distance(points, a, b):
    # (P, 2) points against (S, 2) segments -> (P,) minimum distances
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    ap = points[:, None, :] - a[None]
    t = np.clip(np.einsum("psk,sk->ps", ap, ab) / denom, 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    return np.min(np.linalg.norm(points[:, None, :] - closest, axis=2), axis=1)


def neighborhoods_from_cells(mesh, cells, cloud=None):
    """Wrap explicit per-neighborhood cell lists (no radius rule, no repair)."""
    cells = [np.unique(np.asarray(c, dtype=np.int64)) for c in cells]
    for c in cells:
        if c.size == 0 or c[0] < 0 or c[-1] >= mesh.n_cells:
            raise InputError("neighborhood cell lists must be nonempty and within the mesh")
    nodes = [np.unique(mesh.triangles[c]) for c in cells]
    interior = [mesh.reduced_index[n][mesh.reduced_index[n] >= 0] for n in nodes]
    return Neighborhoods(cells, nodes, interior, cloud, 0)


def overlap_distances(nbhd, mesh):
    """Per-neighborhood overlap width measured from cell centroids.

    ``delta_i`` is the distance from the centroids of the cells that belong
    to ``S_i`` only, to the part of the boundary of ``S_i`` interior to the
    domain.  It is 0 when ``S_i`` has no exclusive cells and ``inf`` when
    ``S_i`` has no interior boundary.
    """
    count = nbhd.cover_count(mesh.n_cells)
    edge_nodes, edge_cells = mesh.edges
    inner = edge_cells[:, 1] >= 0
    edge_nodes, edge_cells = edge_nodes[inner], edge_cells[inner]
    deltas = np.empty(len(nbhd))
    for i, cells in enumerate(nbhd.cells):
        exclusive = cells[count[cells] == 1]
        if exclusive.size == 0:
            deltas[i] = 0.0
            continue
        member = np.zeros(mesh.n_cells, dtype=bool)
        member[cells] = True
        on_bnd = member[edge_cells[:, 0]] != member[edge_cells[:, 1]]
        if not on_bnd.any():
            deltas[i] = math.inf
            continue
        seg = edge_nodes[on_bnd]
        a = mesh.vertices[seg[:, 0]]
        b = mesh.vertices[seg[:, 1]]
        pts = mesh.centroids[exclusive]
        best = math.inf
        for start in range(0, pts.shape[0], 512):
            best = min(best, float(_point_segment_distance(pts[start:start + 512], a, b).min()))
        deltas[i] = best
    return deltas


def overlap_matrix(nbhd, n_cells):
    """0/1 matrix with entry (i, j) = 1 iff ``S_i`` and ``S_j`` share a fine cell."""
    B = nbhd.incidence(n_cells)
    E = (B.T @ B).tocsr()
    E.data[:] = 1.0
    return E


def overlap_spectral_bound(nbhd, n_cells, tol=1e-13, max_iters=20000):
    """Largest eigenvalue of the overlap matrix by power iteration."""
    E = overlap_matrix(nbhd, n_cells)
    n = E.shape[0]
    if n == 0:
        return 0.0
    x = np.ones(n) / math.sqrt(n)
    lam = 0.0
    for _ in range(max_iters):
        y = E @ x
        new = float(x @ y)
        x = y / np.linalg.norm(y)
        if abs(new - lam) <= tol * abs(new):
            return new
        lam = new
    log.warning("power iteration stagnated; returning %.12g", lam)
    return lam


def coverage_diagnostics(nbhd, mesh):
    count = nbhd.cover_count(mesh.n_cells)
    covered = bool(np.all(count >= 1))
    c_ov = int(count.max()) if count.size else 0
    deltas = overlap_distances(nbhd, mesh)
    lam = overlap_spectral_bound(nbhd, mesh.n_cells)
    degree = int(np.diff(overlap_matrix(nbhd, mesh.n_cells).indptr).max())
    if lam > c_ov + 1e-9:
        log.warning("overlap matrix lambda_max %.6g exceeds C_ov = %d", lam, c_ov)
    return CoverReport(covered, c_ov, float(deltas.min()), lam, degree)
