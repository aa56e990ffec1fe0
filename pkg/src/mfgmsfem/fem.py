"""
P1 finite elements on a structured triangulation of the unit square.

Every mesh square ``(i, j)`` is split along its lower-left to upper-right
diagonal into triangles ``2 s`` and ``2 s + 1`` with ``s = j * nx + i``.
Coefficients are constant per triangle, so all element integrals are exact.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import InputError, UnsupportedFeatureError
from .linalg import csr_from_triplets


@dataclass(frozen=True, eq=False)
class FineMesh:
    nx: int
    ny: int
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    interior_nodes: np.ndarray
    # full node index -> position in the interior numbering (-1 on the boundary)
    reduced_index: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return self.vertices.shape[0]

    @property
    def n_cells(self):
        return self.triangles.shape[0]

    @property
    def n_interior(self):
        return self.interior_nodes.size

    @cached_property
    def cell_coords(self):
        """(n_cells, 3, 2) vertex coordinates of every triangle."""
        return self.vertices[self.triangles]

    @cached_property
    def centroids(self):
        return self.cell_coords.mean(axis=1)

    @cached_property
    def areas(self):
        c = self.cell_coords
        d1 = c[:, 1] - c[:, 0]
        d2 = c[:, 2] - c[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def edges(self):
        """Unique edges as ``(nodes, cells)``; ``cells[:, 1] == -1`` on the boundary."""
        tri = self.triangles
        local = np.array([[0, 1], [1, 2], [2, 0]])
        all_edges = np.sort(tri[:, local].reshape(-1, 2), axis=1)
        owner = np.repeat(np.arange(self.n_cells), 3)
        key = all_edges[:, 0] * self.n_nodes + all_edges[:, 1]
        order = np.argsort(key, kind="stable")
        key, all_edges, owner = key[order], all_edges[order], owner[order]
        first = np.r_[True, key[1:] != key[:-1]]
        starts = np.flatnonzero(first)
        nodes = all_edges[starts]
        cells = np.full((starts.size, 2), -1, dtype=np.int64)
        cells[:, 0] = owner[starts]
        counts = np.diff(np.r_[starts, key.size])
        shared = counts == 2
        cells[shared, 1] = owner[starts[shared] + 1]
        return nodes, cells

    @cached_property
    def cell_adjacency(self):
        """Symmetric cell-to-cell adjacency through shared edges."""
        _, cells = self.edges
        inner = cells[cells[:, 1] >= 0]
        n = self.n_cells
        rows = np.r_[inner[:, 0], inner[:, 1]]
        cols = np.r_[inner[:, 1], inner[:, 0]]
        return sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))

    def to_full(self, reduced):
        """Embed an interior-DOF vector into a full nodal vector (zero on the boundary)."""
        reduced = np.asarray(reduced, dtype=float)
        if reduced.shape[0] != self.n_interior:
            raise InputError(f"expected {self.n_interior} interior values, got {reduced.shape[0]}")
        full = np.zeros((self.n_nodes,) + reduced.shape[1:])
        full[self.interior_nodes] = reduced
        return full

    def to_reduced(self, full):
        full = np.asarray(full, dtype=float)
        if full.shape[0] != self.n_nodes:
            raise InputError(f"expected {self.n_nodes} nodal values, got {full.shape[0]}")
        return full[self.interior_nodes]

    def interpolate(self, func):
        """Nodal values of ``func(x, y)``."""
        return np.asarray(func(self.vertices[:, 0], self.vertices[:, 1]), dtype=float) \
            * np.ones(self.n_nodes)


def build_structured_mesh(nx, ny):
    """Uniform triangulation of [0, 1]^2 with ``nx`` by ``ny`` squares."""
    if int(nx) < 1 or int(ny) < 1:
        raise InputError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v00 = (j * (nx + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1
    triangles = np.empty((2 * nx * ny, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])

    ix = np.tile(np.arange(nx + 1), ny + 1)
    iy = np.repeat(np.arange(ny + 1), nx + 1)
    on_bnd = (ix == 0) | (ix == nx) | (iy == 0) | (iy == ny)
    boundary = np.flatnonzero(on_bnd)
    interior = np.flatnonzero(~on_bnd)
    reduced_index = np.full(vertices.shape[0], -1, dtype=np.int64)
    reduced_index[interior] = np.arange(interior.size)
    return FineMesh(nx, ny, vertices, triangles, boundary, interior, reduced_index)


@dataclass(frozen=True, eq=False)
class PermeabilityField:
    """Cell-wise constant permeability, one value per triangle."""

    values: np.ndarray
    kappa_min: float
    kappa_max: float

    def __post_init__(self):
        v = self.values
        if v.ndim != 1 or v.size == 0:
            raise InputError("permeability needs a non-empty 1-D array")
        if not (0 < self.kappa_min <= v.min() and v.max() <= self.kappa_max):
            raise InputError("permeability values must lie in [kappa_min, kappa_max] with kappa_min > 0")

    @classmethod
    def from_values(cls, values):
        values = np.asarray(values, dtype=float).ravel().copy()
        if values.size and values.min() <= 0:
            raise InputError("permeability must be strictly positive")
        return cls(values, float(values.min()), float(values.max()))

    @classmethod
    def uniform(cls, mesh, value=1.0):
        return cls.from_values(np.full(mesh.n_cells, float(value)))

    @classmethod
    def from_squares(cls, square_values, mesh):
        """Map one value per mesh square (row-major from the bottom row) to both triangles."""
        sq = np.asarray(square_values, dtype=float).ravel()
        if sq.size != mesh.nx * mesh.ny:
            raise InputError(f"need {mesh.nx * mesh.ny} square values, got {sq.size}")
        return cls.from_values(np.repeat(sq, 2))

    @property
    def contrast(self):
        return self.kappa_max / self.kappa_min

    def squares(self, mesh):
        """Per-square values (the first triangle of each square)."""
        return self.values[0::2].reshape(mesh.ny, mesh.nx)


def _coef(weight, n_cells):
    if weight is None:
        return np.ones(n_cells)
    if isinstance(weight, PermeabilityField):
        weight = weight.values
    weight = np.asarray(weight, dtype=float)
    if weight.ndim == 0:
        return np.full(n_cells, float(weight))
    if weight.size != n_cells:
        raise InputError(f"coefficient has {weight.size} values for {n_cells} cells")
    return weight


def _p1_gradients(coords):
    # coords: (n, 3, 2) -> barycentric gradients (n, 3, 2) and areas (n,)
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    grads = np.empty_like(coords)
    grads[:, 1, 0] = d2[:, 1] / det
    grads[:, 1, 1] = -d2[:, 0] / det
    grads[:, 2, 0] = -d1[:, 1] / det
    grads[:, 2, 1] = d1[:, 0] / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    return grads, 0.5 * det


_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0


def _element_triplets(coords, tris, coef, kind):
    if kind == "stiffness":
        grads, area = _p1_gradients(coords)
        local = np.einsum("eik,ejk->eij", grads, grads) * (coef * area)[:, None, None]
    else:
        _, area = _p1_gradients(coords)
        local = _LOCAL_MASS[None] * (coef * area)[:, None, None]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    return rows, cols, local.ravel()


def _assemble(mesh, coef, kind):
    rows, cols, vals = _element_triplets(mesh.cell_coords, mesh.triangles, coef, kind)
    mat = csr_from_triplets(rows, cols, vals, mesh.n_nodes, mesh.n_nodes)
    # exact symmetry regardless of summation order
    return ((mat + mat.T) * 0.5).tocsr()


def assemble_stiffness(mesh, kappa):
    """Matrix of ``a(p, v) = int kappa grad p . grad v`` over all nodes."""
    return _assemble(mesh, _coef(kappa, mesh.n_cells), "stiffness")


def assemble_mass(mesh, weight=None):
    """Consistent P1 mass matrix, optionally weighted by a cell-wise coefficient."""
    return _assemble(mesh, _coef(weight, mesh.n_cells), "mass")


def local_matrices(mesh, kappa, cells):
    """kappa-weighted stiffness and mass restricted to a union of cells.

    Natural (Neumann) boundary conditions: every node touched by ``cells``
    is a degree of freedom.

    Returns
    -------
    nodes : ndarray
        Sorted global node indices; local DOF ``k`` is ``nodes[k]``.
    stiffness, mass : csr_matrix
    """
    cells = np.asarray(cells, dtype=np.int64)
    coef = _coef(kappa, mesh.n_cells)[cells]
    tris = mesh.triangles[cells]
    nodes, local_tris = np.unique(tris, return_inverse=True)
    local_tris = local_tris.reshape(tris.shape)
    coords = mesh.cell_coords[cells]
    out = []
    for kind in ("stiffness", "mass"):
        r, c, v = _element_triplets(coords, local_tris, coef, kind)
        mat = csr_from_triplets(r, c, v, nodes.size, nodes.size)
        out.append(((mat + mat.T) * 0.5).tocsr())
    return nodes, out[0], out[1]


def assemble_load(mesh, nodal_f, mass=None):
    """Group-FEM load vector ``b = M f`` for nodal values of ``f(p)``."""
    nodal_f = np.asarray(nodal_f, dtype=float)
    if nodal_f.shape[0] != mesh.n_nodes:
        raise InputError(f"expected {mesh.n_nodes} nodal values, got {nodal_f.shape[0]}")
    if mass is None:
        mass = assemble_mass(mesh)
    return mass @ nodal_f


def apply_dirichlet(matrix, rhs, mesh, value=0.0):
    """Eliminate the boundary rows and columns (homogeneous data only).

    Returns the matrix and right-hand side indexed by ``mesh.interior_nodes``.
    """
    if value != 0.0:
        raise UnsupportedFeatureError("only homogeneous Dirichlet data is supported")
    idx = mesh.interior_nodes
    reduced = sp.csr_matrix(matrix)[idx][:, idx].tocsr()
    reduced.sort_indices()
    if rhs is None:
        return reduced, None
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape[0] != mesh.n_nodes:
        raise InputError(f"expected {mesh.n_nodes} rhs entries, got {rhs.shape[0]}")
    return reduced, rhs[idx]


def weighted_norms(e, kappa, mesh, mass=None, stiffness=None):
    """kappa-weighted L2 and energy (H1 seminorm) of a full nodal vector.

    ``mass`` and ``stiffness`` may be passed to reuse already assembled
    kappa-weighted matrices.
    """
    e = np.asarray(e, dtype=float)
    if e.shape[0] != mesh.n_nodes:
        raise InputError(f"expected {mesh.n_nodes} nodal values, got {e.shape[0]}")
    if mass is None:
        mass = assemble_mass(mesh, kappa)
    if stiffness is None:
        stiffness = assemble_stiffness(mesh, kappa)
    l2 = float(np.sqrt(max(e @ (mass @ e), 0.0)))
    h1 = float(np.sqrt(max(e @ (stiffness @ e), 0.0)))
    return l2, h1


@dataclass(frozen=True, eq=False)
class FineSystem:
    """Assembled fine-scale operators for one mesh and permeability."""

    mesh: FineMesh
    kappa: PermeabilityField
    mass_full: sp.csr_matrix
    stiffness_full: sp.csr_matrix
    kappa_mass_full: sp.csr_matrix
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix

    def relative_errors(self, reference, approx):
        """Relative weighted L2 and H1 errors in percent between full nodal vectors."""
        diff = np.asarray(reference) - np.asarray(approx)
        kw = dict(mass=self.kappa_mass_full, stiffness=self.stiffness_full)
        e_l2, e_h1 = weighted_norms(diff, self.kappa, self.mesh, **kw)
        r_l2, r_h1 = weighted_norms(reference, self.kappa, self.mesh, **kw)
        return 100.0 * e_l2 / r_l2, 100.0 * e_h1 / r_h1


def build_fine_system(mesh, kappa):
    mass_full = assemble_mass(mesh)
    stiffness_full = assemble_stiffness(mesh, kappa)
    kappa_mass_full = assemble_mass(mesh, kappa)
    mass, _ = apply_dirichlet(mass_full, None, mesh)
    stiffness, _ = apply_dirichlet(stiffness_full, None, mesh)
    return FineSystem(mesh, kappa, mass_full, stiffness_full, kappa_mass_full, mass, stiffness)
