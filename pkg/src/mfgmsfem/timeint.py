"""
Time integrators: fine-scale backward Euler (reference), multiscale backward
Euler (FD) and multiscale exponential Euler (EI).

All vectors are reduced to interior DOFs; the homogeneous Dirichlet values
are implicit.
"""
from dataclasses import dataclass, field
import logging
import time

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .basis import coarse_matrices
from .errors import InputError, SolverError
from .linalg import EigenPencilDecomp, SPDFactor, apply_phi1_pencil, sym_generalized_eig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, t_max]`` with ``n_steps`` steps."""

    t_max: float
    n_steps: int

    def __post_init__(self):
        if not self.t_max > 0:
            raise InputError(f"t_max must be positive, got {self.t_max}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InputError(f"n_steps must be a positive integer, got {self.n_steps}")

    @property
    def tau(self):
        return self.t_max / self.n_steps


def semilinear_reaction(p):
    """``f(p) = -p (1 - p) (1 + p)``."""
    return -p * (1.0 - p) * (1.0 + p)


class SourceTerm:
    """Group-FEM load ``b(p) = M f(p)`` restricted to interior rows.

    Parameters
    ----------
    f : callable or None
        Nodal nonlinearity; ``None`` means ``f = 0``.
    mass_rows : sparse matrix, optional
        Rows of the full unit mass matrix for the interior nodes
        (``n_interior x n_nodes``).  ``None`` means ``f`` acts directly on
        the reduced vector with the reduced mass ``mass``.
    interior_nodes : ndarray, optional
        Full-mesh indices of the reduced DOFs; required with ``mass_rows``.
    mass : sparse matrix, optional
        Used when ``mass_rows`` is ``None``.
    """

    def __init__(self, f=None, mass_rows=None, interior_nodes=None, mass=None):
        self.f = f
        self.mass_rows = mass_rows
        self.interior_nodes = interior_nodes
        self.mass = mass
        if f is not None and mass_rows is None and mass is None:
            raise InputError("a nonzero source needs a mass matrix")
        if mass_rows is not None and interior_nodes is None:
            raise InputError("mass_rows requires interior_nodes")

    @property
    def is_zero(self):
        return self.f is None

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if self.f is None:
            return np.zeros_like(p)
        if self.mass_rows is None:
            return self.mass @ self.f(p)
        full = np.zeros(self.mass_rows.shape[1])
        full[self.interior_nodes] = p
        return self.mass_rows @ self.f(full)


def make_source(model, mesh=None, mass_full=None):
    """Source for ``model`` in {"linear", "semilinear"} or a nodal callable.

    ``mass_full`` is the full unit mass matrix of ``mesh``.
    """
    if model == "linear" or model is None:
        return SourceTerm()
    if model == "semilinear":
        f = semilinear_reaction
    elif callable(model):
        f = model
    else:
        raise InputError(f"unknown model {model!r}")
    if mesh is None or mass_full is None:
        raise InputError("a nonlinear source needs the mesh and the full mass matrix")
    rows = sp.csr_matrix(mass_full)[mesh.interior_nodes]
    return SourceTerm(f, rows, mesh.interior_nodes)


@dataclass
class SolveResult:
    final: np.ndarray
    snapshots: list = field(default_factory=list)
    coarse_final: np.ndarray = None
    stats: dict = field(default_factory=dict)


def _snapshot_steps(snapshots, n_steps):
    steps = sorted(set(int(s) for s in (snapshots or ())))
    if steps and (steps[0] < 0 or steps[-1] > n_steps):
        raise InputError(f"snapshot steps must lie in [0, {n_steps}]")
    return steps


def _check_square(name, mat, n):
    if mat.shape != (n, n):
        raise InputError(f"{name} has shape {mat.shape}, expected ({n}, {n})")


def fine_backward_euler(M, A, source, p0, grid, picard=1, snapshots=None, tol=1e-10):
    """Backward Euler on the fine grid with a lagged (or Picard-iterated) nonlinearity.

    Each step solves ``(M + tau A) p^n = M p^{n-1} + tau b(p*)`` where ``p*``
    is ``p^{n-1}`` on the first sweep and the latest iterate on later ones.
    The matrix is factored once.
    """
    p = np.array(p0, dtype=float)
    n = p.size
    _check_square("M", M, n)
    _check_square("A", A, n)
    if picard < 1:
        raise InputError("picard must be >= 1")
    source = source if source is not None else SourceTerm()
    tau = grid.tau
    steps = _snapshot_steps(snapshots, grid.n_steps)
    t0 = time.perf_counter()
    factor = SPDFactor((M + tau * A).tocsc() if sp.issparse(M) else M + tau * A, tol=tol)
    shots = [p.copy()] if 0 in steps else []
    sweeps = 1 if source.is_zero else picard
    for step in range(1, grid.n_steps + 1):
        mp = M @ p
        it = p
        for _ in range(sweeps):
            rhs = mp + tau * source(it) if not source.is_zero else mp
            try:
                it = factor.solve(rhs)
            except SolverError as exc:
                raise SolverError(f"backward Euler step {step}: {exc}", exc.residual) from exc
        p = it
        if step in steps:
            shots.append(p.copy())
    stats = {"wall_time": time.perf_counter() - t0, "n_steps": grid.n_steps,
             "n_solves": grid.n_steps * sweeps}
    return SolveResult(p, shots, None, stats)


def _coarse_initial(space, M, M0, p0):
    rhs = space.restrict(M @ np.asarray(p0, dtype=float))
    M0d = M0.toarray() if sp.issparse(M0) else np.asarray(M0)
    if not np.any(rhs):
        return np.zeros(M0d.shape[0])
    return sla.cho_solve(sla.cho_factor(M0d, lower=True), rhs)


def project_initial(space, M, M0, p0):
    """M-orthogonal projection ``R0^T M0^{-1} R0 M p0`` onto the multiscale space."""
    p0 = np.asarray(p0, dtype=float)
    if p0.shape[0] != space.n_fine:
        raise InputError(f"p0 has {p0.shape[0]} entries, space has {space.n_fine} fine DOFs")
    return space.prolongate(_coarse_initial(space, M, M0, p0))


def mfgmsfem_fd_run(space, M, A, source, p0, grid, M0=None, A0=None, snapshots=None):
    """Backward Euler in coarse coordinates.

    ``(M0 + tau A0) c^n = M0 c^{n-1} + tau R0 b(R0^T c^{n-1})``, started from
    the projected initial state.  Pass ``M0``/``A0`` to reuse assembled
    coarse matrices.
    """
    if M0 is None or A0 is None:
        M0, A0 = coarse_matrices(space, M, A)
    source = source if source is not None else SourceTerm()
    tau = grid.tau
    steps = _snapshot_steps(snapshots, grid.n_steps)
    t0 = time.perf_counter()
    M0d = M0.toarray() if sp.issparse(M0) else np.asarray(M0)
    A0d = A0.toarray() if sp.issparse(A0) else np.asarray(A0)
    c = _coarse_initial(space, M, M0d, p0)
    factor = SPDFactor(M0d + tau * A0d)
    shots = [space.prolongate(c)] if 0 in steps else []
    for step in range(1, grid.n_steps + 1):
        rhs = M0d @ c
        if not source.is_zero:
            rhs = rhs + tau * space.restrict(source(space.prolongate(c)))
        try:
            c = factor.solve(rhs)
        except SolverError as exc:
            raise SolverError(f"FD step {step}: {exc}", exc.residual) from exc
        if step in steps:
            shots.append(space.prolongate(c))
    stats = {"wall_time": time.perf_counter() - t0, "n_steps": grid.n_steps,
             "n_coarse": c.size}
    return SolveResult(space.prolongate(c), shots, c, stats)


def coarse_pencil_eig(M0, A0, tau):
    """Decompose ``-tau A0 q = lam M0 q`` with ``Q^T M0 Q = I``.

    Eigenvalues that come out marginally positive from roundoff are set to 0.
    """
    if not tau > 0:
        raise InputError(f"tau must be positive, got {tau}")
    M0d = M0.toarray() if sp.issparse(M0) else np.asarray(M0, dtype=float)
    A0d = A0.toarray() if sp.issparse(A0) else np.asarray(A0, dtype=float)
    mu, Q = sym_generalized_eig(A0d, M0d)
    if mu.size and mu[0] < -1e-10 * max(1.0, abs(mu[-1])):
        log.warning("coarse stiffness has a negative eigenvalue %.3e", mu[0])
    mu = np.maximum(mu, 0.0)
    # ascending order of -tau * mu puts the stiffest mode first
    return EigenPencilDecomp((-tau * mu)[::-1].copy(), Q[:, ::-1].copy(), M0d, tau)


def mfgmsfem_ei_run(space, M, A, source, p0, grid, M0=None, A0=None, decomp=None,
                    snapshots=None):
    """Exponential Euler with the coarse pencil decomposition.

    The step ``c <- c + tau Q phi_1(D) Q^T R0 (b(p) - A p)`` is evaluated in
    the algebraically identical split form

    ``c <- Q e^D Q^T M0 c + tau Q phi_1(D) Q^T R0 b(p)``,  ``p = R0^T c``,

    which uses ``R0 A R0^T = A0 = M0 Q (-D / tau) Q^T M0``.  The residual
    form cancels the stiff components of ``c`` through ``Q Q^T M0 = I`` and
    loses about ``cond(M0) * eps``; the split form propagates the linear
    part exactly.  The coarse coordinates are returned as ``coarse_final``.
    """
    tau = grid.tau
    if M0 is None or (A0 is None and decomp is None):
        M0, A0 = coarse_matrices(space, M, A)
    if decomp is None:
        decomp = coarse_pencil_eig(M0, A0, tau)
    elif not np.isclose(decomp.tau, tau, rtol=1e-14, atol=0.0):
        decomp = decomp.with_tau(tau)
    source = source if source is not None else SourceTerm()
    steps = _snapshot_steps(snapshots, grid.n_steps)
    t0 = time.perf_counter()
    Q = decomp.eigenvectors
    M0d = M0.toarray() if sp.issparse(M0) else np.asarray(M0, dtype=float)
    growth = decomp.phi_diag(0)
    c = _coarse_initial(space, M, M0d, p0)
    p = space.prolongate(c)
    shots = [p.copy()] if 0 in steps else []
    for step in range(1, grid.n_steps + 1):
        c_next = Q @ (growth * (Q.T @ (M0d @ c)))
        if not source.is_zero:
            c_next = c_next + tau * apply_phi1_pencil(decomp, space.restrict(source(p)))
        c = c_next
        p = space.prolongate(c)
        if step in steps:
            shots.append(p.copy())
    stats = {"wall_time": time.perf_counter() - t0, "n_steps": grid.n_steps,
             "n_coarse": c.size}
    return SolveResult(p, shots, c, stats)
