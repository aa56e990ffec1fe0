"""
Experiment runners: reference solutions, error sweeps over (M, gamma) and
(M, N_t), and coverage diagnostics.
"""
from dataclasses import dataclass, field
import hashlib
import logging
import os

import numpy as np

from .basis import build_multiscale_space, coarse_matrices, local_spectral_bases, shape_functions
from .coarsening import (build_neighborhoods, compute_density, coverage_diagnostics,
                         generate_point_cloud, with_radii)
from .errors import NumericalError
from .fem import PermeabilityField, build_fine_system, build_structured_mesh
from .permeability import generate_permeability, load_permeability
from .timeint import (SolveResult, TimeGrid, coarse_pencil_eig, fine_backward_euler,
                      make_source, mfgmsfem_ei_run, mfgmsfem_fd_run)

log = logging.getLogger(__name__)

METHODS = ("fd", "ei")


def initial_condition(x, y):
    """``p0 = x (1 - x) y (1 - y)``."""
    return x * (1.0 - x) * y * (1.0 - y)


def rescale_contrast(kappa, contrast):
    """Map ``kappa`` to the requested contrast by a power law about its minimum.

    A two-level field stays two-level; a uniform field is returned as is.
    """
    current = kappa.contrast
    if current == 1.0 or np.isclose(current, contrast, rtol=1e-12):
        return kappa
    scaled = np.log(kappa.values / kappa.kappa_min) / np.log(current)
    return PermeabilityField.from_values(kappa.kappa_min * contrast ** scaled)


def build_permeability(config, mesh):
    source = config.permeability_source
    if isinstance(source, dict):
        spec = dict(source)
        spec.setdefault("contrast", config.contrast)
        return generate_permeability(spec, mesh, config.seed)
    return rescale_contrast(load_permeability(source, mesh), config.contrast)


@dataclass
class Problem:
    """Mesh, permeability, fine operators, source and initial state of a config."""

    config: object
    mesh: object
    kappa: object
    fine: object
    source: object
    p0_full: np.ndarray

    @property
    def p0(self):
        return self.mesh.to_reduced(self.p0_full)


def setup_problem(config, kappa=None):
    mesh = build_structured_mesh(config.nx, config.ny)
    if kappa is None:
        kappa = build_permeability(config, mesh)
    fine = build_fine_system(mesh, kappa)
    p0 = mesh.interpolate(lambda x, y: initial_condition(x, y))
    source = make_source(config.model, mesh, fine.mass_full)
    return Problem(config, mesh, kappa, fine, source, p0)


def reference_key(problem):
    cfg = problem.config
    h = hashlib.sha256()
    h.update(f"{cfg.nx}x{cfg.ny}|{cfg.model}|{cfg.reference_nt}|{cfg.t_max!r}|"
             f"{cfg.picard}".encode())
    h.update(np.ascontiguousarray(problem.kappa.values).tobytes())
    h.update(np.ascontiguousarray(problem.p0_full).tobytes())
    return h.hexdigest()[:16]


def run_reference(config, problem=None, cache_dir=None):
    """Fine backward-Euler solution at ``t_max`` with ``reference_nt`` steps.

    With ``cache_dir`` the result is stored as ``reference_<hash>.npz`` and
    reused by later calls with the same mesh, permeability, model and step
    count.
    """
    problem = problem if problem is not None else setup_problem(config)
    path = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        path = os.path.join(cache_dir, f"reference_{reference_key(problem)}.npz")
        if os.path.exists(path):
            with np.load(path) as data:
                final = data["final"]
            log.info("reference loaded from %s", path)
            return SolveResult(final, [final.copy()], None, {"cached": True})
    grid = TimeGrid(config.t_max, config.reference_nt)
    fine = problem.fine
    result = fine_backward_euler(fine.mass, fine.stiffness, problem.source, problem.p0, grid,
                                 picard=config.picard, snapshots=[grid.n_steps])
    result.stats["cached"] = False
    if path is not None:
        np.savez(path, final=result.final)
    return result


def build_cloud(problem, config):
    rho = compute_density(problem.mesh, problem.kappa, problem.p0_full, config.beta)
    return generate_point_cloud(rho, problem.mesh, config.n_points, seed=config.seed)


@dataclass
class CoarseLevel:
    """Neighborhoods, shape functions and local bases for one gamma."""

    gamma: float
    neighborhoods: object
    shapes: object
    bases: list


def build_level(problem, cloud, gamma, n_b):
    nbhd = build_neighborhoods(problem.mesh, with_radii(cloud, gamma))
    shapes = shape_functions(nbhd, problem.mesh)
    bases = local_spectral_bases(nbhd, problem.mesh, problem.kappa, n_b)
    return CoarseLevel(gamma, nbhd, shapes, bases)


@dataclass(frozen=True, order=True)
class ErrorRow:
    M: int
    param: float
    l2: float
    h1: float


@dataclass
class ErrorTable:
    """Relative weighted errors in percent, keyed by ``(M, param)``.

    ``kind`` is ``"gamma"`` (param = coverage parameter) or ``"nt"``
    (param = number of time steps).
    """

    method: str
    kind: str
    rows: list = field(default_factory=list)

    def add(self, M, param, l2, h1):
        self.rows.append(ErrorRow(int(M), float(param), float(l2), float(h1)))
        self.rows.sort()

    def lookup(self, M, param):
        for row in self.rows:
            if row.M == M and row.param == param:
                return row
        raise KeyError((M, param))

    def column(self, param, norm="l2"):
        return {r.M: getattr(r, norm) for r in self.rows if r.param == param}


def _with_context(exc, **ctx):
    label = ", ".join(f"{k}={v}" for k, v in ctx.items())
    exc.args = (f"[{label}] {exc.args[0] if exc.args else exc}",) + exc.args[1:]
    return exc


@dataclass
class SweepResult:
    tables: dict
    fields: dict
    reference: object
    problem: object


def run_sweep(config, problem=None, reference=None, cache=True, cache_dir=None,
              keep_fields=None):
    """Error tables for FD and EI over the configured sweeps.

    Local eigenbases are computed once per gamma with ``max(M)`` retained
    pairs and sliced for smaller ``M`` when ``cache`` is true; otherwise
    they are recomputed for every ``(gamma, M)`` with the same request so
    both paths give bit-identical tables.  The coarse pencil is decomposed
    once per space at ``tau = 1`` and rescaled to each step size.

    Parameters
    ----------
    keep_fields : (gamma, M, N_t), optional
        Combination whose final fine-scale fields are returned in
        ``SweepResult.fields`` keyed by method.
    """
    problem = problem if problem is not None else setup_problem(config)
    if reference is None:
        reference = run_reference(config, problem, cache_dir=cache_dir).final
    ref_full = problem.mesh.to_full(reference)
    fine = problem.fine
    cloud = build_cloud(problem, config)
    n_b = max(config.M)

    jobs = {}
    if "gamma" in config.sweeps:
        for g in config.gamma:
            for m in config.M:
                jobs.setdefault((g, m), set()).add(config.sweep_nt)
    if "nt" in config.sweeps:
        for m in config.M:
            jobs.setdefault((config.sweep_gamma, m), set()).update(config.N_t)

    tables = {(method, kind): ErrorTable(method, kind)
              for method in METHODS for kind in config.sweeps}
    fields = {}
    levels = {}
    for g, m in sorted(jobs):
        try:
            if cache:
                if g not in levels:
                    levels = {g: build_level(problem, cloud, g, n_b)}
                level = levels[g]
            else:
                level = build_level(problem, cloud, g, n_b)
            bases = [b.truncated(m) for b in level.bases]
            space = build_multiscale_space(bases, level.shapes, problem.mesh, fine.mass)
            M0, A0 = coarse_matrices(space, fine.mass, fine.stiffness)
            unit = coarse_pencil_eig(M0, A0, 1.0)
        except NumericalError as exc:
            raise _with_context(exc, M=m, gamma=g) from None
        for nt in sorted(jobs[(g, m)]):
            grid = TimeGrid(config.t_max, nt)
            for method in METHODS:
                try:
                    if method == "fd":
                        res = mfgmsfem_fd_run(space, fine.mass, fine.stiffness, problem.source,
                                              problem.p0, grid, M0, A0)
                    else:
                        res = mfgmsfem_ei_run(space, fine.mass, fine.stiffness, problem.source,
                                              problem.p0, grid, M0, A0,
                                              decomp=unit.with_tau(grid.tau))
                except NumericalError as exc:
                    raise _with_context(exc, method=method, M=m, gamma=g, N_t=nt) from None
                approx = problem.mesh.to_full(res.final)
                l2, h1 = fine.relative_errors(ref_full, approx)
                if h1 < l2:
                    log.info("%s M=%d gamma=%g N_t=%d: H1 error %.3f below L2 %.3f",
                             method, m, g, nt, h1, l2)
                if "gamma" in config.sweeps and nt == config.sweep_nt and g in config.gamma:
                    tables[(method, "gamma")].add(m, g, l2, h1)
                if "nt" in config.sweeps and g == config.sweep_gamma and nt in config.N_t:
                    tables[(method, "nt")].add(m, nt, l2, h1)
                if keep_fields is not None and (g, m, nt) == tuple(keep_fields):
                    fields[method] = approx
    return SweepResult(tables, fields, reference, problem)


def run_diagnostics(config, problem=None):
    """Coverage report per gamma, plus the point cloud."""
    problem = problem if problem is not None else setup_problem(config)
    cloud = build_cloud(problem, config)
    reports = {}
    for g in config.gamma:
        nbhd = build_neighborhoods(problem.mesh, with_radii(cloud, g))
        report = coverage_diagnostics(nbhd, problem.mesh).to_dict()
        report["repair_rounds"] = nbhd.repair_rounds
        reports[repr(float(g))] = report
    return cloud, reports
