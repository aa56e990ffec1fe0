"""
Permeability rasters: file I/O and a channel/inclusion generator.

Raster format: first line ``nx ny``, then ``nx*ny`` positive reals in
row-major order starting from the bottom row.  Each pixel covers a block
of whole mesh squares and applies to both triangles of every square.
"""
from importlib import resources
import logging

import numpy as np

from .errors import InputError
from .fem import PermeabilityField

log = logging.getLogger(__name__)

SHIPPED_FIELDS = ("linear", "semilinear")


def read_raster(path):
    """Return the raster as a ``(ny, nx)`` array, row 0 at the bottom."""
    try:
        with open(path) as fh:
            header = fh.readline().split()
            values = np.array(fh.read().split(), dtype=float)
    except OSError as exc:
        raise InputError(f"cannot read permeability raster {path}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric raster value") from exc
    if len(header) != 2:
        raise InputError(f"{path}: first line must be 'nx ny'")
    try:
        nx, ny = int(header[0]), int(header[1])
    except ValueError:
        raise InputError(f"{path}: first line must hold two integers") from None
    if nx < 1 or ny < 1:
        raise InputError(f"{path}: raster size must be positive")
    if values.size != nx * ny:
        raise InputError(f"{path}: expected {nx * ny} values, found {values.size}")
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise InputError(f"{path}: values must be positive and finite")
    return values.reshape(ny, nx)


def write_raster(raster, path):
    raster = np.asarray(raster, dtype=float)
    ny, nx = raster.shape
    with open(path, "w") as fh:
        fh.write(f"{nx} {ny}\n")
        for row in raster:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def raster_to_field(raster, mesh):
    """Upsample a ``(ny, nx)`` pixel raster to the mesh squares."""
    raster = np.asarray(raster, dtype=float)
    ny, nx = raster.shape
    if mesh.nx % nx or mesh.ny % ny:
        raise InputError(f"raster {nx}x{ny} does not divide the {mesh.nx}x{mesh.ny} mesh")
    squares = np.repeat(np.repeat(raster, mesh.ny // ny, axis=0), mesh.nx // nx, axis=1)
    return PermeabilityField.from_squares(squares.ravel(), mesh)


def load_permeability(path, mesh):
    """Read a raster file, or one of the shipped fields by name."""
    if str(path) in SHIPPED_FIELDS:
        ref = resources.files("mfgmsfem") / "data" / f"kappa_{path}.txt"
        with resources.as_file(ref) as real:
            return raster_to_field(read_raster(real), mesh)
    return raster_to_field(read_raster(path), mesh)


def generate_permeability(spec, mesh, seed=0):
    """Background ``1`` with high-permeability channels and blocky inclusions.

    Parameters
    ----------
    spec : dict
        ``channels`` (int, default 0), ``inclusions`` (int, default 0),
        ``contrast`` (default 1e4), ``width`` (channel width in squares,
        default 2), ``inclusion_size`` (``[min, max]`` side in squares,
        default ``[2, 6]``), ``min_span`` (shortest channel as a fraction
        of the domain, default 0.5), ``margin`` (squares kept free of
        channels and inclusions along the boundary, default 0).
    mesh : FineMesh
    seed : int
    """
    known = {"channels", "inclusions", "contrast", "width", "inclusion_size", "min_span",
             "margin"}
    unknown = set(spec) - known
    if unknown:
        raise InputError(f"unknown generator keys {sorted(unknown)}")
    contrast = float(spec.get("contrast", 1e4))
    n_channels = int(spec.get("channels", 0))
    n_incl = int(spec.get("inclusions", 0))
    width = int(spec.get("width", 2))
    lo, hi = (int(v) for v in spec.get("inclusion_size", (2, 6)))
    min_span = float(spec.get("min_span", 0.5))
    margin = int(spec.get("margin", 0))
    if contrast < 1:
        raise InputError("contrast must be >= 1")
    if n_channels < 0 or n_incl < 0 or width < 1 or not 1 <= lo <= hi:
        raise InputError("invalid generator counts or sizes")
    if not 0 < min_span <= 1:
        raise InputError("min_span must lie in (0, 1]")
    nx, ny = mesh.nx - 2 * margin, mesh.ny - 2 * margin
    if margin < 0 or nx < max(width, hi) or ny < max(width, hi):
        raise InputError(f"margin {margin} leaves no room on a {mesh.nx}x{mesh.ny} mesh")
    rng = np.random.default_rng(seed)
    grid = np.ones((ny, nx))
    for _ in range(n_channels):
        horizontal = rng.random() < 0.5
        n_along, n_across = (nx, ny) if horizontal else (ny, nx)
        length = int(rng.integers(int(np.ceil(min_span * n_along)), n_along + 1))
        start = int(rng.integers(0, n_along - length + 1))
        offset = int(rng.integers(0, n_across - width + 1))
        if horizontal:
            grid[offset:offset + width, start:start + length] = contrast
        else:
            grid[start:start + length, offset:offset + width] = contrast
    for _ in range(n_incl):
        sx, sy = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        x0 = int(rng.integers(0, nx - sx + 1))
        y0 = int(rng.integers(0, ny - sy + 1))
        grid[y0:y0 + sy, x0:x0 + sx] = contrast
    if margin:
        grid = np.pad(grid, margin, constant_values=1.0)
    return PermeabilityField.from_squares(grid.ravel(), mesh)
