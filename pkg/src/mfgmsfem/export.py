"""CSV, VTK and JSON writers.  All output is byte-deterministic."""
from decimal import ROUND_HALF_EVEN, Decimal
import json
import math

import numpy as np

from .errors import InputError

CSV_HEADER = "M,param,L2_percent,H1_percent"


def format_percent(value):
    """Three decimals, round-half-even on the shortest decimal repr of ``value``."""
    if not math.isfinite(value):
        return repr(float(value))
    return str(Decimal(repr(float(value))).quantize(Decimal("0.001"), rounding=ROUND_HALF_EVEN))


def format_param(value):
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def _write(path, text):
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_table_csv(table, path):
    """Write an :class:`~mfgmsfem.experiments.ErrorTable` as CSV."""
    lines = [CSV_HEADER]
    for row in table.rows:
        lines.append(f"{row.M},{format_param(row.param)},"
                     f"{format_percent(row.l2)},{format_percent(row.h1)}")
    _write(path, "\n".join(lines) + "\n")


def _fmt(x):
    return repr(float(x))


def export_field_vtk(field, mesh, path, kappa=None, title="pressure"):
    """Legacy ASCII VTK unstructured grid with point scalar ``pressure``.

    ``kappa`` (a PermeabilityField or per-cell array) adds the cell scalar
    ``kappa``.
    """
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_nodes,):
        raise InputError(f"field has shape {field.shape}, mesh has {mesh.n_nodes} nodes")
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {mesh.n_nodes} double"]
    out += [f"{_fmt(x)} {_fmt(y)} 0" for x, y in mesh.vertices]
    n = mesh.n_cells
    out.append(f"CELLS {n} {4 * n}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {n}")
    out += ["5"] * n
    out += [f"POINT_DATA {mesh.n_nodes}", "SCALARS pressure double 1", "LOOKUP_TABLE default"]
    out += [_fmt(v) for v in field]
    if kappa is not None:
        values = np.asarray(getattr(kappa, "values", kappa), dtype=float)
        if values.shape != (n,):
            raise InputError(f"kappa has shape {values.shape}, mesh has {n} cells")
        out += [f"CELL_DATA {n}", "SCALARS kappa double 1", "LOOKUP_TABLE default"]
        out += [_fmt(v) for v in values]
    _write(path, "\n".join(out) + "\n")


def export_cloud_csv(cloud, path):
    if cloud.radii is None:
        raise InputError("point cloud has no radii")
    lines = ["x,y,r"]
    lines += [f"{_fmt(x)},{_fmt(y)},{_fmt(r)}" for (x, y), r in zip(cloud.points, cloud.radii)]
    _write(path, "\n".join(lines) + "\n")


def export_json(data, path):
    _write(path, json.dumps(data, indent=2, sort_keys=True) + "\n")
