"""Output writers: VTK legacy ASCII snapshots and CSV tables.

Floats are written with 17 significant digits so identical runs produce
identical files.  CSV rows are flushed as they are written; whole-file
writers go through a temporary file and an atomic rename.
"""

import os

import numpy as np

VTK_TET = 10


def _fmt(x):
    return f"{float(x):.17g}"


def write_vtk(mesh, fields, path):
    """Legacy VTK 3.0 unstructured-grid snapshot.

    fields maps names to arrays: point scalars of length n_nodes, cell
    scalars of length n_cells, or cell vectors of shape (n_cells, 3).  An
    empty mapping writes geometry only.
    """
    lines = [
        "# vtk DataFile Version 3.0",
        "twostepfem snapshot",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_nodes} double",
    ]
    for p in mesh.node_coords:
        lines.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}")
    lines.append(f"CELLS {mesh.n_cells} {mesh.n_cells * 5}")
    for c in mesh.cells:
        lines.append(f"4 {c[0]} {c[1]} {c[2]} {c[3]}")
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines.extend([str(VTK_TET)] * mesh.n_cells)

    point_fields = {}
    cell_fields = {}
    for name, data in (fields or {}).items():
        data = np.asarray(data)
        if data.shape == (mesh.n_nodes,):
            point_fields[name] = data
        elif data.shape in ((mesh.n_cells,), (mesh.n_cells, 3)):
            cell_fields[name] = data
        else:
            raise ValueError(f"field {name!r} has unsupported shape {data.shape}")

    if point_fields:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, data in point_fields.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(_fmt(v) for v in data)
    if cell_fields:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        for name, data in cell_fields.items():
            if data.ndim == 1:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines.extend(_fmt(v) for v in data)
            else:
                lines.append(f"VECTORS {name} double")
                lines.extend(
                    f"{_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}" for v in data
                )

    _atomic_write(path, "\n".join(lines) + "\n")
    return path


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


def write_csv(path, header, rows):
    """RFC-4180 style CSV with a header row, written atomically."""
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
    _atomic_write(path, "\n".join(out) + "\n")
    return path


class StepCsvWriter:
    """Per-step CSV emission; each row is flushed when written."""

    def __init__(self, path, header):
        self._f = open(path, "w", encoding="utf-8", newline="")
        self._f.write(",".join(header) + "\n")
        self._f.flush()

    def write_row(self, values):
        self._f.write(
            ",".join(_fmt(v) if isinstance(v, float) else str(v) for v in values)
            + "\n"
        )
        self._f.flush()

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
