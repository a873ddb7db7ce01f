"""Plain-CSV interchange of nodal fields.

One row per grid node in C order (t^1 varies slowest).  Columns are the
node times ``t1..tp`` followed by one or more named component blocks, each
in the state order x^1..x^n, p_1^1..p_1^p, ..., p_n^1..p_n^p.  The solution
w uses ``x{i}``/``p{i}_{a}``, the dual field v uses ``y{i}``/``q{i}_{a}``.
Values are written with 17 significant digits so a read reproduces the
doubles exactly.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .core import MultiTimeGrid, PeriodicField

__all__ = ["FieldFileError", "component_names", "write_fields", "read_fields", "write_table"]

FMT = "%.17g"


class FieldFileError(ValueError):
    pass


def component_names(n: int, p: int, pos: str = "x", mom: str = "p") -> list:
    names = [f"{pos}{i + 1}" for i in range(n)]
    names += [f"{mom}{i + 1}_{a + 1}" for i in range(n) for a in range(p)]
    return names


PREFIXES = {"w": ("x", "p"), "v": ("y", "q")}


def write_fields(path, grid: MultiTimeGrid, fields: Dict[str, PeriodicField]):
    """Write ``{"w": ..., "v": ...}`` (either may be absent) to ``path``."""
    cols = [grid.flat_coordinates]
    header = [f"t{a + 1}" for a in range(grid.p)]
    for key in ("w", "v"):
        f = fields.get(key)
        if f is None:
            continue
        if f.grid != grid:
            raise ValueError(f"field {key!r} lives on a different grid")
        cols.append(f.flat)
        header += component_names(f.n, grid.p, *PREFIXES[key])
    data = np.hstack(cols)
    buf = io.StringIO()
    np.savetxt(buf, data, fmt=FMT, delimiter=",", header=",".join(header), comments="")
    Path(path).write_text(buf.getvalue())


def write_table(path, header: list, rows):
    buf = io.StringIO()
    rows = np.asarray(rows, dtype=float).reshape(-1, len(header))
    np.savetxt(buf, rows, fmt=FMT, delimiter=",", header=",".join(header), comments="")
    Path(path).write_text(buf.getvalue())


def read_fields(path, grid: MultiTimeGrid, n: int, time_tol: float = 1e-9) -> Dict[str, Optional[PeriodicField]]:
    """Read a field file written by :func:`write_fields` and check it matches ``grid``."""
    path = Path(path)
    try:
        with path.open() as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise FieldFileError(f"cannot read field file {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise FieldFileError(f"{path}: malformed numeric data: {exc}") from None
    p = grid.p
    tnames = [f"t{a + 1}" for a in range(p)]
    if header[:p] != tnames:
        raise FieldFileError(f"{path}: header must start with {tnames}, got {header[:p]}")
    if data.shape != (grid.size, len(header)):
        raise FieldFileError(f"{path}: expected {grid.size} rows x {len(header)} columns, got {data.shape[0]} x {data.shape[1]}")
    if np.max(np.abs(data[:, :p] - grid.flat_coordinates)) > time_tol:
        raise FieldFileError(f"{path}: node times do not match the scenario grid {grid.resolution}")
    out = {}
    for key, (pos, mom) in PREFIXES.items():
        names = component_names(n, p, pos, mom)
        if names[0] not in header:
            out[key] = None
            continue
        start = header.index(names[0])
        if header[start:start + len(names)] != names:
            raise FieldFileError(f"{path}: expected columns {names} for {key!r}")
        block = data[:, start:start + len(names)]
        out[key] = PeriodicField(grid, n, block.reshape(grid.shape + (len(names),)))
    if out["w"] is None and out["v"] is None:
        raise FieldFileError(f"{path}: no component columns found (expected x1.. or y1..)")
    return out
