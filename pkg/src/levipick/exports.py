"""Columnar text exports for field grids, node tables, basins, trajectories.

All writers emit a `#`-prefixed header line followed by comma-separated
rows with fixed-precision scientific notation, so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import numpy as np

from .dynamics import BasinMap
from .gorkov import FieldGrid, TrapNode

_FMT = "{:.9e}"


def _row(values) -> str:
    return ",".join(_FMT.format(float(v)) for v in values)


def field_grid_rows(grid: FieldGrid):
    """Yield one 'x,y,z,U,Fx,Fy,Fz,|p|' line per cell, x-major order."""
    pts = grid.points.reshape(-1, 3)
    u = grid.potential.reshape(-1)
    f = grid.force.reshape(-1, 3)
    p = grid.pressure_abs.reshape(-1)
    for i in range(pts.shape[0]):
        yield _row([*pts[i], u[i], *f[i], p[i]])


def write_field_grid(grid: FieldGrid, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# x,y,z,U,Fx,Fy,Fz,abs_p\n")
        for line in field_grid_rows(grid):
            fh.write(line + "\n")


def write_nodes(nodes: list[TrapNode], path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# x,y,z,U,stability,eig1,eig2,eig3\n")
        for n in nodes:
            fh.write(_row(n.position) + "," + _FMT.format(n.potential) + ","
                     + n.stability + "," + _row(n.hessian_eigenvalues) + "\n")


def write_basin(basin: BasinMap, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# x,y,class\n")
        for i, x in enumerate(basin.xs):
            for j, y in enumerate(basin.ys):
                fh.write(_row([x, y]) + "," + str(basin.classes[i, j]) + "\n")


def write_trajectory(trajectory: np.ndarray, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# step,x,y,z\n")
        for i, p in enumerate(np.asarray(trajectory, dtype=float)):
            fh.write(str(i) + "," + _row(p) + "\n")


def write_axial_profile(zs, potential, force_z, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# z,U,Fz\n")
        for z, u, f in zip(zs, potential, force_z):
            fh.write(_row([z, u, f]) + "\n")
