"""Matplotlib renderings of field grids, axial profiles, basins, trajectories.

Every function renders to a file path and returns it; the Agg backend is
forced so rendering works headless.  Figures accompany the columnar text
exports so a run leaves both machine- and human-readable artifacts.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dynamics import BasinMap  # noqa: E402
from .gorkov import FieldGrid, TrapNode  # noqa: E402

_BASIN_COLORS = {"pickable": "#2a9d2a", "attractable": "#e6b93c",
                 "unreachable": "#b0b0b0"}


def _save(fig, path) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def plot_field_slice(grid: FieldGrid, path, nodes: list[TrapNode] | None = None) -> str:
    """Potential heatmap with a force quiver on a planar grid slice.

    The grid must be flat along exactly one axis; the other two span the
    figure.  Trap nodes, if given, are overlaid as markers.
    """
    pts = grid.points
    shape = grid.potential.shape
    if 1 in shape:
        flat = shape.index(1)
    else:
        spans = [np.ptp(pts[..., ax]) for ax in range(3)]
        flat = int(np.argmin(spans))
    ax_a, ax_b = [ax for ax in range(3) if ax != flat]
    names = "xyz"

    a = np.take(pts[..., ax_a], 0, axis=flat)
    b = np.take(pts[..., ax_b], 0, axis=flat)
    u = np.take(grid.potential, 0, axis=flat)
    f_a = np.take(grid.force[..., ax_a], 0, axis=flat)
    f_b = np.take(grid.force[..., ax_b], 0, axis=flat)

    fig, axis = plt.subplots(figsize=(7.0, 5.6))
    mesh = axis.pcolormesh(a * 1e3, b * 1e3, u, shading="auto", cmap="viridis")
    fig.colorbar(mesh, ax=axis, label="potential (J)")
    stride = max(1, min(u.shape) // 16)
    axis.quiver(a[::stride, ::stride] * 1e3, b[::stride, ::stride] * 1e3,
                f_a[::stride, ::stride], f_b[::stride, ::stride],
                color="white", width=0.0025)
    if nodes:
        for n in nodes:
            marker = "o" if n.stability == "stable" else "x"
            axis.plot(n.position[ax_a] * 1e3, n.position[ax_b] * 1e3, marker,
                      color="red", markersize=7, markerfacecolor="none")
    axis.set_xlabel(f"{names[ax_a]} (mm)")
    axis.set_ylabel(f"{names[ax_b]} (mm)")
    axis.set_title(f"potential and force, {names[flat]} = "
                   f"{float(pts[..., flat].flat[0]) * 1e3:.1f} mm")
    return _save(fig, path)


def plot_axial_profile(zs, potential, force_z, path,
                       nodes: list[TrapNode] | None = None,
                       weight: float | None = None) -> str:
    """Potential and vertical force along the axis, with nodes marked."""
    zs = np.asarray(zs, dtype=float)
    fig, (top, bot) = plt.subplots(2, 1, sharex=True, figsize=(7.0, 6.0))
    top.plot(zs * 1e3, np.asarray(potential), color="#20507a")
    top.set_ylabel("potential (J)")
    bot.plot(zs * 1e3, np.asarray(force_z), color="#20507a",
             label="acoustic force")
    if weight is not None:
        bot.axhline(weight, color="#c03030", linestyle="--",
                    label="particle weight")
    bot.axhline(0.0, color="black", linewidth=0.6)
    bot.set_xlabel("z (mm)")
    bot.set_ylabel("axial force (N)")
    bot.legend(loc="best", fontsize=8)
    if nodes:
        for n in nodes:
            color = "#2a9d2a" if n.stability == "stable" else "#c03030"
            for axis in (top, bot):
                axis.axvline(n.position[2] * 1e3, color=color,
                             linestyle=":", linewidth=0.9)
    top.set_title("axial potential and force")
    return _save(fig, path)


def plot_basin(basin: BasinMap, path, wall_radius: float | None = None) -> str:
    """Scatter of start-position classes on the table plane."""
    fig, axis = plt.subplots(figsize=(6.2, 5.8))
    for label, color in _BASIN_COLORS.items():
        xs, ys = [], []
        for i, x in enumerate(basin.xs):
            for j, y in enumerate(basin.ys):
                if basin.classes[i, j] == label:
                    xs.append(x * 1e3)
                    ys.append(y * 1e3)
        if xs:
            axis.scatter(xs, ys, s=26, c=color, label=label, marker="s")
    if wall_radius is not None:
        circ = plt.Circle((0, 0), wall_radius * 1e3, fill=False,
                          color="black", linewidth=1.0)
        axis.add_patch(circ)
    axis.set_aspect("equal")
    axis.set_xlabel("x (mm)")
    axis.set_ylabel("y (mm)")
    axis.legend(loc="upper right", fontsize=8)
    axis.set_title(f"picking basin (equivalent diameter "
                   f"{basin.equivalent_diameter() * 1e3:.1f} mm)")
    return _save(fig, path)


def plot_trajectory(trajectory, path, stage_heights=None,
                    target_height: float | None = None) -> str:
    """Particle height against commit index during a schedule replay."""
    traj = np.asarray(trajectory, dtype=float)
    fig, axis = plt.subplots(figsize=(7.0, 4.6))
    axis.plot(np.arange(traj.shape[0]), traj[:, 2] * 1e3, color="#20507a")
    if target_height is not None:
        axis.axhline(target_height * 1e3, color="#c03030", linestyle="--",
                     label="target height")
        axis.legend(loc="lower right", fontsize=8)
    if stage_heights:
        for h in stage_heights:
            axis.axhline(h * 1e3, color="#999999", linestyle=":",
                         linewidth=0.7)
    axis.set_xlabel("commit")
    axis.set_ylabel("height (mm)")
    axis.set_title("particle height during schedule replay")
    return _save(fig, path)


def plot_convergence(orders, errors, path, tolerance: float | None = None) -> str:
    """Image-series truncation error against reflection order (log scale)."""
    fig, axis = plt.subplots(figsize=(6.4, 4.6))
    axis.semilogy(list(orders), list(errors), marker="o", color="#20507a")
    if tolerance is not None:
        axis.axhline(tolerance, color="#c03030", linestyle="--",
                     label="tolerance")
        axis.legend(loc="best", fontsize=8)
    axis.set_xlabel("maximum reflection order")
    axis.set_ylabel("relative field change")
    axis.set_title("image-series convergence")
    axis.grid(True, which="both", linewidth=0.4, alpha=0.5)
    return _save(fig, path)


def plot_comparison(zs, profiles: dict[str, np.ndarray], path,
                    weight: float | None = None) -> str:
    """Axial force profiles of several array geometries on one chart."""
    zs = np.asarray(zs, dtype=float)
    fig, axis = plt.subplots(figsize=(7.0, 4.8))
    for label, force_z in profiles.items():
        axis.plot(zs * 1e3, np.asarray(force_z), label=label)
    if weight is not None:
        axis.axhline(weight, color="#c03030", linestyle="--",
                     label="particle weight")
    axis.axhline(0.0, color="black", linewidth=0.6)
    axis.set_xlabel("z (mm)")
    axis.set_ylabel("axial force (N)")
    axis.legend(loc="best", fontsize=8)
    axis.set_title("axial force by array geometry")
    return _save(fig, path)
