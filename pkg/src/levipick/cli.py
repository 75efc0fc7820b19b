"""Command-line front end: batch experiments with text + figure artifacts.

Every subcommand reads an optional YAML config (`--config`), writes its
columnar text outputs and rendered figures into `--out`, and exits 0 on
success, 2 on a validation problem (bad config, bad flags, bad script)
and 3 on an experiment failure (a physics threshold not met).
"""

from __future__ import annotations

import json
import math
import pathlib
import random
import sys

import click
import numpy as np

from . import exports, plotting
from .acoustics import ArrayState
from .config import ConfigError, TrapConfig, config_hash, default_config, load_config
from .device import (DeviceState, PlanningError, ProtocolError, apply_line,
                     plan_picking, to_array_state)
from .dynamics import EscapeError, basin_map, simulate_schedule
from .geometry import ArraySpecError, build_planar, ring_channels
from .gorkov import GridSpec, find_axial_nodes, force_field, gorkov_field, sample_grid
from .images import expand_images, reflector_phase_equivalent, series_truncation_error

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_EXPERIMENT = 3


class ExperimentFailure(click.ClickException):
    exit_code = EXIT_EXPERIMENT


def _fail_validation(message: str) -> None:
    exc = click.ClickException(message)
    exc.exit_code = EXIT_VALIDATION
    raise exc


def _load(config_path) -> TrapConfig:
    try:
        return load_config(config_path) if config_path else default_config()
    except (ConfigError, ArraySpecError, OSError, ValueError) as exc:
        _fail_validation(f"config: {exc}")


def _outdir(out) -> pathlib.Path:
    path = pathlib.Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_grid(grid: str, default=(81, 1, 61)) -> tuple[int, int, int]:
    if not grid:
        return default
    try:
        nx, ny, nz = (int(p) for p in grid.split(","))
    except ValueError:
        _fail_validation(f"--grid must be nx,ny,nz integers, got {grid!r}")
    if min(nx, ny, nz) < 1:
        _fail_validation("--grid entries must be >= 1")
    return nx, ny, nz


def _device_for(cfg: TrapConfig, script_path=None,
                rings_on=None) -> DeviceState:
    """Device with the requested rings enabled and an optional script applied."""
    geometry = cfg.build_sources()
    rings = cfg.cylinder.rings if cfg.array_kind == "cylinder" else 1
    dev = DeviceState(channel_count=len(geometry), rings=rings)
    levels = (range(1, rings + 1) if rings_on is None
              else [int(x) for x in rings_on.split(",") if x.strip()])
    for lvl in levels:
        try:
            apply_line(dev, f"RING {lvl} ON")
        except ProtocolError as exc:
            _fail_validation(str(exc))
    apply_line(dev, "COMMIT")
    if script_path:
        try:
            text = pathlib.Path(script_path).read_text(encoding="utf-8")
        except OSError as exc:
            _fail_validation(f"script: {exc}")
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.split("#", 1)[0].strip():
                continue
            try:
                apply_line(dev, line)
            except ProtocolError as exc:
                _fail_validation(f"script line {lineno}: {exc}")
    return dev


def _array_state(cfg: TrapConfig, dev: DeviceState) -> ArrayState:
    per = (cfg.cylinder.transducers_per_ring
           if cfg.array_kind == "cylinder" else dev.channel_count)
    return to_array_state(dev, cfg.build_sources(), cfg.constants,
                          list(cfg.reflectors), cfg.max_image_order, per)


def _common(func):
    func = click.option("--config", "config_path", type=click.Path(exists=True),
                        default=None, help="YAML experiment config.")(func)
    func = click.option("--out", default="levipick_out", show_default=True,
                        help="Artifact output directory.")(func)
    func = click.option("--seed", type=int, default=0, show_default=True,
                        help="RNG seed for reproducible artifacts.")(func)
    return func


def _seed(seed: int) -> np.random.Generator:
    random.seed(seed)
    np.random.seed(seed % 2 ** 32)
    return np.random.default_rng(seed)


@click.group()
def main() -> None:
    """Ultrasonic levitation picking simulator."""


@main.command()
@_common
@click.option("--grid", default="", help="nx,ny,nz sample counts.")
@click.option("--script", "script_path", type=click.Path(exists=True),
              default=None, help="Wire-protocol script applied before sampling.")
@click.option("--rings", "rings_on", default=None,
              help="Comma-separated ring levels to enable (default: all).")
def field(config_path, out, seed, grid, script_path, rings_on) -> None:
    """Export a Gor'kov potential / force grid slice (CSV + figure)."""
    _seed(seed)
    cfg = _load(config_path)
    outdir = _outdir(out)
    arr = _array_state(cfg, _device_for(cfg, script_path, rings_on))
    shape = _parse_grid(grid)
    half = 0.45 * (cfg.cylinder.ring_diameter if cfg.array_kind == "cylinder"
                   else 0.05)
    top = max(s.position[2] for s in cfg.build_sources())
    spec = GridSpec(mins=(-half, 0.0, cfg.particle.radius),
                    maxs=(half, 0.0, top + cfg.constants.wavelength),
                    shape=shape)
    fg = sample_grid(arr, spec, cfg.particle,
                     metadata={"config_hash": config_hash(cfg)})
    exports.write_field_grid(fg, outdir / "field.csv")
    plotting.plot_field_slice(fg, outdir / "field.png")
    click.echo(f"wrote {outdir / 'field.csv'} and field.png "
               f"({shape[0]}x{shape[1]}x{shape[2]} samples)")


@main.command()
@_common
@click.option("--script", "script_path", type=click.Path(exists=True),
              default=None, help="Wire-protocol script applied before the scan.")
@click.option("--rings", "rings_on", default=None,
              help="Comma-separated ring levels to enable (default: all).")
def nodes(config_path, out, seed, script_path, rings_on) -> None:
    """Locate axial trap nodes and export the axial profile."""
    _seed(seed)
    cfg = _load(config_path)
    outdir = _outdir(out)
    arr = _array_state(cfg, _device_for(cfg, script_path, rings_on))
    top = max(s.position[2] for s in cfg.build_sources())
    z_hi = top + cfg.constants.wavelength
    found = find_axial_nodes(arr, cfg.particle, (cfg.particle.radius, z_hi))
    exports.write_nodes(found, outdir / "nodes.csv")
    zs = np.linspace(cfg.particle.radius, z_hi, 400)
    pts = np.zeros((zs.size, 3))
    pts[:, 2] = zs
    u = gorkov_field(arr, pts, cfg.particle)
    fz = force_field(arr, pts, cfg.particle)[:, 2]
    exports.write_axial_profile(zs, u, fz, outdir / "axial_profile.csv")
    plotting.plot_axial_profile(zs, u, fz, outdir / "axial.png", nodes=found,
                                weight=cfg.particle.weight)
    click.echo(f"{len(found)} axial node(s); wrote nodes.csv, "
               f"axial_profile.csv, axial.png in {outdir}")


@main.command()
@_common
def pick(config_path, out, seed) -> None:
    """Plan the six-stage picking script and replay it (exit 3 on failure)."""
    _seed(seed)
    cfg = _load(config_path)
    outdir = _outdir(out)
    if cfg.array_kind != "cylinder":
        _fail_validation("picking requires the cylinder array")
    geometry = cfg.build_sources()
    try:
        sched = plan_picking(
            geometry, cfg.particle, cfg.constants,
            target_height=cfg.picking.target_height / 0.9,
            reflectors=cfg.reflectors, max_image_order=cfg.max_image_order,
            increment_steps=cfg.picking.increment_steps,
            rings=cfg.cylinder.rings,
            transducers_per_ring=cfg.cylinder.transducers_per_ring)
    except PlanningError as exc:
        raise ExperimentFailure(f"planning failed: {exc}")
    (outdir / "script.txt").write_text(sched.script(), encoding="ascii")
    try:
        outcome = simulate_schedule(sched, cfg.particle, cfg.motion)
    except EscapeError as exc:
        raise ExperimentFailure(f"replay failed: {exc}")
    exports.write_trajectory(outcome.trajectory, outdir / "trajectory.csv")
    plotting.plot_trajectory(outcome.trajectory, outdir / "trajectory.png",
                             stage_heights=outcome.stage_heights,
                             target_height=outcome.target_height)
    with open(outdir / "stages.csv", "w", encoding="ascii") as fh:
        fh.write("# stage,expected_height,reached_height\n")
        for stage, h in zip(sched.stages, outcome.stage_heights):
            fh.write(f"{stage.name},{stage.expected_height:.9e},{h:.9e}\n")
    final = outcome.final_position[2]
    click.echo(f"stages: " + ", ".join(
        f"{n}={h * 1e3:.1f}mm" for n, h in
        zip(outcome.stage_names, outcome.stage_heights)))
    click.echo(f"final height {final * 1e3:.1f} mm "
               f"(target {outcome.target_height * 1e3:.1f} mm)")
    if not outcome.success:
        raise ExperimentFailure("picking did not reach the target height")


@main.command()
@_common
@click.option("--spacing", type=float, default=0.005, show_default=True,
              help="Start-grid spacing in metres.")
@click.option("--extent", type=float, default=0.020, show_default=True,
              help="Half-width of the start grid in metres.")
def basin(config_path, out, seed, spacing, extent) -> None:
    """Classify table start positions by picking outcome (CSV + figure)."""
    _seed(seed)
    cfg = _load(config_path)
    outdir = _outdir(out)
    if cfg.array_kind != "cylinder":
        _fail_validation("basin mapping requires the cylinder array")
    if spacing <= 0 or extent <= 0:
        _fail_validation("--spacing and --extent must be positive")
    geometry = cfg.build_sources()
    try:
        sched = plan_picking(
            geometry, cfg.particle, cfg.constants,
            target_height=cfg.picking.target_height / 0.9,
            reflectors=cfg.reflectors, max_image_order=cfg.max_image_order,
            increment_steps=cfg.picking.increment_steps,
            rings=cfg.cylinder.rings,
            transducers_per_ring=cfg.cylinder.transducers_per_ring)
    except PlanningError as exc:
        raise ExperimentFailure(f"planning failed: {exc}")
    result = basin_map(sched, cfg.particle, params=cfg.motion,
                       spacing=spacing, extent=extent)
    exports.write_basin(result, outdir / "basin.csv")
    wall = min(math.hypot(s.position[0], s.position[1]) for s in geometry)
    plotting.plot_basin(result, outdir / "basin.png", wall_radius=wall)
    click.echo(f"pickable fraction {result.pickable_fraction():.3f}, "
               f"equivalent diameter {result.equivalent_diameter() * 1e3:.1f} mm")


@main.command("compare-geometry")
@_common
def compare_geometry(config_path, out, seed) -> None:
    """Focal pressure of the cylinder vs an equal-count focused flat array."""
    _seed(seed)
    cfg = _load(config_path)
    outdir = _outdir(out)
    focus = np.asarray(cfg.planar.focus_point, dtype=float)
    k = cfg.constants.wavenumber

    cyl_sources = []
    for src in cfg.build_sources() if cfg.array_kind == "cylinder" else []:
        d = float(np.linalg.norm(focus - np.asarray(src.position)))
        cyl_sources.append(src.with_phase((-k * d) % (2.0 * math.pi)))
    if not cyl_sources:
        _fail_validation("geometry comparison requires the cylinder array")
    cyl = ArrayState(expand_images(cyl_sources, list(cfg.reflectors),
                                   cfg.max_image_order).expanded_sources,
                     cfg.constants)
    pla = ArrayState(expand_images(build_planar(cfg.planar, cfg.constants),
                                   list(cfg.reflectors),
                                   cfg.max_image_order).expanded_sources,
                     cfg.constants)

    from .acoustics import pressure_field
    p_cyl = abs(complex(pressure_field(cyl, focus)))
    p_pla = abs(complex(pressure_field(pla, focus)))
    ratio = p_cyl / p_pla if p_pla > 0 else float("inf")

    zs = np.linspace(cfg.particle.radius, focus[2] + 0.02, 200)
    pts = np.zeros((zs.size, 3))
    pts[:, 2] = zs
    prof_c = np.abs(pressure_field(cyl, pts))
    prof_p = np.abs(pressure_field(pla, pts))
    with open(outdir / "comparison.csv", "w", encoding="ascii") as fh:
        fh.write("# z,abs_p_cylinder,abs_p_planar\n")
        for z, a, b in zip(zs, prof_c, prof_p):
            fh.write(f"{z:.9e},{a:.9e},{b:.9e}\n")
    plotting.plot_comparison(zs, {"cylinder": prof_c, "planar": prof_p},
                             outdir / "comparison.png")
    in_band = 1.12 <= ratio <= 1.42
    click.echo(f"focal |p|: cylinder {p_cyl:.2f} Pa, planar {p_pla:.2f} Pa, "
               f"ratio {ratio:.3f}" + ("" if in_band else "  [outside the "
               "expected 1.12-1.42 band]"))
    if ratio <= 1.10:
        raise ExperimentFailure(
            f"cylinder focal pressure ratio {ratio:.3f} is not > 1.10")


@main.command("images-convergence")
@_common
@click.option("--max-order", "max_order", type=int, default=3, show_default=True)
def images_convergence(config_path, out, seed, max_order) -> None:
    """Table of image-series truncation error against reflection order."""
    _seed(seed)
    cfg = _load(config_path)
    outdir = _outdir(out)
    if max_order < 1:
        _fail_validation("--max-order must be >= 1")
    sources = cfg.build_sources()
    top = max(s.position[2] for s in sources)
    reflectors = _with_dish(cfg, top)
    probes = np.zeros((50, 3))
    probes[:, 2] = np.linspace(cfg.particle.radius, top, 50)
    orders = list(range(1, max_order + 1))
    errors = [series_truncation_error(sources, reflectors, order, order + 1,
                                      probes, cfg.constants)
              for order in orders]
    with open(outdir / "convergence.csv", "w", encoding="ascii") as fh:
        fh.write("# order,relative_change_vs_next_order\n")
        for order, err in zip(orders, errors):
            fh.write(f"{order},{err:.9e}\n")
    plotting.plot_convergence(orders, errors, outdir / "convergence.png",
                              tolerance=0.02)
    for order, err in zip(orders, errors):
        click.echo(f"order {order} -> {order + 1}: relative change {err:.3e}")


def _with_dish(cfg: TrapConfig, top: float):
    """Config reflectors plus a lid reflector above the array if absent."""
    from .images import Reflector

    reflectors = list(cfg.reflectors)
    if len(reflectors) < 2:
        # a lid held well above the array keeps the once-reflected series
        # dominant; closer lids need higher orders
        reflectors.append(Reflector(z=top + 0.030,
                                    reflection_coefficient=0.9, id="dish"))
    return reflectors


@main.command("reflector-equiv")
@_common
@click.option("--displacement", type=float, default=None,
              help="Reflector displacement in metres (default lambda/16).")
def reflector_equiv(config_path, out, seed, displacement) -> None:
    """Moved-reflector field vs the equivalent phase-shifted image ring."""
    _seed(seed)
    cfg = _load(config_path)
    outdir = _outdir(out)
    lam = cfg.constants.wavelength
    delta = displacement if displacement is not None else lam / 16.0
    sources = cfg.build_sources()
    top = max(s.position[2] for s in sources)
    reflectors = _with_dish(cfg, top)
    target = max(range(len(reflectors)), key=lambda i: reflectors[i].z)
    dish = reflectors[target]
    others = [r for i, r in enumerate(reflectors) if i != target]
    moved = others + [type(dish)(
        z=dish.z + delta, reflection_coefficient=dish.reflection_coefficient,
        id=dish.id)]

    arr_moved = ArrayState(
        expand_images(sources, moved, 1).expanded_sources, cfg.constants)
    equiv_sources = (
        list(expand_images(sources, others, 1).expanded_sources)
        + reflector_phase_equivalent(sources, dish.z, delta, cfg.constants,
                                     dish.reflection_coefficient))
    arr_equiv = ArrayState(equiv_sources, cfg.constants)

    zs = np.linspace(0.002, 0.040, 120)
    pts = np.zeros((zs.size, 3))
    pts[:, 2] = zs
    fz_moved = force_field(arr_moved, pts, cfg.particle)[:, 2]
    fz_equiv = force_field(arr_equiv, pts, cfg.particle)[:, 2]
    scale = float(np.sqrt(np.mean(fz_moved ** 2)))
    rms = float(np.sqrt(np.mean((fz_moved - fz_equiv) ** 2))) / max(scale, 1e-30)
    with open(outdir / "reflector_equiv.csv", "w", encoding="ascii") as fh:
        fh.write("# z,Fz_moved_reflector,Fz_phased_ring\n")
        for z, a, b in zip(zs, fz_moved, fz_equiv):
            fh.write(f"{z:.9e},{a:.9e},{b:.9e}\n")
    plotting.plot_comparison(zs, {"moved reflector": fz_moved,
                                  "phased ring": fz_equiv},
                             outdir / "reflector_equiv.png")
    click.echo(f"relative RMS difference over the central column: {rms:.4f}")
    if rms >= 0.10:
        raise ExperimentFailure(
            f"phased-ring equivalence broke down: relative RMS {rms:.4f}")


@main.group()
def device() -> None:
    """Device emulator utilities."""


@device.command()
@_common
def repl(config_path, out, seed) -> None:
    """Interactive wire-protocol shell on an emulated controller."""
    cfg = _load(config_path)
    geometry = cfg.build_sources()
    rings = cfg.cylinder.rings if cfg.array_kind == "cylinder" else 1
    dev = DeviceState(channel_count=len(geometry), rings=rings)
    interactive = sys.stdin.isatty()
    if interactive:
        click.echo(f"{dev.channel_count}-channel controller, {dev.rings} rings,"
                   f" {dev.phase_steps_per_cycle} steps/cycle. Ctrl-D exits.")
    while True:
        try:
            line = input("> " if interactive else "")
        except EOFError:
            break
        if not line.split("#", 1)[0].strip():
            continue
        try:
            reply = apply_line(dev, line)
        except ProtocolError as exc:
            click.echo(f"error: {exc}")
            continue
        if reply is not None:
            click.echo(reply)
        elif line.split("#", 1)[0].strip().upper() == "COMMIT":
            click.echo(f"ok commit {dev.commit_counter}")
        else:
            click.echo("ok")


@main.command()
@_common
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(config_path, out, seed, host, port) -> None:
    """Run the simulation service consumed by the operator console."""
    import uvicorn

    from .service import create_app

    cfg = _load(config_path)
    uvicorn.run(create_app(cfg, cache_dir=_outdir(out)), host=host, port=port)


if __name__ == "__main__":
    main()
