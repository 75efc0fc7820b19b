"""Transducer array builders: the 4-ring cylinder and a focused planar grid.

The cylinder is 4 rings x 14 inward-facing transducers on a circle of
diameter 5 wavelengths; ring 1 is the lowest.  Channel index is
(ring_level - 1) * per_ring + angular index.  The planar array is the
comparison baseline: a downward-facing grid phased to focus on a target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .acoustics import PhysicalConstants, SourceState

_DEFAULT_CONSTANTS = PhysicalConstants()


class ArraySpecError(ValueError):
    """Array specification violates its invariants."""


@dataclass(frozen=True)
class CylinderSpec:
    rings: int = 4
    transducers_per_ring: int = 14
    ring_diameter: float = 5.0 * _DEFAULT_CONSTANTS.wavelength  # m
    ring_heights: tuple[float, ...] = (0.003, 0.020, 0.035, 0.050)  # m, ring 1 first
    reference_pressure: float = 3.0  # Pa*m
    aperture_radius: float = 0.0045  # m

    @property
    def channel_count(self) -> int:
        return self.rings * self.transducers_per_ring

    def validate(self) -> None:
        if self.rings < 1 or self.transducers_per_ring < 1:
            raise ArraySpecError("rings and transducers_per_ring must be >= 1")
        if len(self.ring_heights) != self.rings:
            raise ArraySpecError("need one ring height per ring")
        hs = self.ring_heights
        if any(h <= 0 for h in hs) or any(b <= a for a, b in zip(hs, hs[1:])):
            raise ArraySpecError("ring heights must be positive and strictly increasing")
        if self.ring_diameter <= 4.0 * self.aperture_radius:
            raise ArraySpecError("ring diameter must exceed twice the aperture diameter")


@dataclass(frozen=True)
class PlanarSpec:
    count: int = 56
    pitch: float = 0.0105  # m
    grid_shape: tuple[int, int] = (7, 8)
    height: float = 0.050  # m
    focus_point: tuple[float, float, float] = (0.0, 0.0, 0.025)
    reference_pressure: float = 3.0
    aperture_radius: float = 0.0045

    def validate(self) -> None:
        rows, cols = self.grid_shape
        if rows * cols != self.count:
            raise ArraySpecError("grid_shape must multiply to count")
        if self.pitch <= 0:
            raise ArraySpecError("pitch must be positive")
        if self.focus_point[2] >= self.height:
            raise ArraySpecError("focus point must lie below the array plane")


def build_cylinder(spec: CylinderSpec | None = None) -> list[SourceState]:
    """Sources on equal-spaced ring positions, normals pointing at the axis."""
    spec = spec or CylinderSpec()
    spec.validate()
    r = spec.ring_diameter / 2.0
    per = spec.transducers_per_ring
    sources = []
    for level, z in enumerate(spec.ring_heights, start=1):
        for j in range(per):
            ang = 2.0 * math.pi * j / per
            cx, sx = math.cos(ang), math.sin(ang)
            sources.append(SourceState(
                position=(r * cx, r * sx, z),
                unit_normal=(-cx, -sx, 0.0),
                reference_pressure=spec.reference_pressure,
                aperture_radius=spec.aperture_radius,
                channel=(level - 1) * per + j,
            ))
    return sources


def build_planar(spec: PlanarSpec | None = None,
                 constants: PhysicalConstants | None = None) -> list[SourceState]:
    """Downward-facing grid phased to focus at spec.focus_point."""
    spec = spec or PlanarSpec()
    spec.validate()
    constants = constants or PhysicalConstants()
    k = constants.wavenumber
    rows, cols = spec.grid_shape
    x0 = -(rows - 1) * spec.pitch / 2.0
    y0 = -(cols - 1) * spec.pitch / 2.0
    focus = np.asarray(spec.focus_point, dtype=float)
    sources = []
    ch = 0
    for i in range(rows):
        for j in range(cols):
            pos = np.array([x0 + i * spec.pitch, y0 + j * spec.pitch, spec.height])
            phase = (-k * float(np.linalg.norm(focus - pos))) % (2.0 * math.pi)
            sources.append(SourceState(
                position=tuple(pos),
                unit_normal=(0.0, 0.0, -1.0),
                phase=phase,
                reference_pressure=spec.reference_pressure,
                aperture_radius=spec.aperture_radius,
                channel=ch,
            ))
            ch += 1
    return sources


def ring_channels(spec: CylinderSpec, level: int) -> range:
    """Channel indices belonging to ring `level` (1-based, 1 = lowest)."""
    if not 1 <= level <= spec.rings:
        raise ArraySpecError(f"ring level {level} out of range 1..{spec.rings}")
    per = spec.transducers_per_ring
    return range((level - 1) * per, level * per)
