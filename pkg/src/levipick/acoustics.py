"""Complex acoustic fields from superposed monochromatic piston sources.

Each transducer is a far-field circular piston: pressure amplitude decays
as 1/d, the angular pattern is the standard 2*J1(x)/x directivity, and the
complex time convention is exp(+i(k*d + phase)).  All quantities are
complex amplitudes; time averaging happens in the Gor'kov layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import j1

SINGULAR_DISTANCE = 1e-9  # m; closer than this to a source is an error
_DIRECTIVITY_EPS = 1e-8  # removable singularity cutoff for 2*J1(x)/x


class SingularPointError(ValueError):
    """Field requested at (or numerically on top of) a source position."""


@dataclass(frozen=True)
class PhysicalConstants:
    """Medium and drive constants; defaults are air at 40 kHz."""

    speed_of_sound: float = 343.0  # m/s
    air_density: float = 1.2  # kg/m^3
    frequency: float = 40000.0  # Hz

    def __post_init__(self):
        if min(self.speed_of_sound, self.air_density, self.frequency) <= 0:
            raise ValueError("physical constants must be strictly positive")

    @property
    def angular_frequency(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def wavenumber(self) -> float:
        return self.angular_frequency / self.speed_of_sound

    @property
    def wavelength(self) -> float:
        return self.speed_of_sound / self.frequency


@dataclass(frozen=True)
class Provenance:
    """Where a source came from: a real transducer or a reflection image."""

    kind: str = "real"  # "real" | "image"
    order: int = 0  # number of bounces for images
    reflector_id: str | None = None

    def __post_init__(self):
        if self.kind not in ("real", "image"):
            raise ValueError(f"unknown provenance kind {self.kind!r}")
        if self.kind == "real" and self.order != 0:
            raise ValueError("real sources have order 0")


REAL = Provenance()


@dataclass(frozen=True)
class SourceState:
    """One acoustic source: pose, drive phase/amplitude and provenance.

    reference_pressure is the on-axis pressure amplitude at 1 m for
    amplitude_scale 1, in Pa*m.
    """

    position: tuple[float, float, float]
    unit_normal: tuple[float, float, float]
    phase: float = 0.0  # rad, normalized into [0, 2*pi)
    amplitude_scale: float = 1.0  # dimensionless; 0 = off
    reference_pressure: float = 3.0  # Pa*m
    aperture_radius: float = 0.0045  # m
    provenance: Provenance = REAL
    channel: int | None = None

    def __post_init__(self):
        pos = tuple(float(x) for x in self.position)
        nrm = np.asarray(self.unit_normal, dtype=float)
        n = np.linalg.norm(nrm)
        if n < 1e-12:
            raise ValueError("unit_normal must be nonzero")
        nrm = nrm / n
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "unit_normal", tuple(nrm))
        object.__setattr__(self, "phase", float(self.phase) % (2.0 * math.pi))
        if self.amplitude_scale < 0:
            raise ValueError("amplitude_scale must be >= 0")

    def with_phase(self, phase: float) -> "SourceState":
        return replace(self, phase=phase)


@dataclass(frozen=True)
class ComplexFieldSample:
    """Complex pressure (Pa) and air velocity (m/s) at one point."""

    pressure: complex
    velocity: tuple[complex, complex, complex]


class ArrayState:
    """A set of active sources plus constants; input to all field math.

    Immutable by convention.  Source parameters are packed into numpy
    arrays once so that field evaluation vectorizes over (points, sources).
    """

    def __init__(self, sources, constants: PhysicalConstants | None = None,
                 gradient_step: float | None = None):
        self.sources: tuple[SourceState, ...] = tuple(sources)
        self.constants = constants or PhysicalConstants()
        # central-difference step for velocity / force stencils
        self.gradient_step = (gradient_step if gradient_step is not None
                              else self.constants.wavelength / 200.0)
        n = len(self.sources)
        self._positions = np.array([s.position for s in self.sources],
                                   dtype=float).reshape(n, 3)
        self._normals = np.array([s.unit_normal for s in self.sources],
                                 dtype=float).reshape(n, 3)
        self._phases = np.array([s.phase for s in self.sources], dtype=float)
        self._amps = np.array(
            [s.amplitude_scale * s.reference_pressure for s in self.sources],
            dtype=float)
        self._ka = np.array(
            [s.aperture_radius for s in self.sources],
            dtype=float) * self.constants.wavenumber
        self._active = np.array(
            [s.amplitude_scale > 0 for s in self.sources], dtype=bool)

    def __len__(self) -> int:
        return len(self.sources)

    def with_sources(self, sources) -> "ArrayState":
        return ArrayState(sources, self.constants, self.gradient_step)


def directivity(ka: float, theta: float) -> float:
    """Far-field circular-piston directivity 2*J1(ka*sin(theta))/(ka*sin(theta)).

    The removable singularity at ka*sin(theta) -> 0 is filled with 1.
    """
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta must be in [0, pi], got {theta}")
    if ka < 0:
        raise ValueError("ka must be >= 0")
    x = ka * math.sin(theta)
    if abs(x) < _DIRECTIVITY_EPS:
        return 1.0
    return 2.0 * j1(x) / x


def source_pressure(src: SourceState, point, constants: PhysicalConstants) -> complex:
    """Complex pressure of a single source at one point."""
    if src.amplitude_scale == 0.0:
        return 0.0 + 0.0j
    diff = np.asarray(point, dtype=float) - np.asarray(src.position)
    d = float(np.linalg.norm(diff))
    if d < SINGULAR_DISTANCE:
        raise SingularPointError(f"point within {SINGULAR_DISTANCE} m of source")
    cos_t = float(np.dot(diff, src.unit_normal)) / d
    theta = math.acos(min(1.0, max(-1.0, cos_t)))
    k = constants.wavenumber
    amp = (src.reference_pressure * src.amplitude_scale *
           directivity(k * src.aperture_radius, theta) / d)
    return amp * np.exp(1j * (k * d + src.phase))


def pressure_field(arr: ArrayState, points) -> np.ndarray:
    """Total complex pressure at a batch of points, shape (..., 3) -> (...)."""
    pts = np.asarray(points, dtype=float)
    out_shape = pts.shape[:-1]
    pts = pts.reshape(-1, 3)
    out = np.zeros(pts.shape[0], dtype=complex)
    if not np.any(arr._active):
        return out.reshape(out_shape)
    pos = arr._positions[arr._active]
    nrm = arr._normals[arr._active]
    amp = arr._amps[arr._active]
    pha = arr._phases[arr._active]
    ka = arr._ka[arr._active]
    k = arr.constants.wavenumber
    # chunk over points to bound the (M, N) intermediates
    chunk = max(1, int(4_000_000 / max(1, pos.shape[0])))
    for lo in range(0, pts.shape[0], chunk):
        p = pts[lo:lo + chunk]
        diff = p[:, None, :] - pos[None, :, :]  # (m, n, 3)
        d = np.linalg.norm(diff, axis=2)
        if np.any(d < SINGULAR_DISTANCE):
            raise SingularPointError("field point coincides with a source")
        cos_t = np.einsum("mnk,nk->mn", diff, nrm) / d
        sin_t = np.sqrt(np.clip(1.0 - np.clip(cos_t, -1.0, 1.0) ** 2, 0.0, None))
        x = ka[None, :] * sin_t
        dirv = np.where(np.abs(x) < _DIRECTIVITY_EPS, 1.0,
                        2.0 * j1(x) / np.where(np.abs(x) < _DIRECTIVITY_EPS, 1.0, x))
        contrib = amp[None, :] * dirv / d * np.exp(1j * (k * d + pha[None, :]))
        out[lo:lo + chunk] = contrib.sum(axis=1)
    return out.reshape(out_shape)


def total_pressure(arr: ArrayState, point) -> complex:
    """Complex pressure at a single point (linear superposition)."""
    return complex(pressure_field(arr, np.asarray(point, dtype=float)))


def velocity_field(arr: ArrayState, points, step: float | None = None) -> np.ndarray:
    """Complex air velocity v = grad(p) / (i*rho0*omega), shape (..., 3).

    The gradient is a central difference with step lambda/200 by default.
    """
    h = step if step is not None else arr.gradient_step
    pts = np.asarray(points, dtype=float)
    out_shape = pts.shape
    pts = pts.reshape(-1, 3)
    m = pts.shape[0]
    # 6 stencil points per query point, evaluated in one batch
    stencil = np.zeros((m, 3, 2, 3))
    for ax in range(3):
        for si, sgn in enumerate((1.0, -1.0)):
            stencil[:, ax, si, :] = pts
            stencil[:, ax, si, ax] += sgn * h
    p = pressure_field(arr, stencil.reshape(-1, 3)).reshape(m, 3, 2)
    grad = (p[:, :, 0] - p[:, :, 1]) / (2.0 * h)  # (m, 3)
    c = arr.constants
    v = grad / (1j * c.air_density * c.angular_frequency)
    return v.reshape(out_shape).astype(complex)


def velocity_at(arr: ArrayState, point, step: float | None = None) -> np.ndarray:
    """Complex velocity 3-vector at a single point."""
    return velocity_field(arr, np.asarray(point, dtype=float), step=step)


def field_sample(arr: ArrayState, point) -> ComplexFieldSample:
    v = velocity_at(arr, point)
    return ComplexFieldSample(pressure=total_pressure(arr, point),
                              velocity=(complex(v[0]), complex(v[1]), complex(v[2])))
