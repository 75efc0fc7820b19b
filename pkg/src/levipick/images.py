"""Method of images for horizontal rigid reflectors.

A sound-hard plane is replaced by mirrored sources with the same sign and
phase, so the normal velocity of each real/image pair cancels on the plane.
Two parallel reflectors (table below, petri dish above) generate an
alternating image series which is truncated at a configurable order; one
bounce is enough in practice once per-bounce attenuation is applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .acoustics import ArrayState, PhysicalConstants, Provenance, SourceState, pressure_field

_PLANE_EPS = 1e-12  # m


class DegenerateSourceError(ValueError):
    """Source lies on the reflector plane; its image is itself."""


@dataclass(frozen=True)
class Reflector:
    """Horizontal sound-hard plane z = const with per-bounce attenuation."""

    z: float
    reflection_coefficient: float = 1.0
    id: str = "reflector"

    def __post_init__(self):
        if not 0.0 < self.reflection_coefficient <= 1.0:
            raise ValueError("reflection_coefficient must be in (0, 1]")


@dataclass(frozen=True)
class ImageExpansion:
    original_sources: tuple[SourceState, ...]
    reflectors: tuple[Reflector, ...]
    max_order: int
    expanded_sources: tuple[SourceState, ...] = field(default=())


def mirror_source(src: SourceState, refl: Reflector) -> SourceState:
    """Mirror a source across a horizontal plane (rigid, same-sign image)."""
    x, y, z = src.position
    if abs(z - refl.z) < _PLANE_EPS:
        raise DegenerateSourceError(f"source lies on reflector {refl.id!r}")
    nx, ny, nz = src.unit_normal
    return replace(
        src,
        position=(x, y, 2.0 * refl.z - z),
        unit_normal=(nx, ny, -nz),
        amplitude_scale=src.amplitude_scale * refl.reflection_coefficient,
        provenance=Provenance(kind="image", order=src.provenance.order + 1,
                              reflector_id=refl.id),
    )


def expand_images(sources, reflectors, max_order: int) -> ImageExpansion:
    """Breadth-first alternating-reflector expansion up to max_order bounces.

    No image is generated across the same reflector twice consecutively,
    so a single plane contributes exactly one image generation.  Ordering
    is deterministic: by order, then reflector id, then original index.
    """
    sources = tuple(sources)
    reflectors = tuple(sorted(reflectors, key=lambda r: r.id))
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    if len(reflectors) > 2:
        raise ValueError("at most two (parallel horizontal) reflectors supported")

    expanded = list(sources)
    # frontier: (source, reflector id it was last mirrored across, original idx)
    frontier = [(s, None, i) for i, s in enumerate(sources)]
    for _ in range(max_order):
        nxt = []
        for refl in reflectors:
            for src, last_id, idx in frontier:
                if last_id == refl.id:
                    continue
                nxt.append((mirror_source(src, refl), refl.id, idx))
        nxt.sort(key=lambda t: (t[1], t[2]))
        expanded.extend(s for s, _, _ in nxt)
        frontier = nxt
        if not frontier:
            break
    return ImageExpansion(original_sources=sources, reflectors=reflectors,
                          max_order=max_order, expanded_sources=tuple(expanded))


def series_truncation_error(sources, reflectors, order_a: int, order_b: int,
                            probe_points, constants: PhysicalConstants) -> float:
    """max over probes of |p_b - p_a| / max|p_a| between two truncation orders."""
    if not order_b > order_a >= 1:
        raise ValueError("need order_b > order_a >= 1")
    pts = np.asarray(probe_points, dtype=float)
    pa = pressure_field(ArrayState(
        expand_images(sources, reflectors, order_a).expanded_sources, constants), pts)
    pb = pressure_field(ArrayState(
        expand_images(sources, reflectors, order_b).expanded_sources, constants), pts)
    ref = np.max(np.abs(pa))
    if ref == 0.0:
        return 0.0
    return float(np.max(np.abs(pb - pa)) / ref)


def reflector_phase_equivalent(ring, reflector_height: float, displacement: float,
                               constants: PhysicalConstants,
                               reflection_coefficient: float = 1.0):
    """Virtual phased ring standing in for a reflector moved by `displacement`.

    The ring is mirrored across the *undisplaced* reflector plane and each
    image gets the round-trip phase offset 2*k*displacement.  This is the
    phased-upper-ring approximation of physically moving the reflector.
    """
    refl = Reflector(z=reflector_height, id="phase-equivalent",
                     reflection_coefficient=reflection_coefficient)
    dphi = 2.0 * constants.wavenumber * displacement
    return [s.with_phase(s.phase + dphi) for s in
            (mirror_source(src, refl) for src in ring)]
