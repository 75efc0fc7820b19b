"""Gor'kov potential, radiation force, field grids and axial trap nodes.

U = 2*pi*R^3 * ( <p^2> / (3*rho0*c0^2) - rho0 * <v.v> / 2 )
with the harmonic time averages <x^2> = |X|^2 / 2 of the complex
amplitudes.  The radiation force is F = -grad(U), evaluated by central
differences; trap nodes are stationary points of U on the cylinder axis,
classified by the eigenvalues of the 3-D Hessian.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .acoustics import ArrayState, pressure_field, velocity_field

NODE_GRAD_TOL = 1e-12  # J/m; |dU/dz| at an accepted stationary point
STIFFNESS_FLOOR = 1e-15  # J/m^2; eigenvalues above this count as restoring


@dataclass(frozen=True)
class Particle:
    """Small rigid sphere being trapped.  Default is the 1 mg, 2 mm ball."""

    radius: float = 0.001  # m
    density: float = 239.0  # kg/m^3
    gravity: float = 9.81  # m/s^2

    def __post_init__(self):
        if self.radius <= 0 or self.density <= 0:
            raise ValueError("radius and density must be positive")

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius ** 3

    @property
    def mass(self) -> float:
        return self.density * self.volume

    @property
    def weight(self) -> float:
        return self.mass * self.gravity


@dataclass(frozen=True)
class TrapNode:
    position: tuple[float, float, float]
    potential: float  # J
    stability: str  # "stable" | "saddle" | "unstable"
    hessian_eigenvalues: tuple[float, float, float]  # J/m^2

    @property
    def restoring_stiffness(self) -> float:
        return min(self.hessian_eigenvalues)

    @property
    def z(self) -> float:
        return self.position[2]


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned sampling box; z must stay above the table."""

    mins: tuple[float, float, float]
    maxs: tuple[float, float, float]
    shape: tuple[int, int, int]

    def validate(self) -> None:
        if any(n < 1 for n in self.shape):
            raise ValueError("grid shape entries must be >= 1")
        if any(hi < lo for lo, hi in zip(self.mins, self.maxs)):
            raise ValueError("grid maxs must be >= mins")
        if self.mins[2] < 0:
            raise ValueError("grid must not extend below z = 0")

    def points(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, n) if n > 1 else np.array([(lo + hi) / 2.0])
                for lo, hi, n in zip(self.mins, self.maxs, self.shape)]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1)


@dataclass
class FieldGrid:
    spec: GridSpec
    points: np.ndarray  # (nx, ny, nz, 3)
    potential: np.ndarray  # (nx, ny, nz) J
    force: np.ndarray  # (nx, ny, nz, 3) N
    pressure_abs: np.ndarray  # (nx, ny, nz) Pa
    metadata: dict = field(default_factory=dict)


def _check_particle(particle: Particle, arr: ArrayState) -> None:
    if particle.radius > arr.constants.wavelength / 8.0:
        warnings.warn("particle radius exceeds lambda/8; Gor'kov model is "
                      "outside its validity range", stacklevel=3)


def gorkov_field(arr: ArrayState, points, particle: Particle) -> np.ndarray:
    """Gor'kov potential at a batch of points, shape (..., 3) -> (...)."""
    _check_particle(particle, arr)
    c = arr.constants
    p = pressure_field(arr, points)
    v = velocity_field(arr, points)
    p_sq = np.abs(p) ** 2  # |p|^2; time average adds the factor 1/2
    v_sq = np.sum(np.abs(v) ** 2, axis=-1)
    pref = 2.0 * math.pi * particle.radius ** 3
    return pref * (p_sq / (6.0 * c.air_density * c.speed_of_sound ** 2)
                   - c.air_density * v_sq / 4.0)


def gorkov_potential(arr: ArrayState, point, particle: Particle) -> float:
    return float(gorkov_field(arr, np.asarray(point, dtype=float), particle))


def force_field(arr: ArrayState, points, particle: Particle,
                step: float | None = None, richardson: bool = False) -> np.ndarray:
    """Radiation force -grad(U) at a batch of points, shape (..., 3)."""
    h = step if step is not None else arr.gradient_step

    def grad(hh: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        m = pts.shape[0]
        stencil = np.zeros((m, 3, 2, 3))
        for ax in range(3):
            for si, sgn in enumerate((1.0, -1.0)):
                stencil[:, ax, si, :] = pts
                stencil[:, ax, si, ax] += sgn * hh
        u = gorkov_field(arr, stencil.reshape(-1, 3), particle).reshape(m, 3, 2)
        return (u[:, :, 0] - u[:, :, 1]) / (2.0 * hh)

    g = grad(h)
    if richardson:
        g2 = grad(h / 2.0)
        g = (4.0 * g2 - g) / 3.0
    shape = np.asarray(points, dtype=float).shape
    return (-g).reshape(shape)


def acoustic_force(arr: ArrayState, point, particle: Particle,
                   step: float | None = None, richardson: bool = False) -> np.ndarray:
    return force_field(arr, np.asarray(point, dtype=float), particle,
                       step=step, richardson=richardson)


def sample_grid(arr: ArrayState, grid_spec: GridSpec, particle: Particle,
                metadata: dict | None = None) -> FieldGrid:
    grid_spec.validate()
    pts = grid_spec.points()
    u = gorkov_field(arr, pts, particle)
    f = force_field(arr, pts, particle)
    p = np.abs(pressure_field(arr, pts))
    return FieldGrid(spec=grid_spec, points=pts, potential=u, force=f,
                     pressure_abs=p, metadata=dict(metadata or {}))


def hessian(arr: ArrayState, point, particle: Particle,
            step: float | None = None) -> np.ndarray:
    """3x3 Hessian of U by central second differences."""
    h = step if step is not None else arr.constants.wavelength / 100.0
    p0 = np.asarray(point, dtype=float)
    # 19 evaluations: center, 6 axis points, 12 diagonal points
    pts = [p0]
    for ax in range(3):
        for sgn in (1.0, -1.0):
            q = p0.copy()
            q[ax] += sgn * h
            pts.append(q)
    pairs = [(0, 1), (0, 2), (1, 2)]
    for a, b in pairs:
        for sa in (1.0, -1.0):
            for sb in (1.0, -1.0):
                q = p0.copy()
                q[a] += sa * h
                q[b] += sb * h
                pts.append(q)
    u = gorkov_field(arr, np.asarray(pts), particle)
    hess = np.zeros((3, 3))
    for ax in range(3):
        hess[ax, ax] = (u[1 + 2 * ax] - 2.0 * u[0] + u[2 + 2 * ax]) / h ** 2
    idx = 7
    for a, b in pairs:
        upp, upm, ump, umm = u[idx], u[idx + 1], u[idx + 2], u[idx + 3]
        hess[a, b] = hess[b, a] = (upp - upm - ump + umm) / (4.0 * h ** 2)
        idx += 4
    return hess


def _classify(eigs: np.ndarray) -> str:
    if np.all(eigs > STIFFNESS_FLOOR):
        return "stable"
    if np.all(eigs < -STIFFNESS_FLOOR):
        return "unstable"
    return "saddle"


def classify_stability(arr: ArrayState, point, particle: Particle,
                       grad_tol: float = NODE_GRAD_TOL) -> TrapNode:
    """Build a TrapNode at an (approximately) stationary point."""
    f = acoustic_force(arr, point, particle)
    if np.linalg.norm(f) > 10.0 * grad_tol:
        warnings.warn(f"point is not stationary: |grad U| = {np.linalg.norm(f):.3e} J/m",
                      stacklevel=2)
    eigs = np.linalg.eigvalsh(hessian(arr, point, particle))
    p0 = np.asarray(point, dtype=float)
    return TrapNode(position=(p0[0], p0[1], p0[2]),
                    potential=gorkov_potential(arr, p0, particle),
                    stability=_classify(eigs),
                    hessian_eigenvalues=tuple(float(e) for e in eigs))


def _axial_du_dz(arr: ArrayState, z, particle: Particle) -> np.ndarray:
    """dU/dz on the axis, central difference with the array gradient step."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    h = arr.gradient_step
    pts = np.zeros((z.size, 2, 3))
    pts[:, 0, 2] = z + h
    pts[:, 1, 2] = z - h
    u = gorkov_field(arr, pts.reshape(-1, 3), particle).reshape(z.size, 2)
    return (u[:, 0] - u[:, 1]) / (2.0 * h)


def find_axial_nodes(arr: ArrayState, particle: Particle,
                     z_range: tuple[float, float],
                     scan_step: float | None = None,
                     grad_tol: float = NODE_GRAD_TOL) -> list[TrapNode]:
    """Stationary points of U on the z axis, refined by bisection on dU/dz.

    Returns nodes sorted by z; an empty list is a valid result.
    """
    z_lo, z_hi = z_range
    if z_hi <= z_lo:
        raise ValueError("z_range must be increasing")
    step = scan_step if scan_step is not None else arr.constants.wavelength / 50.0
    n = max(3, int(math.ceil((z_hi - z_lo) / step)) + 1)
    zs = np.linspace(z_lo, z_hi, n)
    g = _axial_du_dz(arr, zs, particle)
    nodes = []
    for i in range(n - 1):
        ga, gb = g[i], g[i + 1]
        if ga == 0.0:
            # isolated zero of the gradient; flat (zero-field) segments
            # have no trap and are skipped
            if gb != 0.0:
                nodes.append(zs[i])
            continue
        if ga * gb < 0.0:
            a, b, fa = zs[i], zs[i + 1], ga
            for _ in range(200):
                mid = 0.5 * (a + b)
                fm = float(_axial_du_dz(arr, mid, particle)[0])
                if abs(fm) < grad_tol or (b - a) < 1e-15:
                    break
                if fa * fm < 0.0:
                    b = mid
                else:
                    a, fa = mid, fm
            nodes.append(0.5 * (a + b))
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for z in sorted(nodes):
            out.append(classify_stability(arr, (0.0, 0.0, float(z)), particle,
                                          grad_tol=grad_tol))
    return out


def levitation_equilibrium(arr: ArrayState, particle: Particle,
                           node: TrapNode) -> np.ndarray | None:
    """Axial position below a stable node where F_a_z balances the weight.

    Returns None when the peak upward force under the node is below the
    particle weight (absence is a result, not an error).
    """
    if node.stability != "stable":
        raise ValueError("levitation equilibrium requires a stable node")
    w = particle.weight
    lam = arr.constants.wavelength
    zs = np.linspace(max(node.z - lam / 4.0, 1e-6), node.z, 101)
    pts = np.zeros((zs.size, 3))
    pts[:, 2] = zs
    fz = force_field(arr, pts, particle)[:, 2]
    net = fz - w
    # walk down from the node: equilibrium is the first crossing below it
    for i in range(zs.size - 1, 0, -1):
        if net[i] <= 0.0 <= net[i - 1] or net[i - 1] >= 0.0 >= net[i]:
            a, b = zs[i - 1], zs[i]
            fa = net[i - 1]
            for _ in range(100):
                mid = 0.5 * (a + b)
                fm = float(force_field(arr, np.array([[0.0, 0.0, mid]]),
                                       particle)[0, 2]) - w
                if abs(b - a) < 1e-12:
                    break
                if fa * fm <= 0.0:
                    b = mid
                else:
                    a, fa = mid, fm
            return np.array([node.position[0], node.position[1], 0.5 * (a + b)])
    return None
