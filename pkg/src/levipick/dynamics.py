"""Quasi-static particle motion, schedule replay and basin-of-attraction maps.

Motion is overdamped: at these scales viscous drag dominates, so the
particle creeps along the net force F_a + gravity with a per-step
displacement cap, and the total potential U + m*g*z never increases
between accepted steps (backtracking halves any overshooting step).
The cylinder axis is an invariant manifold of a symmetric array; lateral
force components below a small noise floor are zeroed so that rounding
noise in the gradient stencils cannot seed a spurious symmetry break.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .acoustics import ArrayState
from .gorkov import GridSpec, Particle, force_field, gorkov_field

LATERAL_NOISE_FLOOR = 1e-13  # N; below this a force component is stencil noise
_DESCENT_SLACK = 1e-12  # J; allowed total-potential increase per accepted step
_MAX_BACKTRACKS = 24


class EscapeError(RuntimeError):
    """Particle left the simulation bounding box during schedule replay."""

    def __init__(self, position):
        super().__init__(f"particle escaped the array volume at {position}")
        self.position = tuple(float(x) for x in position)


@dataclass(frozen=True)
class MotionParams:
    """Overdamped integrator settings."""

    step_limit: int = 20000
    displacement_cap: float = 343.0 / 40000.0 / 50.0  # m, lambda/50 at defaults
    convergence_epsilon: float = 1e-6  # m
    mobility: float | None = None  # m/(N*step); None = auto from first step
    trajectory_decimation: int = 10
    # steps granted between schedule commits; the phase sweep is fast
    # compared with particle motion, so transit through weakly confining
    # regions is brief, as with a human operator tapping increment keys
    steps_per_commit: int = 25

    def __post_init__(self):
        if min(self.step_limit, self.displacement_cap,
               self.convergence_epsilon, self.trajectory_decimation,
               self.steps_per_commit) <= 0:
            raise ValueError("motion parameters must be positive")
        if self.mobility is not None and self.mobility <= 0:
            raise ValueError("mobility must be positive")


@dataclass
class SettleResult:
    position: np.ndarray
    converged: bool
    trajectory: np.ndarray  # (n, 3), decimated
    steps_taken: int


@dataclass
class ScheduleOutcome:
    success: bool
    final_position: np.ndarray
    stage_heights: list[float]  # m, particle height after each stage
    stage_names: list[str]
    trajectory: np.ndarray  # (n, 3) particle position after each commit
    target_height: float


@dataclass
class BasinMap:
    xs: np.ndarray
    ys: np.ndarray
    classes: np.ndarray  # (nx, ny) of {"pickable","attractable","unreachable"}
    spacing: float
    metadata: dict = field(default_factory=dict)

    def pickable_fraction(self) -> float:
        return float(np.mean(self.classes == "pickable"))

    def equivalent_diameter(self) -> float:
        """Diameter of the circle with the same area as the pickable cells."""
        area = float(np.sum(self.classes == "pickable")) * self.spacing ** 2
        return 2.0 * math.sqrt(area / math.pi)


def _net_force(arr: ArrayState, pos: np.ndarray, particle: Particle,
               floor_z: float) -> np.ndarray:
    f = force_field(arr, pos, particle).copy()
    f[2] -= particle.weight
    f[np.abs(f) < LATERAL_NOISE_FLOOR] = 0.0
    if pos[2] <= floor_z + 1e-12 and f[2] < 0.0:
        f[2] = 0.0  # resting contact: the table carries the load
    return f


def _total_potential(arr: ArrayState, pos: np.ndarray, particle: Particle) -> float:
    u = float(gorkov_field(arr, pos, particle))
    return u + particle.mass * particle.gravity * pos[2]


def settle(arr: ArrayState, particle: Particle, start, params: MotionParams,
           max_steps: int | None = None) -> SettleResult:
    """Creep to a local minimum of U + m*g*z from `start`.

    The step is mobility * net force (auto mobility: one displacement
    cap per particle-weight of force), capped at displacement_cap and
    backtracked (halved) until the total potential does not increase.
    Floor contact clamps z at the particle radius.
    """
    pos = np.asarray(start, dtype=float).copy()
    floor_z = particle.radius
    if pos[2] < floor_z:
        pos[2] = floor_z
    limit = params.step_limit if max_steps is None else min(max_steps, params.step_limit)
    cap = params.displacement_cap

    f = _net_force(arr, pos, particle, floor_z)
    u = _total_potential(arr, pos, particle)
    traj = [pos.copy()]
    converged = False
    steps = 0
    for steps in range(1, limit + 1):
        norm = float(np.linalg.norm(f))
        if norm == 0.0:
            converged = True
            break
        # auto mobility renormalizes per step: forces at or above one
        # particle weight move at the full displacement cap, weaker
        # forces proportionally slower
        mob = (params.mobility if params.mobility is not None
               else cap / max(norm, particle.weight))
        d = f * mob
        dn = float(np.linalg.norm(d))
        if dn > cap:
            d *= cap / dn
        # backtrack until the move is downhill in total potential
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            cand = pos + d
            cand[2] = max(cand[2], floor_z)
            u_cand = _total_potential(arr, cand, particle)
            if u_cand <= u + _DESCENT_SLACK:
                accepted = True
                break
            d = d / 2.0
        if not accepted:
            converged = True  # cannot descend further at double precision
            break
        moved = float(np.linalg.norm(cand - pos))
        pos, u = cand, u_cand
        if steps % params.trajectory_decimation == 0:
            traj.append(pos.copy())
        if moved < params.convergence_epsilon:
            converged = True
            break
        f = _net_force(arr, pos, particle, floor_z)
    traj.append(pos.copy())
    return SettleResult(position=pos, converged=converged,
                        trajectory=np.array(traj), steps_taken=steps)


def _bounding_box(schedule) -> tuple[float, float]:
    """(max radius, max z) the particle may occupy during replay."""
    radius = max(math.hypot(s.position[0], s.position[1])
                 for s in schedule.geometry)
    top = max(s.position[2] for s in schedule.geometry)
    lam = schedule.constants.wavelength
    return radius, top + 4.0 * lam


def simulate_schedule(schedule, particle: Particle, params: MotionParams,
                      start=None) -> ScheduleOutcome:
    """Replay a picking schedule, settling the particle between commits.

    Each commit gets `params.steps_per_commit` integration steps (the
    command stream outpaces the particle); every stage ends with a full
    settle.  Success means the final height reaches the schedule target.
    """
    from .device import DeviceState, apply_line  # local import, avoids cycle

    dev = DeviceState(channel_count=len(schedule.geometry),
                      rings=schedule.rings)
    if start is None:
        pos = np.array([0.0, 0.0, particle.radius])
    else:
        pos = np.asarray(start, dtype=float).copy()
    max_r, max_z = _bounding_box(schedule)
    stage_heights, stage_names = [], []
    commit_positions = [pos.copy()]
    for stage in schedule.stages:
        for line in stage.command_lines:
            apply_line(dev, line)
            if line.split("#", 1)[0].strip().upper() == "COMMIT":
                arr = schedule.array_state(dev)
                res = settle(arr, particle, pos, params,
                             max_steps=params.steps_per_commit)
                pos = res.position
                commit_positions.append(pos.copy())
                if math.hypot(pos[0], pos[1]) > max_r or pos[2] > max_z:
                    raise EscapeError(pos)
        arr = schedule.array_state(dev)
        res = settle(arr, particle, pos, params)
        pos = res.position
        commit_positions.append(pos.copy())
        if math.hypot(pos[0], pos[1]) > max_r or pos[2] > max_z:
            raise EscapeError(pos)
        stage_heights.append(float(pos[2]))
        stage_names.append(stage.name)
    return ScheduleOutcome(
        success=bool(pos[2] >= schedule.target_height),
        final_position=pos, stage_heights=stage_heights,
        stage_names=stage_names, trajectory=np.array(commit_positions),
        target_height=schedule.target_height)


def basin_map(schedule, particle: Particle, grid_spec: GridSpec | None = None,
              params: MotionParams | None = None, spacing: float = 0.005,
              extent: float = 0.025) -> BasinMap:
    """Classify start positions on the table by picking outcome.

    pickable: the full schedule lifts the particle to its target.
    attractable: the first lifting stage's static field pulls the
    particle laterally into the pickable footprint.
    unreachable: everything else (including starts outside the array).
    """
    from .device import DeviceState, apply_line  # local import, avoids cycle

    params = params or MotionParams()
    if grid_spec is not None:
        grid_spec.validate()
        xs = np.linspace(grid_spec.mins[0], grid_spec.maxs[0], grid_spec.shape[0])
        ys = np.linspace(grid_spec.mins[1], grid_spec.maxs[1], grid_spec.shape[1])
        spacing = xs[1] - xs[0] if len(xs) > 1 else spacing
    else:
        n = int(round(2 * extent / spacing)) + 1
        xs = np.linspace(-extent, extent, n)
        ys = np.linspace(-extent, extent, n)
    wall_r = min(math.hypot(s.position[0], s.position[1])
                 for s in schedule.geometry)
    start_z = particle.radius
    classes = np.full((len(xs), len(ys)), "unreachable", dtype=object)

    # static field of the capture stage (the first stage of the schedule)
    dev = DeviceState(channel_count=len(schedule.geometry),
                      rings=schedule.rings)
    for line in schedule.stages[0].command_lines:
        apply_line(dev, line)
    arr_first = schedule.array_state(dev)

    # reference run from the axis.  Any start that the capture stage pulls
    # into the same trap replays identically afterwards (the dynamics are
    # deterministic), so the expensive lift is simulated once.
    centre_out = simulate_schedule(schedule, particle, params)
    centre_cap = settle(arr_first, particle, (0.0, 0.0, start_z),
                        params).position
    capture_tol = 1e-3  # m

    captured = {}
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            r = math.hypot(x, y)
            if r >= wall_r - 2.0 * particle.radius:
                continue  # outside (or inside the wall of) the array
            cap = settle(arr_first, particle, (x, y, start_z), params).position
            captured[(i, j)] = cap
            if float(np.linalg.norm(cap - centre_cap)) < capture_tol:
                if centre_out.success:
                    classes[i, j] = "pickable"
                continue
            try:
                out = simulate_schedule(schedule, particle, params,
                                        start=(x, y, start_z))
            except EscapeError:
                continue
            if out.success:
                classes[i, j] = "pickable"

    pick_xy = [(xs[i], ys[j]) for (i, j) in captured
               if classes[i, j] == "pickable"]
    if pick_xy:
        # lateral attraction: the capture-stage field drags the particle
        # into the pickable footprint even though its own cell is not in it
        for (i, j), cap in captured.items():
            if classes[i, j] == "pickable":
                continue
            near = min(math.hypot(cap[0] - qx, cap[1] - qy)
                       for qx, qy in pick_xy)
            if near <= spacing:
                classes[i, j] = "attractable"
    return BasinMap(xs=xs, ys=ys, classes=classes, spacing=float(spacing),
                    metadata={"target_height": schedule.target_height})
