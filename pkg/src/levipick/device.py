"""Emulation of the 56-channel phase controller and its wire protocol.

Each channel holds a phase register quantized to 2500 steps per cycle.
Commands stage changes into a next-state buffer; a COMMIT promotes all
staged registers and ring-enable flags to the live outputs atomically,
like the synchronous update on the real controller's clock edge.

Wire grammar (one command per line, case-insensitive keywords, `#`
starts a comment):

    INC <channel> <steps>
    DEC <channel> <steps>
    SET <channel> <value>
    RING <level> ON|OFF
    COMMIT
    QUERY
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .acoustics import ArrayState, PhysicalConstants, SourceState
from .images import Reflector, expand_images

TWO_PI_STEPS = 2500  # default phase steps per cycle


class ProtocolError(ValueError):
    """Base for wire-protocol failures."""


class ParseError(ProtocolError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"parse error at byte {offset}: {message}")
        self.offset = offset


class RangeError(ProtocolError):
    """Command arguments outside register/channel/level bounds."""


@dataclass(frozen=True)
class PhaseCommand:
    op: str  # INC | DEC | SET | RING | COMMIT | QUERY
    channel: int | None = None
    steps: int | None = None  # INC/DEC amount or SET value
    level: int | None = None
    enable: bool | None = None

    def to_line(self) -> str:
        if self.op in ("INC", "DEC", "SET"):
            return f"{self.op} {self.channel} {self.steps}"
        if self.op == "RING":
            return f"RING {self.level} {'ON' if self.enable else 'OFF'}"
        return self.op


def parse_command(line: str, channel_count: int = 56, rings: int = 4,
                  phase_steps: int = TWO_PI_STEPS) -> PhaseCommand:
    """Parse one wire-protocol line; comments after `#` are ignored."""
    code = line.split("#", 1)[0]
    tokens = code.split()
    if not tokens:
        raise ParseError("empty command", line.find("#") if "#" in line else 0)

    def offset_of(tok_index: int) -> int:
        # byte offset of the n-th token in the original line
        pos = 0
        for i, t in enumerate(code.split()):
            pos = code.index(t, pos)
            if i == tok_index:
                return pos
            pos += len(t)
        return len(code)

    op = tokens[0].upper()

    def need(n: int) -> None:
        if len(tokens) != n:
            raise ParseError(f"{op} takes {n - 1} argument(s), got {len(tokens) - 1}",
                             offset_of(min(len(tokens) - 1, n - 1)))

    def int_arg(i: int, what: str) -> int:
        try:
            return int(tokens[i], 10)
        except ValueError:
            raise ParseError(f"{what} must be an integer, got {tokens[i]!r}",
                             offset_of(i)) from None

    if op in ("INC", "DEC"):
        need(3)
        ch, n = int_arg(1, "channel"), int_arg(2, "step count")
        if not 0 <= ch < channel_count:
            raise RangeError(f"channel {ch} out of range 0..{channel_count - 1}")
        if n < 0:
            raise RangeError("step count must be >= 0")
        return PhaseCommand(op=op, channel=ch, steps=n)
    if op == "SET":
        need(3)
        ch, val = int_arg(1, "channel"), int_arg(2, "phase value")
        if not 0 <= ch < channel_count:
            raise RangeError(f"channel {ch} out of range 0..{channel_count - 1}")
        if not 0 <= val < phase_steps:
            raise RangeError(f"phase value {val} out of range 0..{phase_steps - 1}")
        return PhaseCommand(op=op, channel=ch, steps=val)
    if op == "RING":
        need(3)
        lvl = int_arg(1, "ring level")
        state = tokens[2].upper()
        if state not in ("ON", "OFF"):
            raise ParseError(f"expected ON or OFF, got {tokens[2]!r}", offset_of(2))
        if not 1 <= lvl <= rings:
            raise RangeError(f"ring level {lvl} out of range 1..{rings}")
        return PhaseCommand(op="RING", level=lvl, enable=(state == "ON"))
    if op in ("COMMIT", "QUERY"):
        need(1)
        return PhaseCommand(op=op)
    raise ParseError(f"unknown command {tokens[0]!r}", offset_of(0))


@dataclass
class DeviceState:
    """Quantized phase registers with a staged next-state buffer.

    Live state changes only at commit; a snapshot taken at any moment
    reflects exactly one committed state (single-writer discipline).
    """

    channel_count: int = 56
    rings: int = 4
    phase_steps_per_cycle: int = TWO_PI_STEPS
    live_phases: list[int] = field(default_factory=list)
    staged_phases: list[int] = field(default_factory=list)
    ring_enable: list[bool] = field(default_factory=list)
    staged_ring_enable: list[bool] = field(default_factory=list)
    commit_counter: int = 0

    def __post_init__(self):
        if not self.live_phases:
            self.live_phases = [0] * self.channel_count
        if not self.staged_phases:
            self.staged_phases = list(self.live_phases)
        if not self.ring_enable:
            self.ring_enable = [False] * self.rings
        if not self.staged_ring_enable:
            self.staged_ring_enable = list(self.ring_enable)

    def copy(self) -> "DeviceState":
        return DeviceState(
            channel_count=self.channel_count, rings=self.rings,
            phase_steps_per_cycle=self.phase_steps_per_cycle,
            live_phases=list(self.live_phases),
            staged_phases=list(self.staged_phases),
            ring_enable=list(self.ring_enable),
            staged_ring_enable=list(self.staged_ring_enable),
            commit_counter=self.commit_counter)

    def snapshot(self) -> dict:
        return {
            "channel_count": self.channel_count,
            "rings": self.rings,
            "phase_steps_per_cycle": self.phase_steps_per_cycle,
            "live_phases": list(self.live_phases),
            "ring_enable": list(self.ring_enable),
            "commit_counter": self.commit_counter,
        }


def apply_command(state: DeviceState, cmd: PhaseCommand) -> str | None:
    """Apply one command; only COMMIT touches live state.

    Returns the serialized snapshot for QUERY, None otherwise.  Raises
    RangeError (leaving the state unchanged) on out-of-range arguments.
    """
    steps = state.phase_steps_per_cycle
    if cmd.op in ("INC", "DEC", "SET"):
        if cmd.channel is None or not 0 <= cmd.channel < state.channel_count:
            raise RangeError(f"channel {cmd.channel} out of range")
        if cmd.op == "SET":
            if not 0 <= cmd.steps < steps:
                raise RangeError(f"phase value {cmd.steps} out of range")
            state.staged_phases[cmd.channel] = cmd.steps
        elif cmd.op == "INC":
            state.staged_phases[cmd.channel] = (state.staged_phases[cmd.channel] + cmd.steps) % steps
        else:
            state.staged_phases[cmd.channel] = (state.staged_phases[cmd.channel] - cmd.steps) % steps
        return None
    if cmd.op == "RING":
        if cmd.level is None or not 1 <= cmd.level <= state.rings:
            raise RangeError(f"ring level {cmd.level} out of range")
        state.staged_ring_enable[cmd.level - 1] = bool(cmd.enable)
        return None
    if cmd.op == "COMMIT":
        commit(state)
        return None
    if cmd.op == "QUERY":
        return json.dumps(state.snapshot(), separators=(",", ":"))
    raise ProtocolError(f"unknown op {cmd.op!r}")


def commit(state: DeviceState) -> DeviceState:
    """Promote all staged registers and ring flags to live, atomically."""
    state.live_phases = list(state.staged_phases)
    state.ring_enable = list(state.staged_ring_enable)
    state.commit_counter += 1
    return state


def apply_line(state: DeviceState, line: str) -> str | None:
    return apply_command(state, parse_command(
        line, channel_count=state.channel_count, rings=state.rings,
        phase_steps=state.phase_steps_per_cycle))


def to_array_state(state: DeviceState, geometry: list[SourceState],
                   constants: PhysicalConstants,
                   reflectors: list[Reflector] | None = None,
                   max_order: int = 1,
                   transducers_per_ring: int | None = None) -> ArrayState:
    """Build the field-math input for the current live device state."""
    if len(geometry) != state.channel_count:
        raise RangeError(f"geometry has {len(geometry)} channels, device has "
                         f"{state.channel_count}")
    per = transducers_per_ring or state.channel_count // state.rings
    two_pi = 2.0 * 3.141592653589793
    sources = []
    for src in geometry:
        ch = src.channel
        ring = ch // per
        phase = state.live_phases[ch] * two_pi / state.phase_steps_per_cycle
        amp = 1.0 if state.ring_enable[ring] else 0.0
        sources.append(SourceState(
            position=src.position, unit_normal=src.unit_normal, phase=phase,
            amplitude_scale=amp, reference_pressure=src.reference_pressure,
            aperture_radius=src.aperture_radius, channel=ch))
    if reflectors:
        sources = list(expand_images(sources, reflectors, max_order).expanded_sources)
    return ArrayState(sources, constants)


class PlanningError(ProtocolError):
    """The planner lost the trap node it was tracking."""


@dataclass(frozen=True)
class ScheduleStage:
    """One stage of the picking sequence: commands plus its height waypoint."""

    name: str
    expected_height: float  # m, node height this stage aims for
    command_lines: tuple[str, ...]


@dataclass
class PickingSchedule:
    """Replayable picking sequence bound to a concrete array geometry."""

    geometry: tuple[SourceState, ...]
    constants: PhysicalConstants
    rings: int
    transducers_per_ring: int
    reflectors: tuple[Reflector, ...]
    max_image_order: int
    target_height: float
    stages: list[ScheduleStage]

    @property
    def channel_count(self) -> int:
        return len(self.geometry)

    def array_state(self, state: DeviceState) -> ArrayState:
        return to_array_state(state, list(self.geometry), self.constants,
                              list(self.reflectors), self.max_image_order,
                              self.transducers_per_ring)

    def script(self) -> str:
        """Serialize to the wire grammar, one command per line."""
        lines = []
        for stage in self.stages:
            lines.append(f"# stage {stage.name}: node to "
                         f"{stage.expected_height * 1e3:.1f} mm")
            lines.extend(stage.command_lines)
        return "\n".join(lines) + "\n"

    def validate(self) -> None:
        if len(self.geometry) != self.rings * self.transducers_per_ring:
            raise ProtocolError("geometry does not fill rings x per_ring channels")
        heights = [s.expected_height for s in self.stages]
        if any(b <= a for a, b in zip(heights, heights[1:])):
            raise ProtocolError("expected stage heights must be strictly increasing")
        dev = DeviceState(channel_count=self.channel_count, rings=self.rings)
        for stage in self.stages:
            for line in stage.command_lines:
                apply_line(dev, line)


class _Planner:
    """Search that emits the six-stage picking script.

    The planner advances each stage on a simulated carried load: the same
    overdamped settle the replay uses, run for the same per-commit step
    allowance, so that planning and replay cannot disagree about where
    the particle is.  In parallel it follows the axial trap node (the
    potential minimum nearest the last one) after every commit as the
    adiabatic-tracking invariant; when the minimum annihilates at a fold
    of the node ladder, tracking slides downhill to the adjacent minimum,
    and planning fails only when no axial trap survives at all.
    """

    # height waypoints the six stages aim for, as fractions of target
    WAYPOINTS = (0.2, 0.3, 0.6, 0.9, 1.0)
    STAGE_BUDGET = 300  # commits per stage (3 full cycles at 25 steps)
    PROBE_COMMITS = 40  # trial commits when choosing a shift direction
    LOOKAHEAD = 120  # trial commits when scoring an activation preset
    PRESET_CANDIDATES = 5  # activation phases probed over the cycle

    def __init__(self, geometry, particle, constants, target_height,
                 reflectors, max_image_order, increment_steps, rings,
                 transducers_per_ring, motion=None):
        import numpy as np

        from .dynamics import MotionParams, settle  # lazy, avoids cycle
        from .gorkov import find_axial_nodes

        self._find_nodes = find_axial_nodes
        self._settle = settle
        self.geometry = tuple(geometry)
        self.particle = particle
        self.constants = constants
        self.target = target_height
        self.reflectors = tuple(reflectors)
        self.max_order = max_image_order
        self.inc = increment_steps
        self.rings = rings
        self.per = transducers_per_ring or len(self.geometry) // rings
        self.motion = motion or MotionParams()
        self.dev = DeviceState(channel_count=len(self.geometry), rings=rings)
        self.stages: list[ScheduleStage] = []
        self._lines: list[str] = []
        self.z_node: float | None = None
        self.pos = np.array([0.0, 0.0, particle.radius])

    # -- device plumbing ------------------------------------------------
    def _arr(self, dev: DeviceState | None = None) -> ArrayState:
        return to_array_state(dev or self.dev, list(self.geometry),
                              self.constants, list(self.reflectors),
                              self.max_order, self.per)

    def _channels(self, level: int) -> range:
        return range((level - 1) * self.per, level * self.per)

    def _emit(self, line: str) -> None:
        apply_line(self.dev, line)
        self._lines.append(line)

    def _shift_lines(self, levels, sign: int, steps: int | None = None):
        op = "INC" if sign > 0 else "DEC"
        n = steps if steps is not None else self.inc
        return [f"{op} {ch} {n}" for lvl in levels for ch in self._channels(lvl)]

    # -- node tracking --------------------------------------------------
    def _minima(self, arr: ArrayState, lo: float, hi: float):
        """Axial potential minima in [lo, hi] (restoring along z)."""
        lo = max(lo, self.particle.radius)
        if hi <= lo:
            return []
        nodes = self._find_nodes(arr, self.particle, (lo, hi))
        out = []
        for n in nodes:
            # restoring along the axis: the z-curvature is an eigenvalue
            # by symmetry; minima have at least one positive eigenvalue
            # and potential below both scan neighbours
            if n.stability == "stable":
                out.append(n)
            elif n.stability == "saddle" and self._is_axial_min(arr, n.z):
                out.append(n)
        return out

    def _is_axial_min(self, arr: ArrayState, z: float) -> bool:
        from .gorkov import gorkov_field
        import numpy as np

        h = self.constants.wavelength / 100.0
        pts = np.array([[0.0, 0.0, z - h], [0.0, 0.0, z], [0.0, 0.0, z + h]])
        u = gorkov_field(arr, pts, self.particle)
        return u[1] <= u[0] and u[1] <= u[2]

    def _minima_z_light(self, arr: ArrayState, lo: float, hi: float):
        """Axial-minimum z positions by a gradient-sign scan (no Hessians).

        Per-commit tracking only needs positions to micrometre accuracy;
        the full classification runs at stage boundaries.
        """
        import numpy as np

        from .gorkov import _axial_du_dz

        lo = max(lo, self.particle.radius)
        if hi <= lo:
            return []
        step = self.constants.wavelength / 50.0
        n = max(3, int((hi - lo) / step) + 2)
        zs = np.linspace(lo, hi, n)
        g = _axial_du_dz(arr, zs, self.particle)
        out = []
        for i in range(n - 1):
            if g[i] < 0.0 <= g[i + 1]:  # slope turns upward: a minimum
                a, b, ga = zs[i], zs[i + 1], g[i]
                for _ in range(30):
                    mid = 0.5 * (a + b)
                    gm = float(_axial_du_dz(arr, mid, self.particle)[0])
                    if b - a < 1e-7:
                        break
                    if ga * gm <= 0.0:
                        b = mid
                    else:
                        a, ga = mid, gm
                out.append(0.5 * (a + b))
        return out

    def _track(self, dev: DeviceState | None = None,
               z_prev: float | None = None) -> float:
        """Axial minimum the load follows after a commit.

        Normally the nearest minimum within a quarter wavelength of the
        previous one (adiabatic tracking).  When the minimum annihilates
        against its barrier (a fold of the node ladder) no minimum is
        that close; the load then slides down the axial potential, so
        tracking follows the gradient at the old position to the
        adjacent minimum in the downhill direction.  Planning fails only
        when no axial minimum survives anywhere in the array.
        """
        z_prev = self.z_node if z_prev is None else z_prev
        lam4 = self.constants.wavelength / 4.0
        arr = self._arr(dev)
        cands = self._minima_z_light(arr, z_prev - lam4, z_prev + lam4)
        if cands:
            return min(cands, key=lambda z: abs(z - z_prev))
        # fold handoff: slide downhill to the adjacent minimum
        from .gorkov import _axial_du_dz

        top = max(s.position[2] for s in self.geometry) + \
            self.constants.wavelength
        all_min = self._minima_z_light(arr, self.particle.radius, top)
        if not all_min:
            raise PlanningError(
                f"node tracking lost the trap near z = {z_prev * 1e3:.2f} mm "
                f"(no axial minimum remains)")
        slope = float(_axial_du_dz(arr, z_prev, self.particle)[0])
        below = [z for z in all_min if z < z_prev]
        above = [z for z in all_min if z >= z_prev]
        if slope > 0.0 and below:  # potential rises with z: slide down
            return max(below)
        if slope <= 0.0 and above:
            return min(above)
        return min(all_min, key=lambda z: abs(z - z_prev))

    # -- stage building -------------------------------------------------
    def _begin_stage(self) -> None:
        self._lines = []

    def _end_stage(self, name: str, expected: float) -> None:
        self.stages.append(ScheduleStage(name=name, expected_height=expected,
                                         command_lines=tuple(self._lines)))

    # -- simulated load -------------------------------------------------
    def _mini(self, pos, dev: DeviceState | None = None):
        """Per-commit settle allowance, identical to the replay's."""
        res = self._settle(self._arr(dev), self.particle, pos, self.motion,
                           max_steps=self.motion.steps_per_commit)
        return res.position

    def _full(self, pos, dev: DeviceState | None = None):
        res = self._settle(self._arr(dev), self.particle, pos, self.motion)
        return res.position

    def _probe_sign(self, levels, dev: DeviceState | None = None,
                    pos=None, commits: int | None = None) -> int:
        """Trial commits both ways; keep the direction that lifts the load."""
        dev = dev or self.dev
        pos = self.pos if pos is None else pos
        commits = commits or self.PROBE_COMMITS
        best_sign, best_z = +1, -1.0
        for sign in (+1, -1):
            trial = dev.copy()
            p = pos.copy()
            for _ in range(commits):
                for line in self._shift_lines(levels, sign):
                    apply_line(trial, line)
                apply_line(trial, "COMMIT")
                p = self._mini(p, trial)
            if p[2] > best_z:
                best_sign, best_z = sign, p[2]
        return best_sign

    def _run_shift(self, levels, stop_height: float, budget: int | None = None):
        """Emit increments until the load reaches stop_height or the budget ends."""
        sign = self._probe_sign(levels)
        budget = budget or self.STAGE_BUDGET
        for _ in range(budget):
            for line in self._shift_lines(levels, sign):
                self._emit(line)
            self._emit("COMMIT")
            self.pos = self._mini(self.pos)
            self.z_node = self._track()
            if self.pos[2] >= stop_height:
                return "reached"
        return "budget"

    def _activate_ring(self, level: int, next_levels,
                       also_off: int | None = None) -> None:
        """Enable a ring at the activation phase that lifts best afterwards.

        Every candidate preset over the cycle is scored by how high the
        simulated load gets after a lookahead run of the stage's own
        shift commits; presets that drop the load score themselves out.
        The physical operator's equivalent is finding, by trial, a
        starting phase for the new ring that keeps hold of the object.
        """
        steps = self.dev.phase_steps_per_cycle
        lam = self.constants.wavelength
        best = None
        for preset in range(0, steps, steps // self.PRESET_CANDIDATES):
            trial = self.dev.copy()
            for ch in self._channels(level):
                apply_line(trial, f"SET {ch} {preset}")
            apply_line(trial, f"RING {level} ON")
            if also_off is not None:
                apply_line(trial, f"RING {also_off} OFF")
            apply_line(trial, "COMMIT")
            p = self._settle(self._arr(trial), self.particle, self.pos,
                             self.motion, max_steps=250).position
            if p[2] < self.pos[2] - lam / 2.0:
                continue  # this preset drops the load outright
            sign = self._probe_sign(next_levels, trial, p)
            for _ in range(self.LOOKAHEAD):
                for line in self._shift_lines(next_levels, sign):
                    apply_line(trial, line)
                apply_line(trial, "COMMIT")
                p = self._mini(p, trial)
            if best is None or p[2] > best[0]:
                best = (p[2], preset)
        if best is None:
            raise PlanningError(
                f"no activation phase for ring {level} keeps the load")
        _, preset = best
        for ch in self._channels(level):
            self._emit(f"SET {ch} {preset}")
        self._emit(f"RING {level} ON")
        if also_off is not None:
            self._emit(f"RING {also_off} OFF")
        self._emit("COMMIT")
        self.pos = self._mini(self.pos)
        self.z_node = self._track()

    # -- the six stages -------------------------------------------------
    def plan(self) -> PickingSchedule:
        expect = [w * self.target for w in self.WAYPOINTS]
        ring_z = [max(self.geometry[ch].position[2]
                      for ch in self._channels(lvl))
                  for lvl in range(1, self.rings + 1)]

        # (a) activate the two bottom rings; the load settles into the
        # lowest trap of the static two-ring field
        self._begin_stage()
        self._emit("RING 1 ON")
        self._emit("RING 2 ON")
        self._emit("COMMIT")
        self.pos = self._full(self.pos)
        low = self._minima(self._arr(), self.particle.radius, ring_z[1])
        if not low:
            raise PlanningError("no axial trap appears above the floor with "
                                "the two bottom rings active")
        self.z_node = low[0].z
        self._end_stage("a", self.z_node)

        # (b) lift within the bottom pair: shift ring 2
        self._begin_stage()
        self._run_shift([2], expect[0])
        self.pos = self._full(self.pos)
        self._end_stage("b", expect[0])

        # (c) keep lifting: shift ring 1
        self._begin_stage()
        self._run_shift([1], expect[1])
        self.pos = self._full(self.pos)
        self._end_stage("c", expect[1])

        # (d) bring in ring 3; joint shift below ring 2 (the moving
        # interference patterns there are the ones tied to ring 1), then
        # ring 3 alone above it (the transport coordinate becomes the
        # ring-3/ring-2 phase difference, frozen under a joint shift)
        self._begin_stage()
        self._activate_ring(3, [2, 3])
        if self.pos[2] < ring_z[1]:
            self._run_shift([2, 3], min(ring_z[1] * 1.05, expect[2]))
        if self.pos[2] < expect[2]:
            self._run_shift([3], expect[2])
        self.pos = self._full(self.pos)
        self._end_stage("d", expect[2])

        # (e) swap ring 1 for ring 4; shift the top pair up
        self._begin_stage()
        self._activate_ring(4, [3, 4], also_off=1)
        self._run_shift([3, 4], expect[3])
        self.pos = self._full(self.pos)
        self._end_stage("e", expect[3])

        # (f) drop ring 2; finish on the top pair
        self._begin_stage()
        self._emit("RING 2 OFF")
        self._emit("COMMIT")
        self.pos = self._mini(self.pos)
        self.z_node = self._track()
        self._run_shift([4], expect[4])
        self.pos = self._full(self.pos)
        self._end_stage("f", expect[4])

        sched = PickingSchedule(
            geometry=self.geometry, constants=self.constants,
            rings=self.rings, transducers_per_ring=self.per,
            reflectors=self.reflectors, max_image_order=self.max_order,
            target_height=self.target * 0.9, stages=self.stages)
        return sched


def plan_picking(geometry, particle, constants, target_height: float = 0.050,
                 reflectors=(Reflector(z=0.0, id="table"),),
                 max_image_order: int = 1, increment_steps: int = 25,
                 rings: int = 4,
                 transducers_per_ring: int | None = None) -> PickingSchedule:
    """Plan the six-stage picking script for a 4-ring cylinder over a table.

    Stages: (a) activate rings 1+2, (b) shift ring 2, (c) shift ring 1,
    (d) activate ring 3 and shift 2+3 then 3, (e) swap ring 1 for ring 4
    and shift 3+4, (f) drop ring 2 and shift ring 4.  Within each stage
    the planner emits small phase increments, advances a simulated load
    with the replay integrator, and follows the axial trap node after
    every commit; the stage ends when the load reaches its height
    waypoint (20/30/60/90/100 % of target) or the commit budget runs
    out.  Raises PlanningError if every axial trap disappears.
    """
    planner = _Planner(geometry, particle, constants, target_height,
                       reflectors, max_image_order, increment_steps, rings,
                       transducers_per_ring)
    return planner.plan()
