"""Human-editable experiment configuration (`arrayspec v1`).

A config file is a YAML key-value tree with the sections below; every
key is optional and falls back to the documented default.

    arrayspec:
      version: 1
      kind: cylinder            # cylinder | planar
      rings: 4
      transducers_per_ring: 14
      ring_diameter: 0.042875   # m
      ring_heights: [0.003, 0.020, 0.035, 0.050]
      reference_pressure: 3.0   # Pa*m at 1 m on axis
      aperture_radius: 0.0045   # m
      # planar-only keys: count, pitch, grid_shape, height, focus_point
    physics:
      speed_of_sound: 343.0
      air_density: 1.2
      frequency: 40000.0
    particle:
      radius: 0.001
      density: 239.0
      gravity: 9.81
    reflectors:
      - {z: 0.0, reflection_coefficient: 1.0, id: table}
    images:
      max_order: 1
    motion:
      step_limit: 20000
      displacement_cap: 0.0001715
      convergence_epsilon: 1.0e-6
      steps_per_commit: 25
    picking:
      target_height: 0.045
      increment_steps: 25
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import yaml

from .acoustics import PhysicalConstants, SourceState
from .dynamics import MotionParams
from .geometry import ArraySpecError, CylinderSpec, PlanarSpec, build_cylinder, build_planar
from .gorkov import Particle
from .images import Reflector


class ConfigError(ValueError):
    """Configuration file fails schema validation."""


@dataclass(frozen=True)
class PickingParams:
    target_height: float = 0.045  # m
    increment_steps: int = 25  # device phase steps per planner commit

    def __post_init__(self):
        if self.target_height <= 0 or self.increment_steps <= 0:
            raise ConfigError("picking parameters must be positive")


@dataclass(frozen=True)
class TrapConfig:
    """Everything one experiment needs, resolved to concrete values."""

    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    particle: Particle = field(default_factory=Particle)
    array_kind: str = "cylinder"
    cylinder: CylinderSpec = field(default_factory=CylinderSpec)
    planar: PlanarSpec = field(default_factory=PlanarSpec)
    reflectors: tuple[Reflector, ...] = (Reflector(z=0.0, id="table"),)
    max_image_order: int = 1
    motion: MotionParams = field(default_factory=MotionParams)
    picking: PickingParams = field(default_factory=PickingParams)

    def build_sources(self) -> list[SourceState]:
        if self.array_kind == "cylinder":
            return build_cylinder(self.cylinder)
        if self.array_kind == "planar":
            return build_planar(self.planar, self.constants)
        raise ConfigError(f"unknown array kind {self.array_kind!r}")


def _section(tree: dict, name: str) -> dict:
    sec = tree.get(name, {})
    if sec is None:
        return {}
    if not isinstance(sec, dict) and name != "reflectors":
        raise ConfigError(f"section {name!r} must be a mapping")
    return sec


def _take(sec: dict, cls_defaults, mapping: dict[str, str], what: str):
    kwargs = {}
    for key, attr in mapping.items():
        if key in sec:
            kwargs[attr] = sec[key]
    unknown = set(sec) - set(mapping)
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
    try:
        return replace(cls_defaults, **kwargs) if kwargs else cls_defaults
    except (TypeError, ValueError, ArraySpecError) as exc:
        raise ConfigError(f"invalid {what} section: {exc}") from exc


def parse_config(tree: dict) -> TrapConfig:
    if not isinstance(tree, dict):
        raise ConfigError("config root must be a mapping")
    arr = dict(_section(tree, "arrayspec"))
    version = arr.pop("version", 1)
    if version != 1:
        raise ConfigError(f"unsupported arrayspec version {version!r}")
    kind = arr.pop("kind", "cylinder")
    if kind not in ("cylinder", "planar"):
        raise ConfigError(f"unknown array kind {kind!r}")

    constants = _take(_section(tree, "physics"), PhysicalConstants(), {
        "speed_of_sound": "speed_of_sound", "air_density": "air_density",
        "frequency": "frequency"}, "physics")
    particle = _take(_section(tree, "particle"), Particle(), {
        "radius": "radius", "density": "density", "gravity": "gravity"},
        "particle")

    cyl, pla = CylinderSpec(), PlanarSpec()
    if kind == "cylinder":
        arr.setdefault("ring_heights", list(cyl.ring_heights))
        arr["ring_heights"] = tuple(arr["ring_heights"])
        cyl = _take(arr, cyl, {
            "rings": "rings", "transducers_per_ring": "transducers_per_ring",
            "ring_diameter": "ring_diameter", "ring_heights": "ring_heights",
            "reference_pressure": "reference_pressure",
            "aperture_radius": "aperture_radius"}, "arrayspec")
        cyl.validate()
    else:
        if "grid_shape" in arr:
            arr["grid_shape"] = tuple(arr["grid_shape"])
        if "focus_point" in arr:
            arr["focus_point"] = tuple(arr["focus_point"])
        pla = _take(arr, pla, {
            "count": "count", "pitch": "pitch", "grid_shape": "grid_shape",
            "height": "height", "focus_point": "focus_point",
            "reference_pressure": "reference_pressure",
            "aperture_radius": "aperture_radius"}, "arrayspec")
        pla.validate()

    refl_sec = tree.get("reflectors", [{"z": 0.0, "reflection_coefficient": 1.0,
                                        "id": "table"}])
    if refl_sec is None:
        refl_sec = []
    if not isinstance(refl_sec, list):
        raise ConfigError("reflectors must be a list")
    reflectors = []
    for i, r in enumerate(refl_sec):
        try:
            reflectors.append(Reflector(z=float(r["z"]),
                                        reflection_coefficient=float(
                                            r.get("reflection_coefficient", 1.0)),
                                        id=str(r.get("id", f"reflector{i}"))))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid reflector entry {r!r}: {exc}") from exc

    images = _section(tree, "images")
    max_order = int(images.get("max_order", 1))
    if max_order < 0:
        raise ConfigError("images.max_order must be >= 0")

    motion = _take(_section(tree, "motion"), MotionParams(), {
        "step_limit": "step_limit", "displacement_cap": "displacement_cap",
        "convergence_epsilon": "convergence_epsilon", "mobility": "mobility",
        "steps_per_commit": "steps_per_commit"}, "motion")
    picking = _take(_section(tree, "picking"), PickingParams(), {
        "target_height": "target_height",
        "increment_steps": "increment_steps"}, "picking")

    known = {"arrayspec", "physics", "particle", "reflectors", "images",
             "motion", "picking"}
    unknown = set(tree) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    return TrapConfig(constants=constants, particle=particle, array_kind=kind,
                      cylinder=cyl, planar=pla, reflectors=tuple(reflectors),
                      max_image_order=max_order, motion=motion, picking=picking)


def load_config(path) -> TrapConfig:
    with open(path, "r", encoding="utf-8") as fh:
        tree = yaml.safe_load(fh) or {}
    return parse_config(tree)


def default_config() -> TrapConfig:
    return TrapConfig()


def config_hash(cfg: TrapConfig) -> str:
    """Stable content hash of every input affecting simulation results."""
    payload = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
