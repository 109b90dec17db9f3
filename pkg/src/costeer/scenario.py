"""Scenario specifications: road geometry, traffic actors, the two scripted
use cases, and the config-document loader with schema validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import yaml

from .driver import DRIVER_POPULATION, DriverParams

KMH = 1.0 / 3.6

# oriented-rectangle footprints (length, width) in meters
FOOTPRINTS = {
    "ego": (4.5, 1.8),
    "car": (4.5, 1.8),
    "truck": (12.0, 2.5),
    "motorcycle": (2.2, 0.8),
}


@dataclass
class RoadSpec:
    lane_width: float = 3.5
    length: float = 3000.0

    @property
    def left_lane_center(self) -> float:
        return self.lane_width

    @property
    def centerline(self) -> float:
        return 0.5 * self.lane_width

    @property
    def right_edge(self) -> float:
        return -0.5 * self.lane_width

    @property
    def left_edge(self) -> float:
        return 1.5 * self.lane_width


@dataclass
class ActorSpec:
    kind: str                 # truck | car | motorcycle
    x: float
    y: float
    speed: float
    direction: int = 1        # +1 with ego, -1 oncoming
    role: str = "traffic"     # traffic | threat

    def __post_init__(self):
        if self.kind not in ("truck", "car", "motorcycle"):
            raise ValueError(f"unknown actor kind {self.kind!r}")
        if self.direction not in (1, -1):
            raise ValueError("actor direction must be +1 or -1")


@dataclass
class EgoSpec:
    x: float = 0.0
    y: float = 0.0
    speed: float = 25.0
    set_speed: float = 25.0


@dataclass
class ScriptSpec:
    overtake_time: float | None = None   # corrective: driver initiates (s)
    invasion_gap: float | None = None    # evasive: moto starts drifting (m)
    invasion_depth: float = 0.8          # m past the road centerline
    invasion_rate: float = 1.7           # lateral drift speed (m/s)
    visibility_range: float = 150.0      # line-of-sight perception (m)
    occlusion_gap: float = 120.0         # corrective: occluded beyond this gap
    occlusion_offset: float = 1.0        # ...unless ego offset exceeds this (m)
    perception_drift: float = 0.8        # evasive: drift before the driver reacts (m)


@dataclass
class ScenarioSpec:
    kind: str                            # corrective | evasive
    mode: str = "shared_control"         # shared_control | baseline
    seed: int = 0
    duration: float = 40.0
    driver_set: int = 0
    road: RoadSpec = field(default_factory=RoadSpec)
    ego: EgoSpec = field(default_factory=EgoSpec)
    actors: list[ActorSpec] = field(default_factory=list)
    scripts: ScriptSpec = field(default_factory=ScriptSpec)
    drivers: tuple[DriverParams, ...] = DRIVER_POPULATION

    def __post_init__(self):
        if self.kind not in ("corrective", "evasive"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.mode not in ("shared_control", "baseline"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (0 <= self.driver_set < len(self.drivers)):
            raise ValueError("driver_set out of range")

    def driver_params(self) -> DriverParams:
        return self.drivers[self.driver_set]

    def canonical(self) -> dict:
        """Stable dict form used for manifests and hashing."""
        return {
            "kind": self.kind, "mode": self.mode, "seed": self.seed,
            "duration": self.duration, "driver_set": self.driver_set,
            "road": {"lane_width": self.road.lane_width,
                     "length": self.road.length},
            "ego": vars(self.ego).copy(),
            "actors": [vars(a).copy() for a in self.actors],
            "scripts": {k: v for k, v in vars(self.scripts).items()
                        if v is not None},
        }


def corrective_preset(mode="shared_control", seed=0, driver_set=0,
                      duration=40.0) -> ScenarioSpec:
    """Two-way overtaking: slow truck ahead, oncoming car in the left lane."""
    return ScenarioSpec(
        kind="corrective", mode=mode, seed=seed, duration=duration,
        driver_set=driver_set,
        ego=EgoSpec(x=0.0, y=0.0, speed=90 * KMH, set_speed=90 * KMH),
        actors=[
            ActorSpec(kind="truck", x=60.0, y=0.0, speed=70 * KMH,
                      direction=1),
            ActorSpec(kind="car", x=835.0, y=3.5, speed=90 * KMH,
                      direction=-1, role="threat"),
        ],
        scripts=ScriptSpec(overtake_time=15.0, occlusion_gap=70.0,
                           occlusion_offset=1.2),
    )


def evasive_preset(mode="shared_control", seed=0, driver_set=0,
                   duration=20.0) -> ScenarioSpec:
    """Lane invasion: oncoming motorcycle drifts into the ego lane."""
    return ScenarioSpec(
        kind="evasive", mode=mode, seed=seed, duration=duration,
        driver_set=driver_set,
        ego=EgoSpec(x=0.0, y=0.0, speed=105 * KMH, set_speed=105 * KMH),
        actors=[
            ActorSpec(kind="motorcycle", x=530.0, y=3.5, speed=80 * KMH,
                      direction=-1, role="threat"),
        ],
        scripts=ScriptSpec(invasion_gap=120.0, invasion_depth=0.8,
                           perception_drift=0.3),
    )


PRESETS = {
    "corrective": corrective_preset,
    "evasive": evasive_preset,
}

# deterministic driver for the verification runs: commits hard to the
# maneuver and reacts with a fixed latency, so the intervention story is
# reproducible tick for tick
VERIFY_DRIVER = DriverParams(preview_time=0.9, k_p_angle=3.6, k_d_angle=1.0,
                             max_torque=6.5, delay_low=1.0, delay_high=1.0,
                             compliance=0.4, seed=999)


def verify_scenario(kind: str, mode: str = "shared_control") -> ScenarioSpec:
    spec = PRESETS[kind](mode=mode, seed=0)
    spec.drivers = (VERIFY_DRIVER,)
    spec.driver_set = 0
    return spec


class ScenarioError(ValueError):
    """Config document rejected; message carries the offending field path."""


def _schema() -> dict:
    text = resources.files("costeer").joinpath(
        "data/scenario_schema.json").read_text()
    return json.loads(text)


def load_scenario(text: str) -> ScenarioSpec:
    """Parse and validate a scenario config document (YAML or JSON)."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"unparsable config document: {exc}") from exc
    if doc is None:
        raise ScenarioError("empty config document")
    if not isinstance(doc, dict):
        raise ScenarioError("config document must be a mapping")

    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.path) or "<document root>"
        raise ScenarioError(f"invalid field at {path}: {err.message}")

    preset_name = doc.get("preset")
    if preset_name is not None and preset_name not in PRESETS:
        raise ScenarioError(
            f"unknown preset {preset_name!r}; available: "
            f"{sorted(PRESETS)}")

    if preset_name:
        spec = PRESETS[preset_name]()
    else:
        if "kind" not in doc:
            raise ScenarioError("invalid field at kind: required when no "
                                "preset is given")
        spec = ScenarioSpec(kind=doc["kind"])

    for key in ("kind", "mode", "seed", "duration", "driver_set"):
        if key in doc:
            setattr(spec, key, doc[key])
    if "road" in doc:
        for k, v in doc["road"].items():
            setattr(spec.road, k, v)
    if "ego" in doc:
        for k, v in doc["ego"].items():
            setattr(spec.ego, k, v)
    if "actors" in doc:
        spec.actors = [ActorSpec(**a) for a in doc["actors"]]
    if "scripts" in doc:
        for k, v in doc["scripts"].items():
            setattr(spec.scripts, k, v)
    if "drivers" in doc:
        spec.drivers = tuple(DriverParams(**d) for d in doc["drivers"])
    spec.__post_init__()
    return spec


def load_scenario_file(path) -> ScenarioSpec:
    with open(path) as fh:
        return load_scenario(fh.read())
