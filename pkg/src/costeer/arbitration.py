"""Tactical-level arbitration: decides each control tick how much steering
authority the lane-centering controller receives.

Corrective maneuver: Mamdani fuzzy system over lateral position, drift
intention, and threat distance; output smoothed by a first-order low-pass
to avoid torque chatter. Evasive maneuver: threshold rules on the
predicted per-stage clearance to the invading vehicle, applied instantly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fuzzy import FuzzySystem
from .nmpc import AuthorityCommand

EVASIVE_CLEARANCE_THRESHOLD = 50.0   # m, on predicted per-stage distance
EVASIVE_AUTHORITY_SAFE = 3.0         # N m
EVASIVE_AUTHORITY_EMERGENCY = 12.0   # N m
EVASIVE_EY_UPPER_SAFE = 1.5          # m
EVASIVE_EY_UPPER_TIGHT = -1.25       # m
EVASIVE_EY_LOWER = -1.5              # m


@dataclass
class RiskInputs:
    e_y: float          # lateral offset from right-lane center, left positive (m)
    e_y_dot: float      # its derivative (m/s)
    dtc: float          # distance to the designated threat (m, inf if none)
    ttc: float | None = None   # time to collision (s), None when not closing

    def __post_init__(self):
        if self.dtc < 0:
            raise ValueError("dtc must be non-negative")
        if self.ttc is not None and self.ttc < 0:
            raise ValueError("ttc must be non-negative")


def corrective_authority(inputs: RiskInputs, sys: FuzzySystem) -> float:
    """Fuzzy-arbitrated torque authority for the corrective use case."""
    if math.isnan(inputs.e_y) or math.isnan(inputs.e_y_dot) \
            or math.isnan(inputs.dtc):
        raise ValueError("risk inputs must not be NaN")
    return sys.infer(inputs.e_y, inputs.e_y_dot, inputs.dtc)


def evasive_authority(d_pred: np.ndarray) -> AuthorityCommand:
    """Threshold rules on predicted clearances for the evasive use case."""
    d_pred = np.asarray(d_pred, dtype=float)
    if d_pred.size == 0:
        raise ValueError("need at least one predicted clearance")
    upper = np.where(d_pred >= EVASIVE_CLEARANCE_THRESHOLD,
                     EVASIVE_EY_UPPER_SAFE, EVASIVE_EY_UPPER_TIGHT)
    lam = (EVASIVE_AUTHORITY_SAFE
           if float(np.min(d_pred)) >= EVASIVE_CLEARANCE_THRESHOLD
           else EVASIVE_AUTHORITY_EMERGENCY)
    return AuthorityCommand(lam=lam, e_y_upper=upper)


class AuthorityFilter:
    """First-order low-pass on the corrective authority (comfort smoothing)."""

    def __init__(self, time_constant: float = 0.2, dt: float = 0.05,
                 initial: float = 0.0):
        self.alpha = 1.0 - math.exp(-dt / time_constant)
        self.value = initial

    def step(self, target: float) -> float:
        self.value += self.alpha * (target - self.value)
        return self.value


def threat_assessment(world) -> RiskInputs:
    """Distill the world snapshot into the arbitration inputs.

    DTC is the oriented-rectangle separation to the designated threat
    actor; TTC divides it by the longitudinal closing speed and is absent
    for a receding or absent threat.
    """
    from . import kernels  # local import keeps module load cheap

    ego = world.ego
    road = world.ego_road
    threat = world.threat_actor()
    if threat is None:
        return RiskInputs(e_y=road.e_y, e_y_dot=world.e_y_dot,
                          dtc=float("inf"), ttc=None)
    dtc = float(kernels.rects_distance(
        ego.x, ego.y, ego.psi, world.ego_length, world.ego_width,
        threat.x, threat.y, threat.psi, threat.length, threat.width))
    # oncoming traffic: closing speed is the sum of longitudinal speeds
    # projected on the ego's travel axis
    closing = ego.v_x + (-threat.speed * math.cos(threat.psi - ego.psi))
    ahead = (threat.x - ego.x) * math.cos(ego.psi) + \
            (threat.y - ego.y) * math.sin(ego.psi) > 0.0
    ttc = dtc / closing if (closing > 0.0 and ahead) else None
    return RiskInputs(e_y=road.e_y, e_y_dot=world.e_y_dot, dtc=dtc, ttc=ttc)
