"""Synthetic drivers standing in for human participants.

A preview-based PD steering torque law plus a scripted intent machine
(keep lane, initiate overtake, abort, or evade) with seeded reaction
delays. Eight parameter sets mimic inter-driver variability for the
Monte-Carlo baseline-vs-shared-control comparisons; they are documented
presets, not fits to any particular person.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

LANE_WIDTH = 3.5


@dataclass
class DriverParams:
    preview_time: float = 0.9        # s
    k_p_angle: float = 3.0           # N m per m of previewed error
    k_d_angle: float = 1.2           # N m per m/s of lateral rate
    max_torque: float = 6.0          # N m
    delay_low: float = 0.5           # s, reaction delay uniform bounds
    delay_high: float = 1.5
    compliance: float = 0.6          # 0 fights the controller, 1 yields
    torque_cue: float = 3.5          # opposing torque that reads as a warning (N m)
    urgency_gain: float = 1.8        # k_p multiplier during abort/evade
    urgency_damping: float = 0.5     # k_d multiplier during abort/evade
    panic_lag: float = 0.0           # stale-state lag during abort/evade (s)
    seed: int = 0

    def __post_init__(self):
        if not (2.0 <= self.max_torque <= 10.0):
            raise ValueError("driver torque clamp must be within [2, 10] N m")
        if self.delay_low < 0 or self.delay_high < self.delay_low:
            raise ValueError("bad reaction delay bounds")


class IntentMode(enum.Enum):
    KEEP_LANE = "keep_lane"
    OVERTAKE = "overtake"
    ABORT = "abort"
    EVADE = "evade"


@dataclass
class DriverIntent:
    mode: IntentMode = IntentMode.KEEP_LANE
    target_offset: float = 0.0   # lateral target measured from lane center (m)
    activation_time: float = 0.0


class Driver:
    """Stateful synthetic driver: torque law + intent machine + seeded RNG."""

    def __init__(self, params: DriverParams):
        self.params = params
        self.rng = np.random.default_rng(params.seed)
        self.intent = DriverIntent()
        self._pending_delay: float | None = None
        self._threat_seen_at: float | None = None
        self._overtake_done = False
        self._state_history: list[tuple[float, float]] = []

    def sample_delay(self) -> float:
        return float(self.rng.uniform(self.params.delay_low,
                                      self.params.delay_high))

    def torque(self, e_y: float, e_y_dot: float, felt_torque: float,
               dt: float = 0.05) -> float:
        """Preview-PD steering torque toward the intent target offset."""
        p = self.params
        self._state_history.append((e_y, e_y_dot))
        k_p, k_d, preview = p.k_p_angle, p.k_d_angle, p.preview_time
        if self.intent.mode in (IntentMode.ABORT, IntentMode.EVADE):
            # emergency reactions are harder, shorter-sighted, less damped,
            # and act on slightly stale state (attention narrowing)
            k_p *= p.urgency_gain
            k_d *= p.urgency_damping
            preview *= p.urgency_damping
            lag_ticks = int(round(p.panic_lag / dt))
            if lag_ticks > 0 and len(self._state_history) > lag_ticks:
                e_y, e_y_dot = self._state_history[-1 - lag_ticks]
        err = self.intent.target_offset - (e_y + preview * e_y_dot)
        t_pd = k_p * err - k_d * e_y_dot
        t_pd = float(np.clip(t_pd, -p.max_torque, p.max_torque))
        # yield the exerted torque to an opposing controller torque
        if t_pd * felt_torque < 0.0:
            give = p.compliance * abs(felt_torque)
            t_pd = math.copysign(max(0.0, abs(t_pd) - give), t_pd)
        return t_pd

    def step_intent(self, scenario_kind: str, now: float,
                    overtake_time: float | None,
                    threat_visible: bool, threat_cleared: bool,
                    e_y: float, felt_torque: float = 0.0) -> DriverIntent:
        """Advance the scripted intent machine one control tick."""
        mode = self.intent.mode
        if scenario_kind == "corrective":
            if mode is IntentMode.KEEP_LANE and overtake_time is not None \
                    and now >= overtake_time and not self._overtake_done:
                self._overtake_done = True
                self.intent = DriverIntent(IntentMode.OVERTAKE, LANE_WIDTH, now)
            elif mode is IntentMode.OVERTAKE:
                # a strong counter-torque on the wheel reads as a warning,
                # same as seeing the threat
                haptic_cue = felt_torque < -self.params.torque_cue
                if (threat_visible or haptic_cue) \
                        and self._threat_seen_at is None:
                    self._threat_seen_at = now
                    self._pending_delay = self.sample_delay()
                if self._threat_seen_at is not None and \
                        now >= self._threat_seen_at + self._pending_delay:
                    self.intent = DriverIntent(IntentMode.ABORT, 0.0, now)
            elif mode is IntentMode.ABORT:
                if threat_cleared and abs(e_y) < 0.3:
                    self.intent = DriverIntent(IntentMode.KEEP_LANE, 0.0, now)
        elif scenario_kind == "evasive":
            if mode is IntentMode.KEEP_LANE and threat_visible \
                    and not threat_cleared:
                if self._threat_seen_at is None:
                    self._threat_seen_at = now
                    self._pending_delay = self.sample_delay()
                if now >= self._threat_seen_at + self._pending_delay:
                    self.intent = DriverIntent(IntentMode.EVADE, -1.0, now)
            elif mode is IntentMode.EVADE:
                if self.intent.target_offset != 0.0 and threat_cleared:
                    # steer back, still rattled (urgency gains persist)
                    self.intent = DriverIntent(IntentMode.EVADE, 0.0, now)
                elif self.intent.target_offset == 0.0 and abs(e_y) < 0.3:
                    self.intent = DriverIntent(IntentMode.KEEP_LANE, 0.0, now)
        return self.intent


# Eight seeded parameter sets spanning attentive-to-sluggish behavior.
DRIVER_POPULATION: tuple[DriverParams, ...] = (
    DriverParams(preview_time=1.2, k_p_angle=3.5, k_d_angle=1.6,
                 max_torque=6.0, delay_low=0.5, delay_high=0.8,
                 compliance=0.8, seed=101),
    DriverParams(preview_time=1.1, k_p_angle=3.0, k_d_angle=1.3,
                 max_torque=5.5, delay_low=0.6, delay_high=1.0,
                 compliance=0.7, seed=102),
    DriverParams(preview_time=1.0, k_p_angle=3.2, k_d_angle=1.0,
                 max_torque=6.5, delay_low=0.7, delay_high=1.1,
                 compliance=0.6, seed=103),
    DriverParams(preview_time=0.9, k_p_angle=2.6, k_d_angle=0.9,
                 max_torque=5.0, delay_low=0.8, delay_high=1.2,
                 compliance=0.6, seed=104),
    DriverParams(preview_time=0.8, k_p_angle=2.4, k_d_angle=0.7,
                 max_torque=5.0, delay_low=0.9, delay_high=1.3,
                 compliance=0.5, urgency_gain=2.4, urgency_damping=0.35,
                 panic_lag=0.2, seed=105),
    DriverParams(preview_time=0.8, k_p_angle=2.0, k_d_angle=0.6,
                 max_torque=4.5, delay_low=1.0, delay_high=1.4,
                 compliance=0.4, urgency_gain=2.6, urgency_damping=0.3,
                 panic_lag=0.25, seed=106),
    DriverParams(preview_time=0.7, k_p_angle=1.8, k_d_angle=0.5,
                 max_torque=4.0, delay_low=1.1, delay_high=1.5,
                 compliance=0.4, urgency_gain=2.8, urgency_damping=0.28,
                 panic_lag=0.3, seed=107),
    DriverParams(preview_time=0.6, k_p_angle=1.6, k_d_angle=0.4,
                 max_torque=4.0, delay_low=1.2, delay_high=1.5,
                 compliance=0.3, urgency_gain=3.0, urgency_damping=0.25,
                 panic_lag=0.35, seed=108),
)
