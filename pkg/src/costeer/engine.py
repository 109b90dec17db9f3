"""World orchestration: the deterministic control-tick pipeline.

Each 50 ms tick runs, in fixed order: sensing/threat assessment,
arbitration, the NMPC solve, the synthetic driver, and fifty 1 ms
execution+plant substeps, then appends one log row. Actors follow their
scripted kinematics. A run is reproducible byte-for-byte from
(scenario spec, seed).
"""

from __future__ import annotations

import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .arbitration import (AuthorityFilter, EVASIVE_AUTHORITY_SAFE,
                          EVASIVE_EY_UPPER_SAFE, RiskInputs,
                          corrective_authority, evasive_authority,
                          threat_assessment)
from .driver import Driver, IntentMode
from .events import (DTC_NEAR_MISS, RECENTER_BAND, RECENTER_HOLD, RunLog,
                     detect_events)
from .fuzzy import FuzzySystem
from .nmpc import (AuthorityCommand, ControlOutput, NmpcConfig, NmpcSolver,
                   build_reference, extrapolate_obstacle,
                   predicted_clearances)
from .scenario import FOOTPRINTS, ScenarioSpec
from .steering import PidState, SteeringParams, variable_damping
from .vehicle import Path, RoadFrame, VehicleParams, VehicleState

PLANT_DT = 0.001              # plant/execution substep (s)
CONTROL_DT = 0.05             # control tick = NMPC stage duration (s)
ACC_ACCEL_LIMIT = 3.0         # m/s^2
ACC_TIME_GAP = 1.5            # s
ACC_STANDOFF = 5.0            # m
BASELINE_CORRECTIVE_LAMBDA = 3.0
RELEASE_THRESHOLD = 1.0       # N m of fuzzy authority below which ALC releases

CSV_COLUMNS = ("time", "X", "Y", "Psi", "v_x", "v_y", "r", "theta", "omega",
               "e_y", "e_psi", "T_mpc", "T_driver", "T_sat", "lambda",
               "dtc", "ttc", "solver_status", "slack_max", "mode")


@dataclass
class Actor:
    kind: str
    x: float
    y: float
    speed: float
    direction: int
    role: str
    length: float = 0.0
    width: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        self.length, self.width = FOOTPRINTS[self.kind]
        self.psi = 0.0 if self.direction == 1 else math.pi

    @property
    def v_x(self) -> float:
        return self.speed * math.cos(self.psi)


@dataclass
class WorldState:
    """Per-tick world snapshot handed to arbitration and logging."""
    time: float
    ego: VehicleState
    ego_road: RoadFrame
    e_y_dot: float
    actors: list[Actor]
    ego_length: float = FOOTPRINTS["ego"][0]
    ego_width: float = FOOTPRINTS["ego"][1]
    authority: AuthorityCommand | None = None
    control: ControlOutput | None = None
    t_driver: float = 0.0
    mode_label: str = "assist"

    def threat_actor(self) -> Actor | None:
        threats = [a for a in self.actors if a.role == "threat"]
        pool = threats or [a for a in self.actors if a.direction == -1]
        best, best_gap = None, math.inf
        for a in pool:
            gap = a.x - self.ego.x
            if gap > 0 and gap < best_gap:
                best, best_gap = a, gap
        return best


@dataclass
class RunResult:
    spec: ScenarioSpec
    rows: list[tuple]
    log: RunLog
    events: list
    diag: dict
    road_departure: bool

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.rows:
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def events_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.events], indent=2)

    def manifest(self, code_version: str) -> dict:
        canon = json.dumps(self.spec.canonical(), sort_keys=True)
        return {
            "scenario_hash": hashlib.sha256(canon.encode()).hexdigest(),
            "scenario": self.spec.canonical(),
            "seed": self.spec.seed,
            "code_version": code_version,
        }


def _fmt(x: float) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return format(x, ".10g")


class Simulation:
    def __init__(self, spec: ScenarioSpec,
                 vehicle: VehicleParams | None = None,
                 steering: SteeringParams | None = None):
        self.spec = spec
        self.vehicle = vehicle or VehicleParams()
        self.steering = steering or SteeringParams()
        self._p = np.array([self.vehicle.m, self.vehicle.i_z, self.vehicle.l_f,
                            self.vehicle.l_r, self.vehicle.c_alpha_f,
                            self.vehicle.c_alpha_r, self.steering.j,
                            self.steering.b, self.steering.k_r,
                            self.steering.eta_t])
        self.path = Path.straight(spec.road.length)
        cfg = (NmpcConfig.corrective() if spec.kind == "corrective"
               else NmpcConfig.evasive())
        self.nmpc = NmpcSolver(cfg, self.vehicle, self.steering)
        self.fuzzy = (FuzzySystem.default_corrective()
                      if spec.kind == "corrective" else None)

        # mutable simulation state
        self.x = VehicleState(x=spec.ego.x, y=spec.ego.y,
                              v_x=spec.ego.speed).as_array()
        self.actors = [Actor(a.kind, a.x, a.y, a.speed, a.direction, a.role)
                       for a in spec.actors]
        params = spec.driver_params()
        # fold the scenario seed into the driver's own seed so trials differ
        self.driver = Driver(params)
        self.driver.rng = np.random.default_rng(
            np.random.SeedSequence([params.seed, spec.seed]))
        self.pid = PidState(clamp=self.steering.t_motor_max)
        self.t_act = 0.0
        self.a_x = 0.0
        self.prev_control: ControlOutput | None = None
        init_lam = (0.0 if (spec.kind == "evasive" and spec.mode == "baseline")
                    else BASELINE_CORRECTIVE_LAMBDA)
        self.lam_filter = AuthorityFilter(dt=CONTROL_DT, initial=init_lam)
        self.n_sub = int(round(CONTROL_DT / PLANT_DT))
        self._invading = False

        # per-run recordings and encounter bookkeeping
        self.tick_index = 0
        self.n_ticks = int(round(spec.duration / CONTROL_DT))
        self.rows: list[tuple] = []
        self._rec = {name: [] for name in
                     ("time", "e_y", "dtc", "ttc_conflict", "crash",
                      "encounter_active", "threat_passed")}
        self.diag_rows: list[dict] = []
        self.road_departure = False
        self._encounter_started = False
        self._encounter_over = False
        self._recenter_ticks = 0
        self._finished = False

    # -- scripted world -------------------------------------------------

    def _step_actors(self):
        sc = self.spec.scripts
        for a in self.actors:
            a.x += a.v_x * CONTROL_DT
            if a.kind == "motorcycle" and sc.invasion_gap is not None:
                gap = a.x - self.x[kernels.X]
                if gap <= sc.invasion_gap and gap > 0:
                    self._invading = True
                if self._invading and gap > 0:
                    target = self.spec.road.centerline - sc.invasion_depth
                    dy = target - a.y
                    step = sc.invasion_rate * CONTROL_DT
                    a.y += float(np.clip(dy, -step, step))

    def _threat_visible(self, world: WorldState, threat: Actor | None) -> bool:
        """Whether the human driver perceives the threat this tick."""
        if threat is None:
            return False
        sc = self.spec.scripts
        gap = threat.x - world.ego.x
        if gap <= 0 or gap > sc.visibility_range:
            return False
        if self.spec.kind == "corrective":
            # occluded behind the truck until the ego peeks out or closes in
            if world.ego_road.e_y <= sc.occlusion_offset \
                    and gap >= sc.occlusion_gap:
                return False
        else:
            # an oncoming rider in its own lane is unremarkable; the driver
            # reacts once the drift toward the ego lane is evident
            if threat.y > self.spec.road.left_lane_center - sc.perception_drift:
                return False
        return True

    def _acc_command(self, world: WorldState) -> float:
        ego = world.ego
        lead, lead_gap = None, math.inf
        for a in world.actors:
            if a.direction != 1:
                continue
            if abs(a.y - ego.y) > 0.5 * (a.width + world.ego_width) + 0.5:
                continue
            gap = a.x - ego.x - 0.5 * (a.length + world.ego_length)
            if 0 < gap < lead_gap:
                lead, lead_gap = a, gap
        a_cruise = 0.5 * (self.spec.ego.set_speed - ego.v_x)
        if lead is not None:
            desired = ACC_STANDOFF + ACC_TIME_GAP * ego.v_x
            a_follow = 0.3 * (lead_gap - desired) + 1.0 * (lead.speed - ego.v_x)
            a_cruise = min(a_cruise, a_follow)
        return float(np.clip(a_cruise, -ACC_ACCEL_LIMIT, ACC_ACCEL_LIMIT))

    # -- arbitration ----------------------------------------------------

    def _arbitrate(self, world: WorldState, risk: RiskInputs,
                   visible: bool) -> tuple[AuthorityCommand, str, dict]:
        cfg = self.nmpc.config
        diag: dict = {}
        if self.spec.kind == "corrective":
            if self.spec.mode == "baseline":
                lam = BASELINE_CORRECTIVE_LAMBDA
                self.lam_filter.value = lam
                mode = "assist"
            else:
                # the automation's sensors are not occluded by the truck;
                # earlier threat detection than the human driver is the
                # point of the corrective assistance
                threat = world.threat_actor()
                sensed = (threat is not None and
                          0.0 < threat.x - world.ego.x
                          <= self.spec.scripts.visibility_range)
                fuzzy_in = RiskInputs(
                    e_y=risk.e_y, e_y_dot=risk.e_y_dot,
                    dtc=risk.dtc if sensed else math.inf, ttc=risk.ttc)
                raw = corrective_authority(fuzzy_in, self.fuzzy)
                lam = self.lam_filter.step(raw)
                diag["fuzzy_raw"] = raw
                if lam < RELEASE_THRESHOLD:
                    lam = 0.0
                    mode = "manual"
                else:
                    mode = "assist"
            return AuthorityCommand(lam=lam), mode, diag

        # evasive: rules over predicted clearances to the scripted threat
        threat = world.threat_actor()
        if self.spec.mode == "baseline":
            cmd = AuthorityCommand(lam=0.0)
            return cmd, "manual", diag
        if threat is None:
            return (AuthorityCommand(lam=EVASIVE_AUTHORITY_SAFE),
                    "assist", diag)
        ego_pred = self._ego_prediction(world)
        obs = extrapolate_obstacle(
            (threat.x, threat.y),
            (threat.speed * math.cos(threat.psi),
             threat.speed * math.sin(threat.psi)),
            cfg.n_stages, cfg.t_s)
        d_pred = np.hypot(*(ego_pred - obs).T)
        cmd = evasive_authority(d_pred)
        diag["d_pred_min"] = float(np.min(d_pred))
        return cmd, "assist", diag

    def _ego_prediction(self, world: WorldState) -> np.ndarray:
        if self.prev_control is not None:
            return self.prev_control.predicted_states[:, :2]
        ego = world.ego
        return extrapolate_obstacle(
            (ego.x, ego.y),
            (ego.v_x * math.cos(ego.psi), ego.v_x * math.sin(ego.psi)),
            self.nmpc.config.n_stages, self.nmpc.config.t_s)

    # -- main loop ------------------------------------------------------

    @property
    def finished(self) -> bool:
        return self._finished or self.tick_index >= self.n_ticks

    def tick(self, pilot_torque: float | None = None) -> dict:
        """Advance one 50 ms control tick.

        `pilot_torque` replaces the synthetic driver's torque when a human
        client is attached; None falls back to the driver model. Returns a
        snapshot dict for telemetry.
        """
        spec = self.spec
        now = self.tick_index * CONTROL_DT
        ego = VehicleState.from_array(self.x)
        _, e_y, heading, rho, _ = self.path.project(ego.x, ego.y)
        road = RoadFrame(
            e_y=e_y,
            e_psi=float(self._wrap(ego.psi - heading)), rho=rho)
        self.x[kernels.EY] = road.e_y
        self.x[kernels.EPSI] = road.e_psi
        e_y_dot = (ego.v_x * math.sin(road.e_psi)
                   + ego.v_y * math.cos(road.e_psi))

        world = WorldState(time=now, ego=ego, ego_road=road,
                           e_y_dot=e_y_dot, actors=self.actors)
        threat = world.threat_actor()
        risk = threat_assessment(world)
        visible = self._threat_visible(world, threat)

        authority, mode_label, diag = self._arbitrate(world, risk, visible)

        self.a_x = self._acc_command(world)
        ref = build_reference(self.path, ego, self.nmpc.config)
        control = self.nmpc.solve(ego, road, ref, authority,
                                  warm=self.prev_control, a_x=self.a_x)
        if control.solver_status == "degraded" \
                and self.prev_control is not None:
            t_ref = self.prev_control.t_mpc
        else:
            t_ref = control.t_mpc
        self.prev_control = control

        threat_cleared = threat is None
        self.driver.step_intent(spec.kind, now, spec.scripts.overtake_time,
                                visible, threat_cleared, road.e_y,
                                felt_torque=self.t_act)
        if pilot_torque is None:
            t_driver = self.driver.torque(road.e_y, e_y_dot, self.t_act)
        else:
            t_driver = float(pilot_torque)

        b_lam = variable_damping(authority.lam, self.steering.b)
        x_new, pid_state, t_act = kernels.plant_substeps(
            self.x, self.n_sub, PLANT_DT, self.a_x, t_ref, t_driver,
            b_lam, rho, self._p, self.pid.gains_array(),
            np.array([self.pid.integral, self.pid.prev_error]),
            self.t_act, self.steering.tau_lag,
            self.steering.t_motor_max)
        self.x = np.asarray(x_new)
        self.pid.integral = float(pid_state[0])
        self.pid.prev_error = float(pid_state[1])
        self.t_act = float(t_act)

        # derived quantities for the log row
        delta = ego.theta / self.steering.k_r
        if ego.v_x >= kernels.V_X_MIN:
            f_yf, _ = kernels.tire_forces_k(ego.v_x, ego.v_y, ego.r,
                                            delta, self._p)
            t_sat = (self.steering.eta_t / self.steering.k_r) * f_yf
        else:
            t_sat = 0.0

        crash = False
        for a in self.actors:
            if kernels.rects_overlap(ego.x, ego.y, ego.psi,
                                     world.ego_length, world.ego_width,
                                     a.x, a.y, a.psi, a.length, a.width):
                crash = True
                break

        # TTC counts toward near-miss detection only on a collision
        # course, where "course" includes passing within the near-miss
        # margin; a clearly-offset pass has no TTC
        conflict_ttc = math.nan
        if threat is not None:
            lat_gap = abs(threat.y - ego.y)
            if lat_gap < 0.5 * (threat.width + world.ego_width) \
                    + DTC_NEAR_MISS and risk.ttc is not None:
                conflict_ttc = risk.ttc

        # encounter bookkeeping
        if spec.kind == "corrective":
            in_attempt = self.driver.intent.mode in (IntentMode.OVERTAKE,
                                                     IntentMode.ABORT)
        else:
            in_attempt = (threat is not None
                          and threat.x - ego.x < spec.scripts.visibility_range)
        if in_attempt:
            self._encounter_started = True
        active = self._encounter_started and not self._encounter_over
        if active:
            if threat is None and abs(road.e_y) < RECENTER_BAND:
                self._recenter_ticks += 1
                if self._recenter_ticks >= int(RECENTER_HOLD / CONTROL_DT):
                    self._encounter_over = True
            else:
                self._recenter_ticks = 0

        self.rows.append(tuple(_fmt(v) for v in (
            now, ego.x, ego.y, ego.psi, ego.v_x, ego.v_y, ego.r,
            ego.theta, ego.omega, road.e_y, road.e_psi, control.t_mpc,
            t_driver, t_sat, authority.lam,
            risk.dtc, risk.ttc if risk.ttc is not None else "",
            control.solver_status, control.slack_max, mode_label)))
        rec = self._rec
        rec["time"].append(now)
        rec["e_y"].append(road.e_y)
        rec["dtc"].append(risk.dtc)
        rec["ttc_conflict"].append(conflict_ttc)
        rec["crash"].append(crash)
        rec["encounter_active"].append(active)
        rec["threat_passed"].append(threat is None)
        diag.update({
            "lambda": authority.lam,
            "t_mpc": control.t_mpc,
            "solver_status": control.solver_status,
            "sqp_iterations": control.sqp_iterations,
            "kkt_residual": control.kkt_residual,
            "slack_max": control.slack_max,
            "mode": mode_label,
            "intent": self.driver.intent.mode.value,
        })
        self.diag_rows.append(diag)

        # road departure: ego rectangle fully outside the paved edges
        half_w = 0.5 * world.ego_width
        if ego.y - half_w > spec.road.left_edge or \
                ego.y + half_w < spec.road.right_edge:
            self.road_departure = True

        self._step_actors()
        self.tick_index += 1
        if self.road_departure or ego.x > spec.road.length - 50.0:
            self._finished = True

        return {
            "time": now, "ego": ego, "e_y": road.e_y, "e_psi": road.e_psi,
            "t_mpc": control.t_mpc, "t_driver": t_driver,
            "authority": authority.lam, "dtc": risk.dtc, "ttc": risk.ttc,
            "mode": mode_label, "crash": crash,
        }

    def result(self) -> RunResult:
        rec = self._rec
        log = RunLog(
            kind=self.spec.kind, dt=CONTROL_DT,
            time=np.array(rec["time"]),
            e_y=np.array(rec["e_y"]),
            dtc=np.array(rec["dtc"]),
            ttc_conflict=np.array(rec["ttc_conflict"]),
            crash=np.array(rec["crash"], dtype=bool),
            encounter_active=np.array(rec["encounter_active"], dtype=bool),
            threat_passed=np.array(rec["threat_passed"], dtype=bool),
            road_departure=self.road_departure)
        events = detect_events(log)
        return RunResult(spec=self.spec, rows=self.rows, log=log,
                         events=events, diag={"ticks": self.diag_rows},
                         road_departure=self.road_departure)

    def run(self) -> RunResult:
        while not self.finished:
            self.tick()
        return self.result()

    @staticmethod
    def _wrap(a: float) -> float:
        w = (a + math.pi) % (2.0 * math.pi) - math.pi
        return math.pi if w == -math.pi else w


def run_scenario(spec: ScenarioSpec) -> RunResult:
    return Simulation(spec).run()
