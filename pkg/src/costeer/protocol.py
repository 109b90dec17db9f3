"""Wire messages for the realtime service (schema version 1).

Every frame on the `/sim` websocket is a JSON object with a `type` field:
`telemetry` (server to client, one per control tick), `pilot_input`
(client to server), `control` (client to server: start / pause / reset),
and `error` (server to client on rejected input).
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, ValidationError  # noqa: F401

SCHEMA_VERSION = 1
PILOT_TORQUE_LIMIT = 10.0   # N m, server-side clamp
INPUT_STALE_S = 0.2         # pilot input older than this is discarded


class EgoPose(BaseModel):
    x: float
    y: float
    psi: float
    v_x: float
    v_y: float
    r: float
    theta: float
    omega: float


class ActorPose(BaseModel):
    kind: str
    x: float
    y: float
    psi: float
    speed: float


class TelemetryMsg(BaseModel):
    type: Literal["telemetry"] = "telemetry"
    schema_version: int = SCHEMA_VERSION
    time: float
    ego: EgoPose
    e_y: float
    e_psi: float
    t_mpc: float
    t_driver: float
    authority: float
    dtc: Optional[float] = None
    ttc: Optional[float] = None
    actors: list[ActorPose] = Field(default_factory=list)
    events: list[str] = Field(default_factory=list)
    mode: str = "assist"
    paused: bool = False


class PilotInputMsg(BaseModel):
    type: Literal["pilot_input"] = "pilot_input"
    torque: float
    start_overtake: bool = False
    client_time: float


class ControlMsg(BaseModel):
    type: Literal["control"] = "control"
    command: Literal["start", "pause", "reset"]
    preset: Optional[str] = None
    mode: Optional[str] = None
    seed: Optional[int] = None


class ErrorMsg(BaseModel):
    type: Literal["error"] = "error"
    message: str


def parse_client_message(data: dict) -> PilotInputMsg | ControlMsg:
    kind = data.get("type")
    if kind == "pilot_input":
        msg = PilotInputMsg.model_validate(data)
        msg.torque = max(-PILOT_TORQUE_LIMIT,
                         min(PILOT_TORQUE_LIMIT, msg.torque))
        return msg
    if kind == "control":
        return ControlMsg.model_validate(data)
    raise ValueError(f"unknown message type {kind!r}")
