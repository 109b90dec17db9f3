"""Realtime simulation service.

One authoritative simulation task runs pinned to the wall clock at the
20 Hz control rate and broadcasts a telemetry frame per tick over the
`/sim` websocket. Clients send pilot input (keep-latest, discarded when
stale) and control commands; the loop never blocks on clients (bounded
per-client queues, drop-oldest). With no pilot attached the synthetic
driver steers, so a service run with no client reproduces the headless
log for the same seed.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import time

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from pydantic import ValidationError

from .engine import CONTROL_DT, Simulation
from .protocol import (INPUT_STALE_S, ActorPose, ControlMsg, EgoPose,
                       ErrorMsg, PilotInputMsg, TelemetryMsg,
                       parse_client_message)
from .scenario import PRESETS, ScenarioSpec

TELEMETRY_QUEUE_DEPTH = 64


class SimService:
    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.sim = Simulation(spec)
        self.paused = False
        self.clients: set[asyncio.Queue] = set()
        self.pilot: tuple[float, float] | None = None   # (torque, recv time)
        self.pilot_attached = False
        self.events_so_far: list[str] = []
        self._task: asyncio.Task | None = None

    # -- loop -------------------------------------------------------------

    async def loop(self):
        next_deadline = time.monotonic()
        while True:
            if not self.paused and not self.sim.finished:
                frame = self.sim.tick(self._current_pilot_torque())
                self._broadcast(self._telemetry(frame))
            next_deadline += CONTROL_DT
            delay = next_deadline - time.monotonic()
            if delay < -1.0:
                next_deadline = time.monotonic()   # fell far behind; resync
                delay = 0.0
            await asyncio.sleep(max(0.0, delay))

    def _current_pilot_torque(self) -> float | None:
        if self.pilot is None:
            return None
        torque, received = self.pilot
        if time.monotonic() - received > INPUT_STALE_S:
            return None    # stale human torque must not persist
        return torque

    def _telemetry(self, frame: dict) -> TelemetryMsg:
        ego = frame["ego"]
        if frame["crash"] and "crash" not in self.events_so_far:
            self.events_so_far.append("crash")
        return TelemetryMsg(
            time=frame["time"],
            ego=EgoPose(x=ego.x, y=ego.y, psi=ego.psi, v_x=ego.v_x,
                        v_y=ego.v_y, r=ego.r, theta=ego.theta,
                        omega=ego.omega),
            e_y=frame["e_y"], e_psi=frame["e_psi"],
            t_mpc=frame["t_mpc"], t_driver=frame["t_driver"],
            authority=frame["authority"],
            dtc=frame["dtc"] if frame["dtc"] != float("inf") else None,
            ttc=frame["ttc"],
            actors=[ActorPose(kind=a.kind, x=a.x, y=a.y, psi=a.psi,
                              speed=a.speed) for a in self.sim.actors],
            events=list(self.events_so_far),
            mode=frame["mode"],
            paused=self.paused,
        )

    def _broadcast(self, msg: TelemetryMsg):
        payload = msg.model_dump_json()
        for q in self.clients:
            if q.full():
                with contextlib.suppress(asyncio.QueueEmpty):
                    q.get_nowait()   # drop oldest under backpressure
            q.put_nowait(payload)

    # -- client messages ---------------------------------------------------

    def handle(self, msg) -> None:
        if isinstance(msg, PilotInputMsg):
            self.pilot = (msg.torque, time.monotonic())
            self.pilot_attached = True
        elif isinstance(msg, ControlMsg):
            if msg.command == "pause":
                self.paused = True
            elif msg.command == "start":
                if msg.preset or msg.mode or msg.seed is not None:
                    self._reset(msg)
                self.paused = False
            elif msg.command == "reset":
                self._reset(msg)

    def _reset(self, msg: ControlMsg):
        spec = self.spec
        if msg.preset:
            spec = PRESETS[msg.preset](
                mode=msg.mode or spec.mode,
                seed=msg.seed if msg.seed is not None else spec.seed)
        else:
            spec = PRESETS[spec.kind](
                mode=msg.mode or spec.mode,
                seed=msg.seed if msg.seed is not None else spec.seed)
        self.spec = spec
        self.sim = Simulation(spec)
        self.events_so_far = []
        self.pilot = None


def create_app(spec: ScenarioSpec) -> FastAPI:
    app = FastAPI(title="costeer sim service")
    service = SimService(spec)
    app.state.service = service

    @app.on_event("startup")
    async def _start():
        service._task = asyncio.create_task(service.loop())

    @app.on_event("shutdown")
    async def _stop():
        if service._task:
            service._task.cancel()

    @app.get("/scenario")
    def scenario_presets():
        return {
            "presets": sorted(PRESETS),
            "active": {"kind": service.spec.kind, "mode": service.spec.mode,
                       "seed": service.spec.seed},
        }

    @app.websocket("/sim")
    async def sim_socket(ws: WebSocket):
        await ws.accept()
        queue: asyncio.Queue = asyncio.Queue(TELEMETRY_QUEUE_DEPTH)
        service.clients.add(queue)

        async def sender():
            while True:
                await ws.send_text(await queue.get())

        send_task = asyncio.create_task(sender())
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = parse_client_message(json.loads(raw))
                except (ValueError, ValidationError, json.JSONDecodeError) as exc:
                    await ws.send_text(
                        ErrorMsg(message=str(exc)).model_dump_json())
                    continue
                service.handle(msg)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            service.clients.discard(queue)
            if not service.clients:
                # revert to the synthetic driver on disconnect
                service.pilot = None
                service.pilot_attached = False

    return app


def serve(spec: ScenarioSpec, host: str = "127.0.0.1", port: int = 8700):
    import uvicorn

    uvicorn.run(create_app(spec), host=host, port=port, log_level="warning")
