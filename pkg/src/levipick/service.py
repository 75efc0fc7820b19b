"""HTTP + WebSocket service exposing the emulated device and field queries.

Sessions are independent: each owns a device state and a simulated
particle.  Mutations (wire-protocol commands, settle batches) are applied
under a per-session lock (single writer); reads work on snapshots.  Every
commit or settle batch pushes an event with the commit counter, particle
position and current axial node list to all WebSocket subscribers.
"""

from __future__ import annotations

import asyncio
import json
import math
import pathlib
import queue
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from .config import TrapConfig, config_hash
from .device import (DeviceState, ParseError, PlanningError, ProtocolError,
                     RangeError, apply_line, plan_picking, to_array_state)
from .dynamics import EscapeError, basin_map, settle
from .gorkov import find_axial_nodes, force_field, gorkov_field


class CommandRequest(BaseModel):
    line: str


class SettleRequest(BaseModel):
    steps: int = 25


@dataclass
class Session:
    id: str
    config: TrapConfig
    device: DeviceState
    particle_position: np.ndarray
    escaped: bool = False
    settled: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)
    subscribers: list[queue.SimpleQueue] = field(default_factory=list)

    def array_state(self):
        cfg = self.config
        per = (cfg.cylinder.transducers_per_ring
               if cfg.array_kind == "cylinder" else self.device.channel_count)
        return to_array_state(self.device, cfg.build_sources(), cfg.constants,
                              list(cfg.reflectors), cfg.max_image_order, per)

    def node_list(self):
        cfg = self.config
        top = max(s.position[2] for s in cfg.build_sources())
        nodes = find_axial_nodes(self.array_state(), cfg.particle,
                                 (cfg.particle.radius,
                                  top + cfg.constants.wavelength))
        return [{"z": n.z, "stability": n.stability, "potential": n.potential}
                for n in nodes]

    def particle_payload(self) -> dict:
        return {"position": [float(v) for v in self.particle_position],
                "settled": self.settled, "escaped": self.escaped}

    def push_event(self) -> dict:
        event = {"commit_counter": self.device.commit_counter,
                 "particle": self.particle_payload(),
                 "nodes": self.node_list()}
        for sub in list(self.subscribers):
            sub.put(event)
        return event


def create_app(config: TrapConfig | None = None,
               cache_dir: str | pathlib.Path | None = None) -> FastAPI:
    cfg = config or TrapConfig()
    app = FastAPI(title="levipick service")
    sessions: dict[str, Session] = {}
    cache = pathlib.Path(cache_dir) if cache_dir else None
    basin_lock = threading.Lock()
    planned: dict[str, object] = {}

    def get_schedule():
        """Plan once per app (callers hold basin_lock)."""
        if "schedule" not in planned:
            planned["schedule"] = plan_picking(
                cfg.build_sources(), cfg.particle, cfg.constants,
                target_height=cfg.picking.target_height / 0.9,
                reflectors=cfg.reflectors,
                max_image_order=cfg.max_image_order,
                increment_steps=cfg.picking.increment_steps,
                rings=cfg.cylinder.rings,
                transducers_per_ring=cfg.cylinder.transducers_per_ring)
        return planned["schedule"]

    def get_session(sid: str) -> Session:
        try:
            return sessions[sid]
        except KeyError:
            raise HTTPException(status_code=404,
                                detail={"error": "unknown session", "id": sid})

    @app.post("/sessions")
    def create_session() -> dict:
        sid = uuid.uuid4().hex[:12]
        geometry = cfg.build_sources()
        rings = cfg.cylinder.rings if cfg.array_kind == "cylinder" else 1
        sessions[sid] = Session(
            id=sid, config=cfg,
            device=DeviceState(channel_count=len(geometry), rings=rings),
            particle_position=np.array([0.0, 0.0, cfg.particle.radius]))
        return {"session_id": sid, "channel_count": len(geometry),
                "rings": rings, "config_hash": config_hash(cfg)}

    @app.delete("/sessions/{sid}")
    def delete_session(sid: str) -> dict:
        get_session(sid)
        del sessions[sid]
        return {"deleted": sid}

    @app.post("/sessions/{sid}/command")
    def post_command(sid: str, req: CommandRequest) -> dict:
        ses = get_session(sid)
        with ses.lock:
            try:
                reply = apply_line(ses.device, req.line)
            except ParseError as exc:
                raise HTTPException(status_code=422, detail={
                    "error": "parse", "message": str(exc),
                    "offset": exc.offset})
            except RangeError as exc:
                raise HTTPException(status_code=422, detail={
                    "error": "range", "message": str(exc)})
            except ProtocolError as exc:
                raise HTTPException(status_code=422, detail={
                    "error": "protocol", "message": str(exc)})
            committed = (req.line.split("#", 1)[0].strip().upper() == "COMMIT")
            if committed:
                ses.settled = False
                ses.push_event()
            return {"ok": True,
                    "commit_counter": ses.device.commit_counter,
                    "reply": json.loads(reply) if reply else None}

    @app.get("/sessions/{sid}/device")
    def get_device(sid: str) -> dict:
        return get_session(sid).device.snapshot()

    @app.get("/sessions/{sid}/profile")
    def get_profile(sid: str, samples: int = 200) -> dict:
        ses = get_session(sid)
        cfg = ses.config
        top = max(s.position[2] for s in cfg.build_sources())
        zs = np.linspace(cfg.particle.radius,
                         top + cfg.constants.wavelength, samples)
        pts = np.zeros((zs.size, 3))
        pts[:, 2] = zs
        arr = ses.array_state()
        u = gorkov_field(arr, pts, cfg.particle)
        fz = force_field(arr, pts, cfg.particle)[:, 2]
        return {"z": zs.tolist(), "potential": u.tolist(),
                "force_z": fz.tolist(), "weight": cfg.particle.weight}

    @app.get("/sessions/{sid}/particle")
    def get_particle(sid: str) -> dict:
        return get_session(sid).particle_payload()

    @app.get("/sessions/{sid}/nodes")
    def get_nodes(sid: str) -> dict:
        return {"nodes": get_session(sid).node_list()}

    @app.post("/sessions/{sid}/step-settle")
    def step_settle(sid: str, req: SettleRequest) -> dict:
        if req.steps < 1:
            raise HTTPException(status_code=422, detail={
                "error": "range", "message": "steps must be >= 1"})
        ses = get_session(sid)
        with ses.lock:
            cfg = ses.config
            res = settle(ses.array_state(), cfg.particle,
                         ses.particle_position, cfg.motion,
                         max_steps=req.steps)
            ses.particle_position = res.position
            ses.settled = bool(res.converged)
            wall = min(math.hypot(s.position[0], s.position[1])
                       for s in cfg.build_sources())
            if math.hypot(*res.position[:2]) > wall:
                ses.escaped = True
            event = ses.push_event()
        return event

    @app.get("/basin")
    def get_basin(spacing: float = 0.005, extent: float = 0.020) -> dict:
        key = f"{config_hash(cfg)}-{spacing:.6f}-{extent:.6f}"
        if cache:
            path = cache / f"basin-{key}.json"
            if path.exists():
                return json.loads(path.read_text(encoding="ascii"))
        with basin_lock:
            try:
                sched = get_schedule()
            except PlanningError as exc:
                raise HTTPException(status_code=500, detail={
                    "error": "planning", "message": str(exc)})
            result = basin_map(sched, cfg.particle, params=cfg.motion,
                               spacing=spacing, extent=extent)
        payload = {
            "config_hash": config_hash(cfg), "spacing": result.spacing,
            "xs": result.xs.tolist(), "ys": result.ys.tolist(),
            "classes": [[str(c) for c in row] for row in result.classes],
            "equivalent_diameter": result.equivalent_diameter(),
        }
        if cache:
            cache.mkdir(parents=True, exist_ok=True)
            (cache / f"basin-{key}.json").write_text(
                json.dumps(payload), encoding="ascii")
        return payload

    @app.get("/script")
    def get_script() -> dict:
        key = config_hash(cfg)
        if cache:
            path = cache / f"script-{key}.json"
            if path.exists():
                return json.loads(path.read_text(encoding="ascii"))
        with basin_lock:
            try:
                sched = get_schedule()
            except PlanningError as exc:
                raise HTTPException(status_code=500, detail={
                    "error": "planning", "message": str(exc)})
        payload = {
            "config_hash": key,
            "channel_count": sched.channel_count,
            "rings": sched.rings,
            "target_height": sched.target_height,
            "stages": [{"name": s.name,
                        "expected_height": s.expected_height,
                        "lines": list(s.command_lines)}
                       for s in sched.stages],
        }
        if cache:
            cache.mkdir(parents=True, exist_ok=True)
            (cache / f"script-{key}.json").write_text(json.dumps(payload),
                                                      encoding="ascii")
        return payload

    @app.websocket("/sessions/{sid}/events")
    async def events(ws: WebSocket, sid: str) -> None:
        ses = sessions.get(sid)
        if ses is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        sub: queue.SimpleQueue = queue.SimpleQueue()
        ses.subscribers.append(sub)
        try:
            while True:
                try:
                    event = await asyncio.to_thread(sub.get, True, 1.0)
                except queue.Empty:
                    # keep the connection responsive to client closes
                    try:
                        await asyncio.wait_for(ws.receive_text(), timeout=0.001)
                    except asyncio.TimeoutError:
                        continue
                    continue
                await ws.send_text(json.dumps(event))
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            if sub in ses.subscribers:
                ses.subscribers.remove(sub)

    return app
