"""The ground station service: session handling, routing, telemetry fan-out.

One simulation thread owns the world and is the only code that touches it.
Socket I/O (binary frames on the drone/SDK port, JSON over WebSocket on the
console port) runs in per-connection threads that communicate with the loop
exclusively through queues: readers put inbound messages on `inbox`, the loop
puts outbound messages on per-session outboxes drained by writer threads.
"""
from __future__ import annotations

import json
import os
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Any

from . import ws
from .config import GatewayConfig
from .protocol import (
    AckStatus,
    Deframer,
    Frame,
    FrameError,
    FrameType,
    Opcode,
    SeqResult,
    SeqTracker,
    TelemetryRecord,
    decode_command_payload,
    decode_discover_payload,
    DiscoverIntent,
    encode_ack_payload,
    encode_announce_payload,
    encode_frame,
    encode_height_resp_payload,
    encode_telemetry_payload,
)
from .world import World

BROADCAST_DRONE_ID = 0xFF
INBOX_DRAIN_LIMIT = 1024    # messages processed per tick boundary
TELEMETRY_BACKLOG_CAP = 64  # skip telemetry pushes when a session lags this far

ROLES = ("pilot", "operator", "observer")


@dataclass
class Session:
    session_id: str
    transport: str                      # "frames" | "console"
    role: str = "observer"
    drones: set[int] = field(default_factory=set)
    subscribed: bool = False
    outbox: "queue.Queue[Any]" = field(default_factory=queue.Queue)
    alive: bool = True
    seq_out: int = 0                    # gateway-assigned seq for pushed frames
    cmd_seq: int = 0                    # auto seq for console-originated commands

    def next_seq(self) -> int:
        self.seq_out = (self.seq_out + 1) % (1 << 16)
        return self.seq_out


class Gateway:
    """Owns the world, the sim loop, and both listening sockets."""

    def __init__(
        self,
        config: GatewayConfig,
        *,
        log_path: str | None = None,
        max_ticks: int | None = None,
    ) -> None:
        self.config = config
        self.max_ticks = max_ticks
        self.inbox: "queue.Queue[tuple[str, Session | None, Any]]" = queue.Queue()
        self.sessions: dict[str, Session] = {}
        self.pilot_of: dict[int, str] = {}
        self.seq_tracker = SeqTracker()
        self._session_counter = 0
        self._session_lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._conns: set[socket.socket] = set()
        self._frames_server: socket.socket | None = None
        self._console_server: socket.socket | None = None
        self.race_active = False
        self._race_counter = 0

        os.makedirs(config.runs_dir, exist_ok=True)
        self.races_path = os.path.join(config.runs_dir, "races.jsonl")
        if log_path is None:
            stamp = time.strftime("%Y%m%d-%H%M%S")
            log_path = os.path.join(config.runs_dir, f"run-{stamp}-seed{config.seed}.jsonl")
        self.log_path = log_path
        self._log_file = open(log_path, "w", encoding="utf-8")

        self.world = World(
            physics=config.physics,
            arena_doc=config.arena_doc,
            seed=config.seed,
            n_drones=config.drones,
            link=config.link,
            flock=config.flock,
            height_quantum=config.height_quantum,
            height_noise_sd=config.height_noise_sd,
            log_sink=self._log_file,
            on_telemetry=self._fan_out_telemetry,
            on_race_event=self._on_race_event,
            on_peer_delivery=self._on_peer_delivery,
        )
        self.final_hash: str | None = None

    # --- lifecycle -----------------------------------------------------------------

    @property
    def frames_port(self) -> int:
        assert self._frames_server is not None
        return self._frames_server.getsockname()[1]

    @property
    def console_port(self) -> int:
        assert self._console_server is not None
        return self._console_server.getsockname()[1]

    def start(self) -> None:
        self._frames_server = self._listen(self.config.frames_port)
        self._console_server = self._listen(self.config.console_port)
        for name, server, handler in (
            ("frames-accept", self._frames_server, self._serve_frames_conn),
            ("console-accept", self._console_server, self._serve_console_conn),
        ):
            t = threading.Thread(target=self._accept_loop, args=(server, handler),
                                 name=name, daemon=True)
            t.start()
            self._threads.append(t)
        sim = threading.Thread(target=self._sim_loop, name="sim-loop", daemon=True)
        sim.start()
        self._threads.append(sim)

    @staticmethod
    def _listen(port: int) -> socket.socket:
        server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind(("0.0.0.0", port))
        server.listen(16)
        server.settimeout(0.25)
        return server

    def join(self, timeout: float | None = None) -> None:
        """Block until the sim loop finishes (duration bound or stop())."""
        deadline = None if timeout is None else time.monotonic() + timeout
        for t in self._threads:
            if t.name == "sim-loop":
                t.join(timeout if deadline is None else max(0.0, deadline - time.monotonic()))

    def stop(self) -> None:
        self._stop.set()
        for server in (self._frames_server, self._console_server):
            if server is not None:
                try:
                    server.close()
                except OSError:
                    pass
        for conn in list(self._conns):
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        for session in list(self.sessions.values()):
            session.outbox.put(None)
        for t in self._threads:
            t.join(timeout=2.0)
        if not self._log_file.closed:
            self._log_file.close()

    # --- sim loop --------------------------------------------------------------------

    def _sim_loop(self) -> None:
        dt = self.config.physics.dt
        wall_start = time.monotonic()
        try:
            while not self._stop.is_set():
                if self.max_ticks is not None and self.world.tick >= self.max_ticks:
                    break
                for _ in range(INBOX_DRAIN_LIMIT):
                    try:
                        kind, session, payload = self.inbox.get_nowait()
                    except queue.Empty:
                        break
                    self._dispatch(kind, session, payload)
                self.world.step()
                if self.config.real_time:
                    target = wall_start + self.world.tick * dt
                    delay = target - time.monotonic()
                    if delay > 0:
                        time.sleep(delay)
                elif self.world.tick % 16 == 0:
                    # unpaced mode: yield briefly so session I/O threads are
                    # not starved of the GIL by the spinning loop
                    time.sleep(0.0002)
        finally:
            self.final_hash = self.world.finalize_log()
            if not self._log_file.closed:
                self._log_file.close()
            self._stop.set()

    def _dispatch(self, kind: str, session: Session | None, payload: Any) -> None:
        if kind == "frame":
            self._handle_frame(session, payload)
        elif kind == "json":
            self._handle_console(session, payload)
        elif kind == "register":
            self.sessions[session.session_id] = session
        elif kind == "bye":
            self._drop_session(session)

    def _drop_session(self, session: Session | None) -> None:
        if session is None or not session.alive:
            return
        session.alive = False
        for drone_id, sid in list(self.pilot_of.items()):
            if sid == session.session_id:
                del self.pilot_of[drone_id]
        self.sessions.pop(session.session_id, None)
        session.outbox.put(None)

    def _new_session(self, transport: str) -> Session:
        """Create a session and hand it to the sim thread for registration.

        Called from connection threads; the sessions dict itself is only ever
        touched by the sim thread (via "register"/"bye" inbox messages).
        """
        with self._session_lock:
            self._session_counter += 1
            session = Session(session_id=f"s{self._session_counter}", transport=transport)
        self.inbox.put(("register", session, None))
        return session

    # --- binary frame sessions ---------------------------------------------------------

    def _handle_frame(self, session: Session, frame: Frame) -> None:
        if frame.ftype == FrameType.DISCOVER:
            self._handle_discover(session, frame)
        elif frame.ftype == FrameType.CMD:
            self._handle_cmd(session, frame)
        elif frame.ftype == FrameType.HEIGHT_REQ:
            self._handle_height_req(session, frame)
        elif frame.ftype == FrameType.PEER:
            self._handle_peer(session, frame)
        # ACK/TELEMETRY/ANNOUNCE/HEIGHT_RESP are gateway-to-client only: ignore

    def _send_frame(self, session: Session, frame: Frame) -> None:
        if session.alive:
            session.outbox.put(frame)

    def _handle_discover(self, session: Session, frame: Frame) -> None:
        intent = decode_discover_payload(frame.payload)
        status = AckStatus.OK
        if intent & DiscoverIntent.ATTACH_PILOT:
            drone_id = frame.drone_id
            if drone_id not in self.world.drones:
                status = AckStatus.UNKNOWN_DRONE
            else:
                holder = self.pilot_of.get(drone_id)
                if holder is not None and holder != session.session_id:
                    status = AckStatus.DUPLICATE  # conflict: drone already piloted
                else:
                    self.pilot_of[drone_id] = session.session_id
                    session.role = "pilot"
                    session.drones.add(drone_id)
        if intent & DiscoverIntent.SUBSCRIBE:
            session.subscribed = True
        payload = encode_announce_payload(status, sorted(self.world.drones))
        self._send_frame(session, Frame(FrameType.ANNOUNCE, frame.drone_id, frame.seq, payload))

    def _ack(self, session: Session, drone_id: int, seq: int, status: AckStatus,
             t_ms: int | None = None) -> None:
        if t_ms is None:
            t_ms = round(self.world.drones[drone_id].state.time * 1000) \
                if drone_id in self.world.drones else 0
        payload = encode_ack_payload(status, t_ms)
        self._send_frame(session, Frame(FrameType.ACK, drone_id, seq, payload))

    def _handle_cmd(self, session: Session, frame: Frame) -> None:
        drone_id = frame.drone_id
        if drone_id not in self.world.drones:
            self._ack(session, drone_id, frame.seq, AckStatus.UNKNOWN_DRONE)
            return
        if self.pilot_of.get(drone_id) != session.session_id:
            self._ack(session, drone_id, frame.seq, AckStatus.NOT_PILOT)
            return
        try:
            opcode, duration_ms = decode_command_payload(frame.payload)
        except ValueError:
            self._ack(session, drone_id, frame.seq, AckStatus.NACK_UNKNOWN_OPCODE)
            return
        verdict = self.seq_tracker.accept(drone_id, "cmd", frame.seq)
        if verdict == SeqResult.DUPLICATE:
            self._ack(session, drone_id, frame.seq, AckStatus.DUPLICATE)
            return
        if verdict == SeqResult.STALE:
            self._ack(session, drone_id, frame.seq, AckStatus.STALE_SEQ)
            return

        def reply(status: AckStatus, t_ms: int, _seq=frame.seq) -> None:
            self._ack(session, drone_id, _seq, status, t_ms)

        self.world.inject_command(drone_id, opcode, duration_ms, frame.seq, reply=reply)

    def _handle_height_req(self, session: Session, frame: Frame) -> None:
        drone_id = frame.drone_id
        if drone_id not in self.world.drones:
            self._ack(session, drone_id, frame.seq, AckStatus.UNKNOWN_DRONE)
            return

        def reply(value: float, _seq=frame.seq) -> None:
            payload = encode_height_resp_payload(value)
            self._send_frame(session, Frame(FrameType.HEIGHT_RESP, drone_id, _seq, payload))

        self.world.inject_height_req(drone_id, reply=reply)

    def _handle_peer(self, session: Session, frame: Frame) -> None:
        """PEER from a client: header drone_id is the destination (0xFF broadcast)."""
        piloted = [d for d in sorted(session.drones) if self.pilot_of.get(d) == session.session_id]
        if not piloted:
            self._ack(session, frame.drone_id, frame.seq, AckStatus.NOT_PILOT)
            return
        src = piloted[0]
        dst = None if frame.drone_id == BROADCAST_DRONE_ID else frame.drone_id
        if dst is not None and dst not in self.world.drones:
            self._ack(session, frame.drone_id, frame.seq, AckStatus.UNKNOWN_DRONE)
            return
        delivered = self.world.relay_peer(src, dst, frame.payload)
        self._ack(session, frame.drone_id, frame.seq, AckStatus.OK, t_ms=delivered)

    def _on_peer_delivery(self, src: int, dst: int, payload: bytes) -> None:
        sid = self.pilot_of.get(dst)
        if sid is None:
            return
        session = self.sessions.get(sid)
        if session is not None and session.transport == "frames":
            self._send_frame(session, Frame(FrameType.PEER, src, session.next_seq(), payload))

    # --- console (JSON over WebSocket) ---------------------------------------------------

    def _send_json(self, session: Session, doc: dict) -> None:
        if session.alive:
            session.outbox.put(doc)

    def _console_error(self, session: Session, message: str, tag: Any = None) -> None:
        self._send_json(session, {"type": "error", "message": message, "tag": tag})

    def _handle_console(self, session: Session, doc: Any) -> None:
        if not isinstance(doc, dict) or "type" not in doc:
            self._console_error(session, "malformed message")
            return
        mtype = doc["type"]
        tag = doc.get("tag")
        handler = {
            "hello": self._console_hello,
            "attach": self._console_attach,
            "detach": self._console_detach,
            "subscribe": self._console_subscribe,
            "cmd": self._console_cmd,
            "height": self._console_height,
            "flock": self._console_flock,
            "race": self._console_race,
            "leaderboard": self._console_leaderboard,
        }.get(mtype)
        if handler is None:
            self._console_error(session, f"unknown message type {mtype!r}", tag)
            return
        handler(session, doc)

    def _console_hello(self, session: Session, doc: dict) -> None:
        role = doc.get("role", "observer")
        if role not in ROLES:
            self._console_error(session, f"unknown role {role!r}", doc.get("tag"))
            return
        session.role = role
        session.subscribed = bool(doc.get("subscribe", True))
        self._send_json(session, {
            "type": "welcome",
            "session_id": session.session_id,
            "role": role,
            "drones": sorted(self.world.drones),
            "arena": self.world.arena_doc,
            "telemetry_hz": 1.0 / (self.world.telemetry_period * self.config.physics.dt),
            "race_active": self.race_active,
        })

    def _console_attach(self, session: Session, doc: dict) -> None:
        drone_id = doc.get("drone_id")
        tag = doc.get("tag")
        if drone_id not in self.world.drones:
            self._console_error(session, f"unknown drone {drone_id!r}", tag)
            return
        if session.role == "pilot":
            holder = self.pilot_of.get(drone_id)
            if holder is not None and holder != session.session_id:
                self._send_json(session, {"type": "attach_result", "drone_id": drone_id,
                                          "ok": False, "reason": "conflict", "tag": tag})
                return
            self.pilot_of[drone_id] = session.session_id
        session.drones.add(drone_id)
        self._send_json(session, {"type": "attach_result", "drone_id": drone_id,
                                  "ok": True, "tag": tag})

    def _console_detach(self, session: Session, doc: dict) -> None:
        drone_id = doc.get("drone_id")
        session.drones.discard(drone_id)
        if self.pilot_of.get(drone_id) == session.session_id:
            del self.pilot_of[drone_id]
        self._send_json(session, {"type": "detach_result", "drone_id": drone_id, "ok": True})

    def _console_subscribe(self, session: Session, doc: dict) -> None:
        session.subscribed = bool(doc.get("on", True))
        self._send_json(session, {"type": "subscribed", "on": session.subscribed})

    def _console_cmd(self, session: Session, doc: dict) -> None:
        drone_id = doc.get("drone_id")
        tag = doc.get("tag")
        if drone_id not in self.world.drones:
            self._console_error(session, f"unknown drone {drone_id!r}", tag)
            return
        if self.pilot_of.get(drone_id) != session.session_id:
            self._send_json(session, {"type": "ack", "drone_id": drone_id, "tag": tag,
                                      "status": "not_pilot", "ok": False})
            return
        op_name = str(doc.get("op", "")).upper()
        if op_name not in Opcode.__members__:
            self._send_json(session, {"type": "ack", "drone_id": drone_id, "tag": tag,
                                      "status": "unknown_opcode", "ok": False})
            return
        opcode = Opcode[op_name]
        duration_ms = doc.get("duration_ms")
        if opcode == Opcode.OFF:
            duration_ms = None
        elif not isinstance(duration_ms, int):
            self._send_json(session, {"type": "ack", "drone_id": drone_id, "tag": tag,
                                      "status": "bounds", "ok": False})
            return
        session.cmd_seq = (session.cmd_seq + 1) % (1 << 16)
        seq = session.cmd_seq

        def reply(status: AckStatus, t_ms: int) -> None:
            self._send_json(session, {
                "type": "ack", "drone_id": drone_id, "seq": seq, "tag": tag,
                "status": status.name.lower(), "ok": status == AckStatus.OK,
                "t": t_ms / 1000.0,
            })

        self.world.inject_command(drone_id, opcode, duration_ms, seq, reply=reply)

    def _console_height(self, session: Session, doc: dict) -> None:
        drone_id = doc.get("drone_id")
        tag = doc.get("tag")
        if drone_id not in self.world.drones:
            self._console_error(session, f"unknown drone {drone_id!r}", tag)
            return

        def reply(value: float) -> None:
            self._send_json(session, {"type": "height", "drone_id": drone_id,
                                      "value": value, "tag": tag})

        self.world.inject_height_req(drone_id, reply=reply)

    def _console_flock(self, session: Session, doc: dict) -> None:
        drone_id = doc.get("drone_id")
        tag = doc.get("tag")
        if session.role not in ("operator", "pilot"):
            self._console_error(session, "flock control needs operator or pilot role", tag)
            return
        if session.role == "pilot" and self.pilot_of.get(drone_id) != session.session_id:
            self._console_error(session, "not the pilot of that drone", tag)
            return
        if drone_id not in self.world.drones:
            self._console_error(session, f"unknown drone {drone_id!r}", tag)
            return
        on = bool(doc.get("on", True))
        self.world.set_flock(drone_id, on)
        self._send_json(session, {"type": "flock_set", "drone_id": drone_id, "on": on,
                                  "tag": tag})

    def _console_race(self, session: Session, doc: dict) -> None:
        verb = doc.get("verb")
        tag = doc.get("tag")
        if session.role != "operator":
            self._console_error(session, "race control needs the operator role", tag)
            return
        if verb == "arm":
            if self.race_active:
                self._console_error(session, "a trial is already active", tag)
                return
            self.race_active = True
            self._race_counter += 1
            self.world.reset_progress()
            self._broadcast_console({"type": "race_state", "active": True,
                                     "race_id": self._race_counter})
        elif verb == "abort":
            if not self.race_active:
                self._console_error(session, "no active trial", tag)
                return
            self._finish_race(dnf=True)
        else:
            self._console_error(session, f"unknown race verb {verb!r}", tag)

    def _console_leaderboard(self, session: Session, doc: dict) -> None:
        self._send_json(session, {"type": "leaderboard", "rows": self._leaderboard_rows()})

    # --- race bookkeeping -------------------------------------------------------------

    def _append_race_row(self, row: dict) -> None:
        with open(self.races_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(row, sort_keys=True) + "\n")

    def _leaderboard_rows(self, limit: int = 100) -> list[dict]:
        rows: list[dict] = []
        if os.path.exists(self.races_path):
            with open(self.races_path, encoding="utf-8") as f:
                for line in f:
                    line = line.strip()
                    if line:
                        rows.append(json.loads(line))
        finished = [r for r in rows if not r.get("dnf")]
        finished.sort(key=lambda r: r["finish_t"] - r["start_t"])
        return finished[:limit] + [r for r in rows if r.get("dnf")][-10:]

    def _on_race_event(self, drone_id: int, hoop: int, t: float, finished: bool) -> None:
        if not self.race_active:
            return
        self._broadcast_console({"type": "race_event", "drone_id": drone_id,
                                 "hoop": hoop, "t": t, "finished": finished,
                                 "race_id": self._race_counter})
        if finished:
            progress = self.world.drones[drone_id].progress
            row = {
                "race_id": self._race_counter,
                "drone_id": drone_id,
                "pilot": self.pilot_of.get(drone_id, "-"),
                "start_t": progress.start_t,
                "finish_t": progress.finish_t,
                "trial_time": progress.trial_time(),
                "dnf": False,
            }
            self._append_race_row(row)
            self._broadcast_console({"type": "leaderboard", "rows": self._leaderboard_rows()})
            started = [d for d in self.world.drones.values()
                       if d.progress.start_t is not None]
            if started and all(d.progress.finished for d in started):
                self.race_active = False
                self._broadcast_console({"type": "race_state", "active": False,
                                         "race_id": self._race_counter})

    def _finish_race(self, dnf: bool) -> None:
        for drone in self.world.drones.values():
            progress = drone.progress
            if progress.start_t is not None and not progress.finished:
                self._append_race_row({
                    "race_id": self._race_counter,
                    "drone_id": drone.id,
                    "pilot": self.pilot_of.get(drone.id, "-"),
                    "start_t": progress.start_t,
                    "finish_t": None,
                    "trial_time": None,
                    "dnf": True,
                })
        self.race_active = False
        self._broadcast_console({"type": "race_state", "active": False,
                                 "race_id": self._race_counter})
        self._broadcast_console({"type": "leaderboard", "rows": self._leaderboard_rows()})

    def _broadcast_console(self, doc: dict) -> None:
        for session in self.sessions.values():
            if session.transport == "console" and session.alive:
                self._send_json(session, doc)

    # --- telemetry fan-out ----------------------------------------------------------------

    def _fan_out_telemetry(self, records: list[TelemetryRecord]) -> None:
        frame_payloads: dict[int, bytes] | None = None
        console_doc: dict | None = None
        for session in self.sessions.values():
            if not (session.alive and session.subscribed):
                continue
            if session.outbox.qsize() > TELEMETRY_BACKLOG_CAP:
                continue  # lagging consumer: telemetry is ephemeral, drop this batch
            if session.transport == "frames":
                if frame_payloads is None:
                    frame_payloads = {r.drone_id: encode_telemetry_payload(r) for r in records}
                for rec in records:
                    frame = Frame(FrameType.TELEMETRY, rec.drone_id, session.next_seq(),
                                  frame_payloads[rec.drone_id])
                    self._send_frame(session, frame)
            else:
                if console_doc is None:
                    console_doc = {
                        "type": "telemetry",
                        "t": records[0].t if records else self.world.tick * self.config.physics.dt,
                        "drones": [{
                            "id": r.drone_id,
                            "position": list(r.position),
                            "velocity": list(r.velocity),
                            "heading": r.heading,
                            "yaw_rate": r.yaw_rate,
                            "height": r.height,
                            "channels": list(r.channels),
                            "flock": self.world.drones[r.drone_id].flock_on,
                            "next_hoop": self.world.drones[r.drone_id].progress.next_hoop,
                        } for r in records],
                    }
                self._send_json(session, console_doc)

    # --- socket plumbing -------------------------------------------------------------------

    def _accept_loop(self, server: socket.socket, handler) -> None:
        while not self._stop.is_set():
            try:
                conn, _addr = server.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(None)  # accepted sockets inherit the listener's timeout
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            # bound in-flight telemetry staleness for laggard consumers
            conn.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, 65536)
            t = threading.Thread(target=handler, args=(conn,), daemon=True)
            t.start()
            self._threads.append(t)

    def _serve_frames_conn(self, conn: socket.socket) -> None:
        self._conns.add(conn)
        session = self._new_session("frames")
        writer = threading.Thread(target=self._frames_writer, args=(session, conn), daemon=True)
        writer.start()
        deframer = Deframer()
        try:
            while not self._stop.is_set() and session.alive:
                try:
                    data = conn.recv(4096)
                except OSError:
                    break
                if not data:
                    break
                try:
                    frames = deframer.feed(data)
                except FrameError:
                    break  # corrupted reliable stream: drop the connection
                for frame in frames:
                    self.inbox.put(("frame", session, frame))
        finally:
            self.inbox.put(("bye", session, None))
            session.outbox.put(None)
            writer.join(timeout=2.0)
            self._conns.discard(conn)
            conn.close()

    def _frames_writer(self, session: Session, conn: socket.socket) -> None:
        while True:
            item = session.outbox.get()
            if item is None:
                return
            try:
                conn.sendall(encode_frame(item))
            except OSError:
                return

    def _serve_console_conn(self, conn: socket.socket) -> None:
        self._conns.add(conn)
        try:
            conn.settimeout(5.0)
            ws.accept_handshake(conn)
            conn.settimeout(None)
        except (ws.WebSocketError, OSError):
            self._conns.discard(conn)
            conn.close()
            return
        wsc = ws.WSConn(conn, mask_outgoing=False)
        session = self._new_session("console")
        writer = threading.Thread(target=self._console_writer, args=(session, wsc), daemon=True)
        writer.start()
        try:
            while not self._stop.is_set() and session.alive:
                try:
                    text = wsc.recv_text()
                except (ws.WebSocketError, OSError):
                    break
                if text is None:
                    break
                try:
                    doc = json.loads(text)
                except json.JSONDecodeError:
                    self._console_error(session, "invalid JSON")
                    continue
                self.inbox.put(("json", session, doc))
        finally:
            self.inbox.put(("bye", session, None))
            session.outbox.put(None)
            writer.join(timeout=2.0)
            self._conns.discard(conn)
            wsc.close()

    def _console_writer(self, session: Session, wsc: ws.WSConn) -> None:
        while True:
            item = session.outbox.get()
            if item is None:
                return
            try:
                wsc.send_text(json.dumps(item))
            except (ws.WebSocketError, OSError):
                return
