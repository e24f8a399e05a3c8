"""Blocking drone handle: the eight classroom calls over one TCP connection.

Timed calls return only after the command's duration has elapsed in simulated
time (paced by the telemetry stream, not the wall clock), so the same student
script behaves identically against a real-time or fast-forwarded gateway.
"""
from __future__ import annotations

import math
import socket
import time

from . import wire

DEFAULT_PORT = 7787
ACK_TIMEOUT = 2.0          # wall seconds to wait for a command ack
TELEMETRY_TIMEOUT = 30.0   # wall seconds without any frame before giving up
MAX_SECONDS = 60.0


class DroneError(Exception):
    """Base for everything this client raises on purpose."""


class ConflictError(DroneError):
    """The drone already has a pilot."""


class UnreachableError(DroneError):
    """No gateway answered at that address."""


class CommandRejected(DroneError):
    pass


class AckTimeout(DroneError):
    pass


class DroneHandle:
    """One piloted drone. Create with connect()."""

    def __init__(self, sock: socket.socket, drone_id: int):
        self._sock = sock
        self._decoder = wire.StreamDecoder()
        self._pending: list[wire.Frame] = []
        self.drone_id = drone_id
        self.seq = 0
        self._telemetry_t = None  # latest sim seconds seen for this drone

    # -- plumbing ---------------------------------------------------------------

    def _send(self, ftype: int, payload: bytes) -> int:
        self.seq = (self.seq + 1) % (1 << 16)
        frame = wire.Frame(ftype, self.drone_id, self.seq, payload)
        self._sock.sendall(wire.encode_frame(frame))
        return self.seq

    def _next_frame(self, deadline: float) -> wire.Frame:
        while True:
            if self._pending:
                frame = self._pending.pop(0)
                if frame.ftype == wire.FT_TELEMETRY and frame.drone_id == self.drone_id:
                    self._telemetry_t = wire.parse_telemetry_time_ms(frame.payload) / 1000.0
                return frame
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise AckTimeout("no response from gateway")
            self._sock.settimeout(remaining)
            try:
                data = self._sock.recv(4096)
            except socket.timeout:
                raise AckTimeout("no response from gateway") from None
            if not data:
                raise UnreachableError("gateway closed the connection")
            self._pending.extend(self._decoder.feed(data))

    def _await_ack(self, seq: int, timeout: float = ACK_TIMEOUT) -> tuple[int, int]:
        deadline = time.monotonic() + timeout
        while True:
            frame = self._next_frame(deadline)
            if frame.ftype == wire.FT_ACK and frame.seq == seq:
                return wire.parse_ack(frame.payload)

    def _await_sim_time(self, target_t: float) -> None:
        while self._telemetry_t is None or self._telemetry_t < target_t:
            self._next_frame(time.monotonic() + TELEMETRY_TIMEOUT)

    def _timed(self, call: str, sec: float) -> None:
        if not isinstance(sec, (int, float)) or math.isnan(sec):
            raise ValueError(f"{call}({sec!r}): seconds must be a number")
        if not 0.0 < sec <= MAX_SECONDS:
            raise ValueError(f"{call}({sec}): seconds must be in (0, {MAX_SECONDS:.0f}]")
        duration_ms = int(math.floor(sec * 1000.0 + 0.5))  # round half up
        seq = self._send(wire.FT_CMD, wire.command_payload(call, duration_ms))
        status, t_ms = self._await_ack(seq)
        if status != wire.ACK_OK:
            raise CommandRejected(
                f"{call}({sec}) rejected: {wire.ACK_STATUS_NAMES.get(status, status)}")
        self._await_sim_time(t_ms / 1000.0 + duration_ms / 1000.0)

    # -- the Table 1 surface -------------------------------------------------------

    def up(self, sec: float) -> None:
        """Climb at full vertical thrust for sec seconds (blocks)."""
        self._timed("up", sec)

    def down(self, sec: float) -> None:
        self._timed("down", sec)

    def forward(self, sec: float) -> None:
        self._timed("forward", sec)

    def backward(self, sec: float) -> None:
        self._timed("backward", sec)

    def turn_left(self, sec: float) -> None:
        self._timed("turn_left", sec)

    def turn_right(self, sec: float) -> None:
        self._timed("turn_right", sec)

    def off(self) -> None:
        """Stop yaw/lateral motion and hold the current altitude (immediate)."""
        seq = self._send(wire.FT_CMD, wire.command_payload("off", None))
        status, _ = self._await_ack(seq)
        if status != wire.ACK_OK:
            raise CommandRejected(
                f"off() rejected: {wire.ACK_STATUS_NAMES.get(status, status)}")

    def height(self) -> float:
        """Current height above the floor in meters (quantized sensor reading)."""
        seq = self._send(wire.FT_HEIGHT_REQ, b"")
        deadline = time.monotonic() + ACK_TIMEOUT
        while True:
            frame = self._next_frame(deadline)
            if frame.ftype == wire.FT_HEIGHT_RESP and frame.seq == seq:
                return wire.parse_height(frame.payload)

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def __enter__(self) -> "DroneHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def connect(host: str, drone_id: int, port: int = DEFAULT_PORT,
            timeout: float = 5.0) -> DroneHandle:
    """Open a pilot session on one drone; raises ConflictError if it is taken."""
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as e:
        raise UnreachableError(f"no gateway at {host}:{port} ({e})") from None
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    # keep the receive window modest: against a fast-forwarded gateway this
    # bounds how much stale telemetry can pile up while a script is busy
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 131072)
    handle = DroneHandle(sock, drone_id)
    intent = wire.INTENT_ATTACH_PILOT | wire.INTENT_SUBSCRIBE
    seq = handle._send(wire.FT_DISCOVER, bytes([intent]))
    deadline = time.monotonic() + timeout
    while True:
        frame = handle._next_frame(deadline)
        if frame.ftype == wire.FT_ANNOUNCE and frame.seq == seq:
            status, drones = wire.parse_announce(frame.payload)
            break
    if status == wire.ACK_DUPLICATE:
        handle.close()
        raise ConflictError(f"drone {drone_id} already has a pilot")
    if status != wire.ACK_OK:
        handle.close()
        raise DroneError(
            f"cannot attach drone {drone_id}: "
            f"{wire.ACK_STATUS_NAMES.get(status, status)} (gateway has {drones})")
    return handle
