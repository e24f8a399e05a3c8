"""End-to-end gateway tests over real sockets (frames and console channels)."""
from __future__ import annotations

import json
import os
import socket
import struct
import time

import pytest

from blimpsim import ws
from blimpsim.config import load_config
from blimpsim.gateway import Gateway
from blimpsim.protocol import (
    AckStatus,
    Deframer,
    DiscoverIntent,
    Frame,
    FrameType,
    Opcode,
    decode_ack_payload,
    decode_announce_payload,
    decode_height_resp_payload,
    decode_telemetry_payload,
    encode_command_payload,
    encode_discover_payload,
    encode_frame,
)


class FramesClient:
    """Minimal binary-protocol client for exercising the gateway in tests."""

    def __init__(self, port: int):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10.0)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.deframer = Deframer()
        self.pending: list[Frame] = []
        self.seq = 0

    def send(self, ftype: FrameType, drone_id: int, payload: bytes = b"") -> int:
        self.seq += 1
        self.sock.sendall(encode_frame(Frame(ftype, drone_id, self.seq, payload)))
        return self.seq

    def recv(self, want: FrameType | None = None, timeout: float = 10.0) -> Frame:
        deadline = time.monotonic() + timeout
        while True:
            while self.pending:
                frame = self.pending.pop(0)
                if want is None or frame.ftype == want:
                    return frame
            self.sock.settimeout(max(0.05, deadline - time.monotonic()))
            data = self.sock.recv(4096)
            if not data:
                raise ConnectionError("gateway closed the connection")
            self.pending.extend(self.deframer.feed(data))

    def attach(self, drone_id: int, subscribe: bool = False) -> AckStatus:
        intent = DiscoverIntent.ATTACH_PILOT | (DiscoverIntent.SUBSCRIBE if subscribe else 0)
        self.send(FrameType.DISCOVER, drone_id, encode_discover_payload(intent))
        announce = self.recv(FrameType.ANNOUNCE)
        status, _ = decode_announce_payload(announce.payload)
        return status

    def close(self):
        self.sock.close()


@pytest.fixture
def gateway(tmp_path):
    cfg = load_config(None, frames_port=0, console_port=0, real_time=False, drones=3,
                      runs_dir=str(tmp_path / "runs"))
    gw = Gateway(cfg, log_path=str(tmp_path / "run.jsonl"))
    gw.start()
    yield gw
    gw.stop()


def test_discover_enumerates_drones(gateway):
    client = FramesClient(gateway.frames_port)
    client.send(FrameType.DISCOVER, 0)
    announce = client.recv(FrameType.ANNOUNCE)
    status, drones = decode_announce_payload(announce.payload)
    assert status == AckStatus.OK
    assert drones == [0, 1, 2]
    client.close()


def test_pilot_exclusivity_between_clients(gateway):
    a = FramesClient(gateway.frames_port)
    b = FramesClient(gateway.frames_port)
    assert a.attach(1) == AckStatus.OK
    assert b.attach(1) == AckStatus.DUPLICATE  # conflict
    assert b.attach(2) == AckStatus.OK         # different drone is fine
    a.close()
    time.sleep(0.3)  # pilot slot released on disconnect
    assert b.attach(1) == AckStatus.OK
    b.close()


def test_attach_unknown_drone(gateway):
    client = FramesClient(gateway.frames_port)
    assert client.attach(250) == AckStatus.UNKNOWN_DRONE
    client.close()


def test_command_requires_pilot(gateway):
    client = FramesClient(gateway.frames_port)
    client.send(FrameType.CMD, 0, encode_command_payload(Opcode.UP, 1000))
    ack = client.recv(FrameType.ACK)
    status, _ = decode_ack_payload(ack.payload)
    assert status == AckStatus.NOT_PILOT
    client.close()


def test_command_ack_and_duplicate(gateway):
    client = FramesClient(gateway.frames_port)
    assert client.attach(0) == AckStatus.OK
    seq = client.send(FrameType.CMD, 0, encode_command_payload(Opcode.UP, 1000))
    ack = client.recv(FrameType.ACK)
    assert ack.seq == seq
    assert decode_ack_payload(ack.payload)[0] == AckStatus.OK
    # identical seq again: duplicate-ack, executed once
    client.sock.sendall(encode_frame(Frame(
        FrameType.CMD, 0, seq, encode_command_payload(Opcode.UP, 1000))))
    ack2 = client.recv(FrameType.ACK)
    assert decode_ack_payload(ack2.payload)[0] == AckStatus.DUPLICATE
    client.close()


def test_height_round_trip(gateway):
    client = FramesClient(gateway.frames_port)
    client.send(FrameType.HEIGHT_REQ, 0)
    resp = client.recv(FrameType.HEIGHT_RESP)
    value = decode_height_resp_payload(resp.payload)
    assert value >= 0.0
    client.close()


def test_telemetry_subscription_stream(gateway):
    client = FramesClient(gateway.frames_port)
    assert client.attach(0, subscribe=True) == AckStatus.OK
    seen = set()
    for _ in range(9):
        frame = client.recv(FrameType.TELEMETRY)
        rec = decode_telemetry_payload(frame.drone_id, frame.payload)
        seen.add(rec.drone_id)
        assert rec.t >= 0.0
    assert seen == {0, 1, 2}
    client.close()


def test_unsubscribed_gets_no_telemetry(gateway):
    client = FramesClient(gateway.frames_port)
    assert client.attach(0, subscribe=False) == AckStatus.OK
    with pytest.raises((socket.timeout, TimeoutError)):
        client.recv(FrameType.TELEMETRY, timeout=0.6)
    client.close()


def test_peer_frames_relayed_between_clients(gateway):
    a = FramesClient(gateway.frames_port)
    b = FramesClient(gateway.frames_port)
    assert a.attach(0) == AckStatus.OK
    assert b.attach(1) == AckStatus.OK
    a.send(FrameType.PEER, 1, b"\x7fstudent-data")  # dst drone 1
    ack = a.recv(FrameType.ACK)
    status, delivered = decode_ack_payload(ack.payload)
    assert status == AckStatus.OK and delivered == 1
    peer = b.recv(FrameType.PEER)
    assert peer.drone_id == 0  # src
    assert peer.payload == b"\x7fstudent-data"
    a.close()
    b.close()


def test_corrupt_stream_drops_connection(gateway):
    client = FramesClient(gateway.frames_port)
    client.sock.sendall(b"garbage that is not a frame at all....")
    with pytest.raises((ConnectionError, OSError)):
        for _ in range(10):
            client.recv(timeout=1.0)
    client.close()


# --- console channel -----------------------------------------------------------------


class ConsoleClient:
    def __init__(self, port: int, role: str = "observer", subscribe: bool = True):
        self.conn = ws.connect("127.0.0.1", port)
        self.send({"type": "hello", "role": role, "subscribe": subscribe})
        self.welcome = self.expect("welcome")

    def send(self, doc: dict) -> None:
        self.conn.send_text(json.dumps(doc))

    def expect(self, mtype: str, timeout: float = 10.0) -> dict:
        self.conn.sock.settimeout(timeout)
        while True:
            text = self.conn.recv_text()
            if text is None:
                raise ConnectionError("console channel closed")
            doc = json.loads(text)
            if doc["type"] == mtype:
                return doc

    def close(self):
        self.conn.close()


def test_console_welcome_carries_arena(gateway):
    console = ConsoleClient(gateway.console_port)
    assert console.welcome["drones"] == [0, 1, 2]
    assert "bounds" in console.welcome["arena"]
    assert console.welcome["telemetry_hz"] == pytest.approx(20.0)
    console.close()


def test_console_pilot_flow_and_conflict(gateway):
    pilot = ConsoleClient(gateway.console_port, role="pilot")
    pilot.send({"type": "attach", "drone_id": 0})
    assert pilot.expect("attach_result")["ok"] is True
    pilot.send({"type": "cmd", "drone_id": 0, "op": "up", "duration_ms": 500, "tag": 7})
    ack = pilot.expect("ack")
    assert ack["ok"] is True and ack["tag"] == 7

    rival = ConsoleClient(gateway.console_port, role="pilot")
    rival.send({"type": "attach", "drone_id": 0})
    result = rival.expect("attach_result")
    assert result["ok"] is False and result["reason"] == "conflict"
    rival.close()
    pilot.close()


def test_console_observer_cannot_command(gateway):
    console = ConsoleClient(gateway.console_port, role="observer")
    console.send({"type": "attach", "drone_id": 0})
    assert console.expect("attach_result")["ok"] is True  # read-only attach
    console.send({"type": "cmd", "drone_id": 0, "op": "up", "duration_ms": 500})
    assert console.expect("ack")["status"] == "not_pilot"
    console.close()


def test_console_telemetry_includes_all_drones(gateway):
    console = ConsoleClient(gateway.console_port)
    batch = console.expect("telemetry")
    assert sorted(d["id"] for d in batch["drones"]) == [0, 1, 2]
    drone = batch["drones"][0]
    assert set(drone) >= {"position", "velocity", "heading", "height", "channels"}
    console.close()


def test_console_race_requires_operator(gateway):
    console = ConsoleClient(gateway.console_port, role="observer")
    console.send({"type": "race", "verb": "arm"})
    assert "operator" in console.expect("error")["message"]
    console.close()


def test_console_race_arm_and_abort(gateway):
    operator = ConsoleClient(gateway.console_port, role="operator")
    operator.send({"type": "race", "verb": "arm"})
    assert operator.expect("race_state")["active"] is True
    # second arm while active is refused
    operator.send({"type": "race", "verb": "arm"})
    assert "already active" in operator.expect("error")["message"]
    operator.send({"type": "race", "verb": "abort"})
    assert operator.expect("race_state")["active"] is False
    operator.close()


def test_console_flock_toggle(gateway):
    operator = ConsoleClient(gateway.console_port, role="operator")
    operator.send({"type": "flock", "drone_id": 0, "on": True})
    assert operator.expect("flock_set")["on"] is True
    batch = operator.expect("telemetry")
    flags = {d["id"]: d["flock"] for d in batch["drones"]}
    assert flags[0] is True and flags[1] is False
    operator.close()


def test_race_finish_appends_results_row(tmp_path):
    # single drone, no hoops between spawn and a trivial one-hoop course
    arena = {
        "bounds": {"min": [-6.0, -4.0, 0.0], "max": [6.0, 4.0, 3.0]},
        "hoops": [
            {"center": [-3.0, 0.0, 1.0], "normal": [1.0, 0.0, 0.0], "radius": 1.0, "order": 0},
            {"center": [-1.0, 0.0, 1.0], "normal": [1.0, 0.0, 0.0], "radius": 1.0, "order": 1},
        ],
        "obstacles": [],
        "spawns": [{"position": [-5.0, 0.0, 1.0], "heading": 0.0}],
    }
    cfg = load_config(None, frames_port=0, console_port=0, real_time=False, drones=1,
                      runs_dir=str(tmp_path / "runs"), arena_doc=arena)
    gw = Gateway(cfg, log_path=str(tmp_path / "run.jsonl"))
    gw.start()
    try:
        operator = ConsoleClient(gateway := gw.console_port, role="operator")  # noqa: F841
        operator.send({"type": "race", "verb": "arm"})
        operator.expect("race_state")

        pilot = ConsoleClient(gw.console_port, role="pilot")
        pilot.send({"type": "attach", "drone_id": 0})
        pilot.expect("attach_result")
        pilot.send({"type": "cmd", "drone_id": 0, "op": "forward", "duration_ms": 15000})
        pilot.expect("ack")

        event = operator.expect("race_event", timeout=30.0)
        assert event["drone_id"] == 0 and event["hoop"] == 0
        finish = operator.expect("race_event", timeout=30.0)
        while not finish["finished"]:
            finish = operator.expect("race_event", timeout=30.0)
        board = operator.expect("leaderboard", timeout=30.0)
        assert board["rows"], board
        row = board["rows"][0]
        assert row["drone_id"] == 0 and row["dnf"] is False
        assert row["trial_time"] == pytest.approx(row["finish_t"] - row["start_t"])

        races_file = os.path.join(str(tmp_path / "runs"), "races.jsonl")
        assert os.path.exists(races_file)
        stored = [json.loads(line) for line in open(races_file)]
        assert stored[-1]["drone_id"] == 0
        pilot.close()
        operator.close()
    finally:
        gw.stop()


def test_gateway_shutdown_finalizes_log(tmp_path):
    cfg = load_config(None, frames_port=0, console_port=0, real_time=False, drones=1,
                      runs_dir=str(tmp_path / "runs"))
    gw = Gateway(cfg, log_path=str(tmp_path / "run.jsonl"), max_ticks=300)
    gw.start()
    gw.join(timeout=30.0)
    gw.stop()
    assert gw.final_hash is not None
    lines = open(tmp_path / "run.jsonl").read().strip().split("\n")
    header = json.loads(lines[0])
    tail = json.loads(lines[-1])
    assert header["kind"] == "header" and header["seed"] == 0
    assert tail["kind"] == "final_hash" and tail["hash"] == gw.final_hash
    assert tail["tick"] == 300
