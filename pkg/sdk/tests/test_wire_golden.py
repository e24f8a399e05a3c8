"""Byte-exactness: SDK frames must equal the gateway codec's golden vectors.

The SDK encodes from protocol.md alone; the primary package (a test-only
dependency here) supplies the independent reference encodings.
"""
from __future__ import annotations

import struct

import pytest

from blimpsim.protocol import (
    AckStatus,
    Frame as RefFrame,
    FrameType,
    Opcode,
    TelemetryRecord,
    encode_ack_payload,
    encode_command_payload,
    encode_frame as ref_encode,
    encode_height_resp_payload,
    encode_telemetry_payload,
)

from blimpsdk import client as sdk_client
from blimpsdk import wire

GOLDEN_CMD_UP_HEX = "42440110030100050001d0070000abd9"


class FakeSocket:
    """Captures sendall() bytes and serves scripted recv() chunks."""

    def __init__(self):
        self.sent = bytearray()
        self.replies: list[bytes] = []

    def sendall(self, data: bytes) -> None:
        self.sent.extend(data)

    def recv(self, n: int) -> bytes:
        if not self.replies:
            raise AssertionError("client read more than the script provides")
        return self.replies.pop(0)

    def settimeout(self, t) -> None:
        pass

    def close(self) -> None:
        pass


def make_handle(drone_id: int = 3) -> tuple[sdk_client.DroneHandle, FakeSocket]:
    sock = FakeSocket()
    return sdk_client.DroneHandle(sock, drone_id), sock


def ref_ack(drone_id: int, seq: int, t_ms: int = 0) -> bytes:
    return ref_encode(RefFrame(FrameType.ACK, drone_id, seq,
                               encode_ack_payload(AckStatus.OK, t_ms)))


def ref_telemetry(drone_id: int, t: float) -> bytes:
    rec = TelemetryRecord(drone_id=drone_id, t=t, position=(0, 0, 1), velocity=(0, 0, 0),
                          heading=0.0, yaw_rate=0.0, height=1.0, channels=(0, 0, 0))
    return ref_encode(RefFrame(FrameType.TELEMETRY, drone_id, 1,
                               encode_telemetry_payload(rec)))


def test_up_2s_emits_the_frozen_golden_frame():
    handle, sock = make_handle(drone_id=3)
    sock.replies = [ref_ack(3, 1, t_ms=0), ref_telemetry(3, 10.0)]
    handle.up(2)
    assert sock.sent.hex() == GOLDEN_CMD_UP_HEX


@pytest.mark.parametrize("call,opcode", [
    ("up", Opcode.UP),
    ("down", Opcode.DOWN),
    ("forward", Opcode.FORWARD),
    ("backward", Opcode.BACKWARD),
    ("turn_left", Opcode.TURN_LEFT),
    ("turn_right", Opcode.TURN_RIGHT),
])
def test_all_timed_calls_match_reference_codec(call, opcode):
    handle, sock = make_handle(drone_id=5)
    sock.replies = [ref_ack(5, 1, t_ms=0), ref_telemetry(5, 100.0)]
    getattr(handle, call)(1.5)
    expected = ref_encode(RefFrame(FrameType.CMD, 5, 1,
                                   encode_command_payload(opcode, 1500)))
    assert bytes(sock.sent) == expected


def test_off_matches_reference_codec():
    handle, sock = make_handle(drone_id=5)
    sock.replies = [ref_ack(5, 1)]
    handle.off()
    expected = ref_encode(RefFrame(FrameType.CMD, 5, 1, encode_command_payload(Opcode.OFF, None)))
    assert bytes(sock.sent) == expected


def test_height_request_matches_reference_codec():
    handle, sock = make_handle(drone_id=5)
    resp = ref_encode(RefFrame(FrameType.HEIGHT_RESP, 5, 1, encode_height_resp_payload(1.23)))
    sock.replies = [resp]
    assert handle.height() == 1.23
    expected = ref_encode(RefFrame(FrameType.HEIGHT_REQ, 5, 1))
    assert bytes(sock.sent) == expected


def test_seq_strictly_increases_per_handle():
    handle, sock = make_handle(drone_id=2)
    sock.replies = [ref_ack(2, 1), ref_ack(2, 2)]
    handle.off()
    handle.off()
    frames = []
    buf = bytes(sock.sent)
    while buf:
        (plen,) = struct.unpack("<H", buf[7:9])
        total = 9 + plen + 2
        frames.append(buf[:total])
        buf = buf[total:]
    seqs = [struct.unpack("<H", f[5:7])[0] for f in frames]
    assert seqs == [1, 2]


def test_duration_rounds_half_up():
    handle, sock = make_handle(drone_id=1)
    sock.replies = [ref_ack(1, 1, t_ms=0), ref_telemetry(1, 100.0)]
    handle.forward(0.0015)  # 1.5 ms rounds half-up to 2 ms
    expected = ref_encode(RefFrame(FrameType.CMD, 1, 1,
                                   encode_command_payload(Opcode.FORWARD, 2)))
    assert bytes(sock.sent) == expected


def test_out_of_range_seconds_rejected_before_any_frame():
    handle, sock = make_handle()
    for bad in (0, -1, 60.001, float("nan")):
        with pytest.raises(ValueError):
            handle.up(bad)
    assert sock.sent == bytearray()  # nothing went on the wire


def test_nack_surfaces_as_descriptive_error():
    handle, sock = make_handle(drone_id=3)
    nack = ref_encode(RefFrame(FrameType.ACK, 3, 1,
                               encode_ack_payload(AckStatus.NOT_PILOT, 0)))
    sock.replies = [nack]
    with pytest.raises(sdk_client.CommandRejected, match="pilot"):
        handle.up(1)


def test_sdk_crc_against_reference():
    import random
    from blimpsim.protocol import crc16 as ref_crc16
    rng = random.Random(3)
    for _ in range(100):
        data = rng.randbytes(rng.randrange(0, 64))
        assert wire.crc16(data) == ref_crc16(data)
