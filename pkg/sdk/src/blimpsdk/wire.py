"""Client-side wire codec, written against protocol.md.

Deliberately independent of the gateway's own implementation: this package
talks to the documented byte contract, nothing else.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

MAGIC = b"\x42\x44"
VERSION = 0x01
HEADER_LEN = 9
MAX_PAYLOAD = 512

FT_CMD = 0x10
FT_ACK = 0x11
FT_TELEMETRY = 0x20
FT_PEER = 0x30
FT_DISCOVER = 0x40
FT_ANNOUNCE = 0x41
FT_HEIGHT_REQ = 0x50
FT_HEIGHT_RESP = 0x51

OPCODES = {
    "up": 0x01,
    "down": 0x02,
    "forward": 0x03,
    "backward": 0x04,
    "turn_left": 0x05,
    "turn_right": 0x06,
    "off": 0x07,
}

ACK_OK = 0x00
ACK_DUPLICATE = 0x01
ACK_STATUS_NAMES = {
    0x00: "ok",
    0x01: "duplicate",
    0x02: "duration out of bounds",
    0x03: "unknown opcode",
    0x04: "not the pilot of this drone",
    0x05: "unknown drone",
    0x06: "stale sequence number",
}

INTENT_ATTACH_PILOT = 0x01
INTENT_SUBSCRIBE = 0x02


def crc16(data: bytes) -> int:
    """CRC-16/CCITT-FALSE, as required by the frame trailer."""
    crc = 0xFFFF
    for b in data:
        crc ^= b << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc


@dataclass(frozen=True)
class Frame:
    ftype: int
    drone_id: int
    seq: int
    payload: bytes = b""


def encode_frame(frame: Frame) -> bytes:
    body = MAGIC + struct.pack("<BBBHH", VERSION, frame.ftype, frame.drone_id,
                               frame.seq, len(frame.payload)) + frame.payload
    return body + struct.pack("<H", crc16(body))


def command_payload(call: str, duration_ms: int | None) -> bytes:
    opcode = OPCODES[call]
    if call == "off":
        return bytes([opcode])
    return bytes([opcode]) + struct.pack("<I", duration_ms)


class StreamDecoder:
    """Reassembles frames from the reliable byte stream, verifying the CRC."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Frame]:
        self._buf.extend(data)
        frames = []
        while len(self._buf) >= HEADER_LEN:
            if bytes(self._buf[:2]) != MAGIC or self._buf[2] != VERSION:
                raise ConnectionError("gateway stream out of sync")
            (payload_len,) = struct.unpack("<H", self._buf[7:9])
            if payload_len > MAX_PAYLOAD:
                raise ConnectionError("oversized frame on stream")
            total = HEADER_LEN + payload_len + 2
            if len(self._buf) < total:
                break
            raw = bytes(self._buf[:total])
            del self._buf[:total]
            (crc_recv,) = struct.unpack("<H", raw[-2:])
            if crc_recv != crc16(raw[:-2]):
                raise ConnectionError("CRC mismatch on stream")
            ftype, drone_id, seq = raw[3], raw[4], struct.unpack("<H", raw[5:7])[0]
            frames.append(Frame(ftype, drone_id, seq, raw[HEADER_LEN:-2]))
        return frames


def parse_ack(payload: bytes) -> tuple[int, int]:
    """Returns (status, u32 value: sim ms for commands)."""
    (value,) = struct.unpack("<I", payload[1:5])
    return payload[0], value


def parse_announce(payload: bytes) -> tuple[int, list[int]]:
    return payload[0], list(payload[3: 3 + payload[2]])


def parse_height(payload: bytes) -> float:
    (value,) = struct.unpack("<d", payload)
    return value


def parse_telemetry_time_ms(payload: bytes) -> int:
    (t_ms,) = struct.unpack("<I", payload[0:4])
    return t_ms
