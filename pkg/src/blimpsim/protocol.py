"""Binary wire protocol: framing, CRC-16 integrity, sequence tracking, payload codecs.

Frame layout (all multi-byte fields little-endian):

    offset  size  field
    0       2     magic 0x42 0x44 ("BD")
    2       1     version (0x01)
    3       1     frame type
    4       1     drone id
    5       2     sequence number
    7       2     payload length (<= 512)
    9       n     payload
    9+n     2     CRC-16/CCITT-FALSE over bytes [0, 9+n)

The full byte-level contract, including per-type payload layouts, lives in
protocol.md at the repository root.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

MAGIC = b"\x42\x44"
VERSION = 0x01
HEADER_LEN = 9
CRC_LEN = 2
MAX_PAYLOAD = 512


class FrameType(IntEnum):
    CMD = 0x10
    ACK = 0x11
    TELEMETRY = 0x20
    PEER = 0x30
    DISCOVER = 0x40
    ANNOUNCE = 0x41
    HEIGHT_REQ = 0x50
    HEIGHT_RESP = 0x51


class Opcode(IntEnum):
    UP = 0x01
    DOWN = 0x02
    FORWARD = 0x03
    BACKWARD = 0x04
    TURN_LEFT = 0x05
    TURN_RIGHT = 0x06
    OFF = 0x07


class AckStatus(IntEnum):
    OK = 0x00
    DUPLICATE = 0x01
    NACK_BOUNDS = 0x02
    NACK_UNKNOWN_OPCODE = 0x03
    NOT_PILOT = 0x04
    UNKNOWN_DRONE = 0x05
    STALE_SEQ = 0x06


class FrameError(Exception):
    """Base for all framing violations."""


class MagicMismatch(FrameError):
    pass


class VersionUnsupported(FrameError):
    pass


class LengthOverrun(FrameError):
    pass


class CrcMismatch(FrameError):
    pass


class UnknownType(FrameError):
    pass


def _build_crc_table(poly: int = 0x1021) -> tuple[int, ...]:
    table = []
    for i in range(256):
        crc = i << 8
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _build_crc_table()


def crc16(data: bytes, init: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xor-out."""
    crc = init
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ b) & 0xFF]
    return crc


@dataclass(frozen=True)
class Frame:
    ftype: FrameType
    drone_id: int
    seq: int
    payload: bytes = b""


def encode_frame(frame: Frame) -> bytes:
    if len(frame.payload) > MAX_PAYLOAD:
        raise LengthOverrun(f"payload {len(frame.payload)} exceeds {MAX_PAYLOAD} bytes")
    body = MAGIC + struct.pack(
        "<BBBHH", VERSION, frame.ftype, frame.drone_id, frame.seq, len(frame.payload)
    ) + frame.payload
    return body + struct.pack("<H", crc16(body))


def decode_frame(buf: bytes) -> Frame:
    """Decode exactly one frame; the buffer must contain the frame and nothing else."""
    if len(buf) < HEADER_LEN:
        raise LengthOverrun(f"buffer {len(buf)} shorter than {HEADER_LEN}-byte header")
    if buf[0:2] != MAGIC:
        raise MagicMismatch(f"bad magic {buf[0]:02x} {buf[1]:02x}")
    if buf[2] != VERSION:
        raise VersionUnsupported(f"version {buf[2]:#04x}")
    ftype_raw, drone_id, seq, payload_len = struct.unpack("<BBHH", buf[3:9])
    if payload_len > MAX_PAYLOAD:
        raise LengthOverrun(f"payload_len {payload_len} exceeds {MAX_PAYLOAD}")
    total = HEADER_LEN + payload_len + CRC_LEN
    if len(buf) != total:
        raise LengthOverrun(f"buffer {len(buf)} != framed length {total}")
    (crc_recv,) = struct.unpack("<H", buf[total - CRC_LEN:total])
    crc_calc = crc16(buf[: total - CRC_LEN])
    if crc_recv != crc_calc:
        raise CrcMismatch(f"crc {crc_recv:#06x} != {crc_calc:#06x}")
    try:
        ftype = FrameType(ftype_raw)
    except ValueError:
        raise UnknownType(f"frame type {ftype_raw:#04x}") from None
    return Frame(ftype, drone_id, seq, bytes(buf[HEADER_LEN: HEADER_LEN + payload_len]))


class Deframer:
    """Incremental frame extractor for a reliable byte stream.

    feed() returns complete frames and keeps the remainder buffered. Any
    framing violation raises; a corrupted reliable stream is not resynced.
    """

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Frame]:
        self._buf.extend(data)
        frames: list[Frame] = []
        while len(self._buf) >= HEADER_LEN:
            (payload_len,) = struct.unpack("<H", self._buf[7:9])
            if payload_len > MAX_PAYLOAD:
                raise LengthOverrun(f"payload_len {payload_len} exceeds {MAX_PAYLOAD}")
            total = HEADER_LEN + payload_len + CRC_LEN
            if len(self._buf) < total:
                break
            frames.append(decode_frame(bytes(self._buf[:total])))
            del self._buf[:total]
        return frames


# --- sequence acceptance ------------------------------------------------------

SEQ_MODULUS = 1 << 16
SEQ_WINDOW = 1024


class SeqResult(IntEnum):
    ACCEPT = 0
    DUPLICATE = 1
    STALE = 2


@dataclass
class SeqTracker:
    """Monotone-with-wraparound sequence acceptance per (drone_id, class)."""

    last: dict[tuple[int, str], int] = field(default_factory=dict)

    def accept(self, drone_id: int, klass: str, seq: int) -> SeqResult:
        key = (drone_id, klass)
        prev = self.last.get(key)
        if prev is None:
            self.last[key] = seq
            return SeqResult.ACCEPT
        ahead = (seq - prev) % SEQ_MODULUS
        if ahead == 0:
            return SeqResult.DUPLICATE
        if ahead <= SEQ_WINDOW:
            self.last[key] = seq
            return SeqResult.ACCEPT
        return SeqResult.STALE


# --- payload codecs -----------------------------------------------------------

def encode_command_payload(opcode: Opcode, duration_ms: int | None) -> bytes:
    """CMD payload: opcode byte, then duration as u32 ms (absent for OFF)."""
    if opcode == Opcode.OFF:
        return bytes([opcode])
    if duration_ms is None:
        raise ValueError(f"{opcode.name} requires a duration")
    return bytes([opcode]) + struct.pack("<I", duration_ms)


def decode_command_payload(payload: bytes) -> tuple[Opcode, int | None]:
    if len(payload) < 1:
        raise ValueError("empty CMD payload")
    try:
        opcode = Opcode(payload[0])
    except ValueError:
        raise ValueError(f"unknown opcode {payload[0]:#04x}") from None
    if opcode == Opcode.OFF:
        if len(payload) != 1:
            raise ValueError("OFF carries no duration")
        return opcode, None
    if len(payload) != 5:
        raise ValueError(f"CMD payload length {len(payload)} != 5")
    (duration_ms,) = struct.unpack("<I", payload[1:5])
    return opcode, duration_ms


def encode_ack_payload(status: AckStatus, t_ms: int) -> bytes:
    """ACK payload: status byte + sim time (u32 ms) the ack was produced at."""
    return bytes([status]) + struct.pack("<I", t_ms)


def decode_ack_payload(payload: bytes) -> tuple[AckStatus, int]:
    if len(payload) != 5:
        raise ValueError(f"ACK payload length {len(payload)} != 5")
    (t_ms,) = struct.unpack("<I", payload[1:5])
    return AckStatus(payload[0]), t_ms


@dataclass(frozen=True)
class TelemetryRecord:
    """Per-drone state snapshot as carried on the wire (f32 precision)."""

    drone_id: int
    t: float                      # sim seconds
    position: tuple[float, float, float]
    velocity: tuple[float, float, float]
    heading: float
    yaw_rate: float
    height: float                 # quantized height-sensor reading
    channels: tuple[int, int, int]  # active opcode per (vertical, yaw, lateral), 0 = idle


_TELEMETRY_FMT = "<I3f3ffffBBB"


def encode_telemetry_payload(rec: TelemetryRecord) -> bytes:
    return struct.pack(
        _TELEMETRY_FMT,
        round(rec.t * 1000),
        *rec.position,
        *rec.velocity,
        rec.heading,
        rec.yaw_rate,
        rec.height,
        *rec.channels,
    )


def decode_telemetry_payload(drone_id: int, payload: bytes) -> TelemetryRecord:
    vals = struct.unpack(_TELEMETRY_FMT, payload)
    return TelemetryRecord(
        drone_id=drone_id,
        t=vals[0] / 1000.0,
        position=(vals[1], vals[2], vals[3]),
        velocity=(vals[4], vals[5], vals[6]),
        heading=vals[7],
        yaw_rate=vals[8],
        height=vals[9],
        channels=(vals[10], vals[11], vals[12]),
    )


PEER_SNAPSHOT_TAG = 0x01


def encode_peer_snapshot_payload(
    position: tuple[float, float, float],
    velocity: tuple[float, float, float],
    t_ms: int,
) -> bytes:
    """PEER flocking payload: tag 0x01 + f32 pos x3 + f32 vel x3 + u32 sim-time ms."""
    return bytes([PEER_SNAPSHOT_TAG]) + struct.pack("<6fI", *position, *velocity, t_ms)


def decode_peer_snapshot_payload(payload: bytes) -> tuple[
    tuple[float, float, float], tuple[float, float, float], int
]:
    if len(payload) != 29 or payload[0] != PEER_SNAPSHOT_TAG:
        raise ValueError("not a peer snapshot payload")
    vals = struct.unpack("<6fI", payload[1:])
    return (vals[0], vals[1], vals[2]), (vals[3], vals[4], vals[5]), vals[6]


def encode_height_resp_payload(height_m: float) -> bytes:
    return struct.pack("<d", height_m)


def decode_height_resp_payload(payload: bytes) -> float:
    (height_m,) = struct.unpack("<d", payload)
    return height_m


class DiscoverIntent(IntEnum):
    ENUMERATE = 0x00
    ATTACH_PILOT = 0x01
    SUBSCRIBE = 0x02


def encode_discover_payload(intent: int) -> bytes:
    """DISCOVER payload: single intent byte; empty payload means ENUMERATE."""
    return bytes([intent]) if intent else b""


def decode_discover_payload(payload: bytes) -> int:
    if len(payload) == 0:
        return 0
    return payload[0]


def encode_announce_payload(status: AckStatus, drone_ids: list[int]) -> bytes:
    """ANNOUNCE payload: status byte, protocol version, drone count, drone ids."""
    return bytes([status, VERSION, len(drone_ids), *drone_ids])


def decode_announce_payload(payload: bytes) -> tuple[AckStatus, list[int]]:
    if len(payload) < 3 or len(payload) != 3 + payload[2]:
        raise ValueError("malformed ANNOUNCE payload")
    return AckStatus(payload[0]), list(payload[3: 3 + payload[2]])
