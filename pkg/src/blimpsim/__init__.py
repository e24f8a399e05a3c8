"""Ground station and deterministic simulator for classroom helium-blimp drones."""

from .dynamics import ChannelThrust, DroneState, PhysicsParams, step, wrap_heading
from .protocol import Frame, FrameType, Opcode, crc16, decode_frame, encode_frame
from .runtime import AltitudeHold, DroneExecutive, TimedCommand
from .world import LinkParams, World

__version__ = "0.1.0"

__all__ = [
    "AltitudeHold",
    "ChannelThrust",
    "DroneExecutive",
    "DroneState",
    "Frame",
    "FrameType",
    "LinkParams",
    "Opcode",
    "PhysicsParams",
    "TimedCommand",
    "World",
    "crc16",
    "decode_frame",
    "encode_frame",
    "step",
    "wrap_heading",
    "__version__",
]
