"""Drone-side executive: timed command channels, altitude hold, height sensor.

Each command occupies exactly one actuation channel and preempts whatever was
active there. OFF stops everything except altitude stabilization, which
re-engages at the current altitude. Time is tracked in integer physics ticks
so command windows are exact (no float accumulation).
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum

from .dynamics import ChannelThrust, DroneState, PhysicsParams
from .protocol import AckStatus, Opcode

MAX_DURATION_MS = 60_000
INTEGRAL_LIMIT = 0.05      # N, hard clamp on the integral term
ANTI_WINDUP_GAIN = 1.0     # 1/s, back-calculation tracking gain


class Channel(Enum):
    VERTICAL = "vertical"
    YAW = "yaw"
    LATERAL = "lateral"


OPCODE_CHANNEL = {
    Opcode.UP: Channel.VERTICAL,
    Opcode.DOWN: Channel.VERTICAL,
    Opcode.FORWARD: Channel.LATERAL,
    Opcode.BACKWARD: Channel.LATERAL,
    Opcode.TURN_LEFT: Channel.YAW,
    Opcode.TURN_RIGHT: Channel.YAW,
}


@dataclass(frozen=True)
class TimedCommand:
    opcode: Opcode
    duration_ms: int | None = None  # None only for OFF
    seq: int = 0


@dataclass
class ActiveCommand:
    opcode: Opcode
    expires_tick: int  # half-open: active while now_tick < expires_tick


@dataclass
class AltitudeHold:
    """PI-D loop holding z at target; derivative acts on measured climb rate."""

    target_z: float = 0.0
    kp: float = 0.6    # N/m
    ki: float = 0.05   # N/(m*s)
    kd: float = 0.8    # N*s/m
    integral: float = 0.0  # accumulated integral term, N, clamped to +-INTEGRAL_LIMIT
    engaged: bool = True

    def output(self, z: float, vz: float, dt: float, max_thrust: float) -> float:
        error = self.target_z - z
        # back-calculation anti-windup: bleed the integral toward whatever keeps
        # the raw output inside the [0, max_thrust] clamp, then hard-clamp it
        u_pre = self.kp * error + self.integral - self.kd * vz
        u_clamped = 0.0 if u_pre < 0.0 else max_thrust if u_pre > max_thrust else u_pre
        self.integral += (self.ki * error + ANTI_WINDUP_GAIN * (u_clamped - u_pre)) * dt
        if self.integral > INTEGRAL_LIMIT:
            self.integral = INTEGRAL_LIMIT
        elif self.integral < -INTEGRAL_LIMIT:
            self.integral = -INTEGRAL_LIMIT
        u = self.kp * error + self.integral - self.kd * vz
        return 0.0 if u < 0.0 else max_thrust if u > max_thrust else u


class DroneExecutive:
    """Owns the three command channels and the altitude hold for one drone."""

    def __init__(
        self,
        drone_id: int,
        params: PhysicsParams,
        *,
        hold: AltitudeHold | None = None,
        height_quantum: float = 0.01,
        height_noise_sd: float = 0.0,
        rng: random.Random | None = None,
        initial_z: float = 0.0,
    ) -> None:
        self.drone_id = drone_id
        self.params = params
        self.hold = hold if hold is not None else AltitudeHold(target_z=initial_z)
        self.height_quantum = height_quantum
        self.height_noise_sd = height_noise_sd
        self.rng = rng if rng is not None else random.Random(0)
        self.channels: dict[Channel, ActiveCommand | None] = {
            Channel.VERTICAL: None,
            Channel.YAW: None,
            Channel.LATERAL: None,
        }
        self._last_z = initial_z

    def enqueue(self, cmd: TimedCommand, now_tick: int) -> AckStatus:
        """Accept a timed command; preempts any active command on its channel."""
        if cmd.opcode == Opcode.OFF:
            self.channels[Channel.VERTICAL] = None
            self.channels[Channel.YAW] = None
            self.channels[Channel.LATERAL] = None
            self.hold.engaged = True
            self.hold.target_z = self._last_z
            return AckStatus.OK
        channel = OPCODE_CHANNEL.get(cmd.opcode)
        if channel is None:
            return AckStatus.NACK_UNKNOWN_OPCODE
        if cmd.duration_ms is None or not 0 < cmd.duration_ms <= MAX_DURATION_MS:
            return AckStatus.NACK_BOUNDS
        # sub-half-step durations still occupy the channel for one tick
        ticks = max(1, round(cmd.duration_ms / (self.params.dt * 1000.0)))
        self.channels[channel] = ActiveCommand(cmd.opcode, now_tick + ticks)
        if channel is Channel.VERTICAL:
            self.hold.engaged = False
        return AckStatus.OK

    def tick(self, state: DroneState, now_tick: int, apply_hold: bool = True) -> ChannelThrust:
        """Per-step thrust resolution; call exactly once per physics step.

        apply_hold=False skips the altitude-hold controller entirely (no
        integral update) for callers that override vertical control.
        """
        self._last_z = state.position[2]
        for channel, active in self.channels.items():
            if active is not None and now_tick >= active.expires_tick:
                self.channels[channel] = None
                if channel is Channel.VERTICAL:
                    # hold re-engages at the altitude reached when the command ran out
                    self.hold.engaged = True
                    self.hold.target_z = state.position[2]

        p = self.params
        vertical = 0.0
        active = self.channels[Channel.VERTICAL]
        if active is not None:
            vertical = p.max_vertical_thrust if active.opcode == Opcode.UP else -p.max_vertical_thrust
        elif self.hold.engaged and apply_hold:
            vertical = self.hold.output(state.position[2], state.velocity[2], p.dt, p.max_vertical_thrust)

        yaw = 0.0
        active = self.channels[Channel.YAW]
        if active is not None:
            # clockwise viewed from above = negative torque about +z
            yaw = p.max_yaw_torque if active.opcode == Opcode.TURN_LEFT else -p.max_yaw_torque

        lateral = 0.0
        active = self.channels[Channel.LATERAL]
        if active is not None:
            lateral = p.max_lateral_thrust if active.opcode == Opcode.FORWARD else -p.max_lateral_thrust

        return ChannelThrust(vertical=vertical, yaw=yaw, lateral=lateral)

    def active_opcodes(self) -> tuple[int, int, int]:
        """Wire encoding of channel occupancy: active opcode per channel, 0 = idle."""
        return tuple(
            (self.channels[ch].opcode if self.channels[ch] else 0)
            for ch in (Channel.VERTICAL, Channel.YAW, Channel.LATERAL)
        )  # type: ignore[return-value]

    def read_height(self, state: DroneState) -> float:
        """Quantized downward-ranger reading; draws noise from the drone's RNG stream."""
        return read_height(state, self.height_quantum, self.height_noise_sd, self.rng)


def read_height(state: DroneState, quantum: float, noise_sd: float, rng: random.Random) -> float:
    if quantum <= 0.0:
        raise ValueError("quantum must be positive")
    z = state.position[2]
    if noise_sd > 0.0:
        z += rng.gauss(0.0, noise_sd)
    return quantize_height(z, quantum)


def quantize_height(z: float, quantum: float) -> float:
    """Noise-free sensor quantization; safe for reporting paths (no RNG draw)."""
    reading = math.floor(z / quantum) * quantum
    return reading if reading > 0.0 else 0.0
