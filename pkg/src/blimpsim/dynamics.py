"""Buoyant-blimp rigid-body-lite dynamics: three actuation channels, linear drag.

World frame is right-handed, z up, heading measured from +x toward +y.
The lateral propeller thrusts along the heading; the vertical propeller along z;
the yaw channel applies torque about z. Integration is semi-implicit Euler at a
fixed step, so identical inputs give bit-identical trajectories.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .vec import Vec3, is_finite

TAU = 2.0 * math.pi


class StateCorruptionError(ValueError):
    """Raised when a state fed to the integrator contains non-finite values."""


@dataclass(frozen=True)
class ChannelThrust:
    """Per-channel actuation: vertical N, yaw N*m, lateral N."""

    vertical: float = 0.0
    yaw: float = 0.0
    lateral: float = 0.0


@dataclass(frozen=True)
class DroneState:
    position: Vec3 = (0.0, 0.0, 0.0)
    velocity: Vec3 = (0.0, 0.0, 0.0)
    heading: float = 0.0          # radians in [-pi, pi)
    yaw_rate: float = 0.0         # rad/s
    thrust: ChannelThrust = ChannelThrust()
    time: float = 0.0             # seconds since sim start


@dataclass(frozen=True)
class PhysicsParams:
    mass: float = 0.12                 # kg
    net_weight: float = 0.02           # N, weight minus buoyant lift (positive sinks)
    c_lin: float = 0.05                # N*s/m linear drag
    c_yaw: float = 0.004               # N*m*s/rad yaw drag
    i_z: float = 0.002                 # kg*m^2 yaw inertia
    max_vertical_thrust: float = 0.08  # N
    max_lateral_thrust: float = 0.06   # N
    max_yaw_torque: float = 0.002      # N*m
    dt: float = 0.01                   # s fixed step

    def __post_init__(self) -> None:
        for name in ("mass", "c_lin", "c_yaw", "i_z", "max_vertical_thrust",
                     "max_lateral_thrust", "max_yaw_torque", "dt"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.max_vertical_thrust > self.net_weight:
            raise ValueError("max_vertical_thrust must exceed net_weight for controllability")


def wrap_heading(angle: float) -> float:
    """Wrap to [-pi, pi); the result differs from `angle` by an exact multiple of 2*pi."""
    if -math.pi <= angle < math.pi:
        return angle
    return (angle + math.pi) % TAU - math.pi


def clamp_thrust(thrust: ChannelThrust, params: PhysicsParams) -> ChannelThrust:
    """Clamp each channel to its actuator limit."""
    def clip(x: float, lim: float) -> float:
        return -lim if x < -lim else lim if x > lim else x

    return ChannelThrust(
        vertical=clip(thrust.vertical, params.max_vertical_thrust),
        yaw=clip(thrust.yaw, params.max_yaw_torque),
        lateral=clip(thrust.lateral, params.max_lateral_thrust),
    )


def net_force(state: DroneState, params: PhysicsParams) -> Vec3:
    """Thrust (lateral along heading, vertical along z) minus net weight and drag."""
    fx = state.thrust.lateral * math.cos(state.heading) - params.c_lin * state.velocity[0]
    fy = state.thrust.lateral * math.sin(state.heading) - params.c_lin * state.velocity[1]
    fz = state.thrust.vertical - params.net_weight - params.c_lin * state.velocity[2]
    return (fx, fy, fz)


def step(state: DroneState, params: PhysicsParams) -> DroneState:
    """Advance one fixed step: velocities from forces, then pose from new velocities.

    The ground at z=0 is an inelastic clamp: z is held at 0 and any downward
    vertical velocity is zeroed on contact.
    """
    if not (is_finite(state.position) and is_finite(state.velocity)
            and math.isfinite(state.heading) and math.isfinite(state.yaw_rate)
            and math.isfinite(state.thrust.vertical) and math.isfinite(state.thrust.yaw)
            and math.isfinite(state.thrust.lateral)):
        raise StateCorruptionError("non-finite drone state")

    dt = params.dt
    fx, fy, fz = net_force(state, params)
    vx = state.velocity[0] + fx / params.mass * dt
    vy = state.velocity[1] + fy / params.mass * dt
    vz = state.velocity[2] + fz / params.mass * dt

    torque = state.thrust.yaw - params.c_yaw * state.yaw_rate
    yaw_rate = state.yaw_rate + torque / params.i_z * dt

    x = state.position[0] + vx * dt
    y = state.position[1] + vy * dt
    z = state.position[2] + vz * dt
    if z < 0.0:
        z = 0.0
        vz = 0.0
    heading = wrap_heading(state.heading + yaw_rate * dt)

    return replace(
        state,
        position=(x, y, z),
        velocity=(vx, vy, vz),
        heading=heading,
        yaw_rate=yaw_rate,
        time=state.time + dt,
    )
