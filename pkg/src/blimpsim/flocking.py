"""Boids coordination and closest-point-of-approach avoidance, per drone.

Each drone computes its own commands from peer state snapshots relayed over
the lossy channel, never from ground truth, so latency and packet loss show
up in the behavior. Tie-breaks are keyed by drone id to keep replays exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import ChannelThrust, DroneState, PhysicsParams, wrap_heading
from .vec import Vec3, ZERO, add, clamp_norm, dist, dot, norm, scale, sub

SNAPSHOT_TTL = 1.0       # s; older peer snapshots contribute nothing
COINCIDENT_EPS = 1e-6    # m; below this separation the push direction is undefined
COINCIDENT_PUSH = 1e6    # separation kernel magnitude used at coincidence (~1/eps)
HEAD_ON_EPS = 1e-9       # m; predicted miss below this counts as exactly head-on
YAW_GAIN = 0.01          # N*m per rad of heading error toward the commanded azimuth


@dataclass(frozen=True)
class FlockParams:
    k_coh: float = 0.4
    k_sep: float = 1.2
    k_ali: float = 0.6
    r_neigh: float = 3.0        # m
    r_sep: float = 1.0          # m, must not exceed r_neigh
    safety_radius: float = 0.3  # m
    max_accel: float = 0.5      # m/s^2 command clamp

    def __post_init__(self) -> None:
        if not (self.r_neigh > 0.0 and self.r_sep > 0.0 and self.safety_radius > 0.0):
            raise ValueError("radii must be positive")
        if self.r_sep > self.r_neigh:
            raise ValueError("r_sep must not exceed r_neigh")
        if min(self.k_coh, self.k_sep, self.k_ali) < 0.0 or self.max_accel <= 0.0:
            raise ValueError("weights must be non-negative and max_accel positive")


@dataclass(frozen=True)
class PeerSnapshot:
    drone_id: int
    position: Vec3
    velocity: Vec3
    stamped: float   # sim time at the sender
    received: float  # sim time at the receiver, >= stamped


def is_fresh(snapshot: PeerSnapshot, now: float) -> bool:
    return now - snapshot.stamped <= SNAPSHOT_TTL


def _separation_term(me: PeerSnapshot, other: PeerSnapshot) -> Vec3:
    d = sub(me.position, other.position)
    r = norm(d)
    if r < COINCIDENT_EPS:
        # deterministic tie-break: lowest id pushes -x, the other +x
        sign = -1.0 if me.drone_id < other.drone_id else 1.0
        return (sign * COINCIDENT_PUSH, 0.0, 0.0)
    return scale(d, 1.0 / (r * r))


def flock_accel(me: PeerSnapshot, neighbors: list[PeerSnapshot], params: FlockParams) -> Vec3:
    """Cohesion + separation + alignment acceleration, clamped to max_accel.

    Staleness and the neighbor radius are enforced here (against me.received
    as "now"), so stale or distant snapshots contribute nothing. The cohesion
    centroid includes the drone itself.
    """
    now = me.received
    near = [
        s for s in neighbors
        if s.drone_id != me.drone_id and is_fresh(s, now)
        and dist(s.position, me.position) <= params.r_neigh
    ]
    if not near:
        return ZERO

    centroid = me.position
    mean_v = me.velocity
    for s in near:
        centroid = add(centroid, s.position)
        mean_v = add(mean_v, s.velocity)
    inv = 1.0 / (len(near) + 1)
    cohesion = sub(scale(centroid, inv), me.position)

    separation = ZERO
    for s in near:
        if dist(s.position, me.position) < params.r_sep:
            separation = add(separation, _separation_term(me, s))

    alignment = sub(scale(mean_v, inv), me.velocity)

    total = add(
        add(scale(cohesion, params.k_coh), scale(separation, params.k_sep)),
        scale(alignment, params.k_ali),
    )
    return clamp_norm(total, params.max_accel)


def avoidance_accel(
    me: PeerSnapshot,
    others: list[PeerSnapshot],
    params: FlockParams,
    horizon: float = 3.0,
) -> Vec3:
    """Repulsion away from predicted closest approaches within the horizon.

    For each fresh peer, the time of closest approach under constant velocities
    is clamped to [0, horizon]; a predicted miss distance under twice the
    safety radius adds acceleration along the predicted separation direction,
    scaled by how deep the miss is. An exactly head-on encounter breaks the tie
    laterally: the lower drone id dodges +y, the higher -y.
    """
    now = me.received
    total = ZERO
    two_r = 2.0 * params.safety_radius
    for other in others:
        if other.drone_id == me.drone_id or not is_fresh(other, now):
            continue
        dp = sub(me.position, other.position)
        dv = sub(me.velocity, other.velocity)
        dv2 = dot(dv, dv)
        t_star = 0.0 if dv2 == 0.0 else -dot(dp, dv) / dv2
        if t_star < 0.0:
            t_star = 0.0
        elif t_star > horizon:
            t_star = horizon
        miss = add(dp, scale(dv, t_star))
        d_min = norm(miss)
        if d_min >= two_r:
            continue
        magnitude = params.max_accel * (1.0 - d_min / two_r)
        if d_min < HEAD_ON_EPS:
            direction = (0.0, 1.0 if me.drone_id < other.drone_id else -1.0, 0.0)
        else:
            direction = scale(miss, 1.0 / d_min)
        total = add(total, scale(direction, magnitude))
    return clamp_norm(total, params.max_accel)


def flock_to_channels(accel: Vec3, state: DroneState, params: PhysicsParams) -> ChannelThrust:
    """Map a desired acceleration onto the three actuation channels.

    The z component becomes vertical thrust directly; the horizontal component
    is split into along-heading lateral thrust plus yaw torque that steers the
    heading toward the commanded azimuth (wrap-aware, so it always takes the
    shorter turn). All channels are clamped to the actuator limits.
    """
    def clip(x: float, lim: float) -> float:
        return -lim if x < -lim else lim if x > lim else x

    vertical = clip(params.mass * accel[2], params.max_vertical_thrust)

    ax, ay = accel[0], accel[1]
    horizontal = math.hypot(ax, ay)
    if horizontal < 1e-12:
        return ChannelThrust(vertical=vertical, yaw=0.0, lateral=0.0)

    along = ax * math.cos(state.heading) + ay * math.sin(state.heading)
    lateral = clip(params.mass * along, params.max_lateral_thrust)

    heading_error = wrap_heading(math.atan2(ay, ax) - state.heading)
    yaw = clip(YAW_GAIN * heading_error, params.max_yaw_torque)
    return ChannelThrust(vertical=vertical, yaw=yaw, lateral=lateral)
