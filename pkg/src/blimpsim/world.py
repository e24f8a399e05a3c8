"""The simulated world: drones, arena, scheduled network events, replay hooks.

One loop owns all state and advances it in fixed integer ticks. Network
effects (command latency, peer loss/delay) are scheduled in sim time from a
seeded stream, so a run is fully determined by (seed, params, arena, inputs).
Socket I/O lives in gateway.py; this module never blocks.
"""
from __future__ import annotations

import hashlib
import heapq
import itertools
import random
import struct
from dataclasses import asdict, dataclass, replace
from typing import IO, Callable

from . import dynamics
from .arena import (
    Arena,
    CourseProgress,
    DEFAULT_ARENA_DOC,
    arena_hash,
    resolve_collision,
    update_progress,
    validate_arena,
)
from .dynamics import ChannelThrust, DroneState, PhysicsParams, clamp_thrust
from .flocking import FlockParams, PeerSnapshot, avoidance_accel, flock_accel, flock_to_channels
from .protocol import (
    AckStatus,
    Opcode,
    TelemetryRecord,
    decode_peer_snapshot_payload,
    encode_peer_snapshot_payload,
)
from .replay import ReplayLog
from .runtime import Channel, DroneExecutive, TimedCommand, quantize_height
from .vec import add, clamp_norm

PEER_BROADCAST_PERIOD = 5  # physics steps between flock snapshot broadcasts


class UnknownDroneError(KeyError):
    pass


@dataclass(frozen=True)
class LinkParams:
    """Gateway link model: fixed per-hop latency; Bernoulli loss on PEER frames only."""

    latency_ms: float = 20.0
    loss_prob: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss_prob must be in [0, 1]")
        if self.latency_ms < 0.0:
            raise ValueError("latency_ms must be non-negative")


LOSSY_PRESET = LinkParams(latency_ms=50.0, loss_prob=0.1)


class DroneSim:
    """One drone's state bundle inside the world."""

    def __init__(self, drone_id: int, state: DroneState, executive: DroneExecutive) -> None:
        self.id = drone_id
        self.state = state
        self.executive = executive
        self.flock_on = False
        self.peers: dict[int, PeerSnapshot] = {}
        self.progress = CourseProgress()


AckReply = Callable[[AckStatus, int], None]
HeightReply = Callable[[float], None]
TelemetrySink = Callable[[list[TelemetryRecord]], None]
RaceEventSink = Callable[[int, int, float, bool], None]  # drone, hoop order, t, finished
PeerDeliverySink = Callable[[int, int, bytes], None]     # src, dst, payload


class World:
    def __init__(
        self,
        *,
        physics: PhysicsParams | None = None,
        arena_doc: dict | None = None,
        seed: int = 0,
        n_drones: int = 1,
        link: LinkParams | None = None,
        flock: FlockParams | None = None,
        height_quantum: float = 0.01,
        height_noise_sd: float = 0.0,
        log_sink: IO[str] | None = None,
        enable_log: bool = True,
        on_telemetry: TelemetrySink | None = None,
        on_race_event: RaceEventSink | None = None,
        on_peer_delivery: PeerDeliverySink | None = None,
    ) -> None:
        self.physics = physics if physics is not None else PhysicsParams()
        self.arena_doc = arena_doc if arena_doc is not None else DEFAULT_ARENA_DOC
        self.arena: Arena = validate_arena(self.arena_doc)
        self.seed = seed
        self.link = link if link is not None else LinkParams()
        self.flock = flock if flock is not None else FlockParams()
        self.height_quantum = height_quantum
        self.height_noise_sd = height_noise_sd
        self.tick = 0
        self.on_telemetry = on_telemetry
        self.on_race_event = on_race_event
        self.on_peer_delivery = on_peer_delivery

        self.telemetry_period = max(1, round(0.05 / self.physics.dt))
        self._latency_ticks = round(self.link.latency_ms / 1000.0 / self.physics.dt)
        self._link_rng = random.Random(f"{seed}:link")
        self._event_order = itertools.count()
        self._events: list[tuple[int, int, tuple]] = []  # (deliver_tick, order, event)

        self.drones: dict[int, DroneSim] = {}
        spawns = self.arena.spawns
        for i in range(n_drones):
            if spawns:
                spawn = spawns[i % len(spawns)]
                state = DroneState(position=spawn.position, heading=spawn.heading)
            else:
                state = DroneState(position=(0.0, float(i), 1.0))
            executive = DroneExecutive(
                i,
                self.physics,
                height_quantum=height_quantum,
                height_noise_sd=height_noise_sd,
                rng=random.Random(f"{seed}:height:{i}"),
                initial_z=state.position[2],
            )
            self.drones[i] = DroneSim(i, state, executive)

        self.log: ReplayLog | None = None
        if enable_log:
            self.log = ReplayLog.create(self._header(), sink=log_sink)

    def _header(self) -> dict:
        return {
            "seed": self.seed,
            "physics": asdict(self.physics),
            "link": asdict(self.link),
            "flock": asdict(self.flock),
            "n_drones": len(self.drones),
            "height_quantum": self.height_quantum,
            "height_noise_sd": self.height_noise_sd,
            "arena": self.arena_doc,
            "arena_hash": arena_hash(self.arena_doc),
        }

    # --- input injection (the only way the outside world mutates state) ---------

    def _drone(self, drone_id: int) -> DroneSim:
        drone = self.drones.get(drone_id)
        if drone is None:
            raise UnknownDroneError(drone_id)
        return drone

    def _schedule(self, deliver_tick: int, event: tuple) -> None:
        heapq.heappush(self._events, (deliver_tick, next(self._event_order), event))

    def inject_command(
        self,
        drone_id: int,
        opcode: Opcode,
        duration_ms: int | None,
        seq: int = 0,
        reply: AckReply | None = None,
        record: bool = True,
    ) -> None:
        """Validate-free scheduling: the executive acks/nacks at delivery time."""
        self._drone(drone_id)
        if record and self.log is not None:
            self.log.record({
                "kind": "cmd", "tick": self.tick, "drone": drone_id,
                "op": opcode.name, "duration_ms": duration_ms, "seq": seq,
            })
        cmd = TimedCommand(opcode, duration_ms, seq)
        self._schedule(self.tick + self._latency_ticks, ("cmd", drone_id, cmd, reply))

    def inject_height_req(
        self, drone_id: int, reply: HeightReply | None = None, record: bool = True
    ) -> None:
        self._drone(drone_id)
        if record and self.log is not None:
            self.log.record({"kind": "height", "tick": self.tick, "drone": drone_id})
        self._schedule(self.tick + self._latency_ticks, ("height", drone_id, reply))

    def set_flock(self, drone_id: int, on: bool, record: bool = True) -> None:
        drone = self._drone(drone_id)
        if record and self.log is not None:
            self.log.record({"kind": "flock", "tick": self.tick, "drone": drone_id, "on": on})
        drone.flock_on = on
        if not on:
            # hand control back to the hold at wherever flocking left the drone
            exec_ = drone.executive
            if exec_.channels[Channel.VERTICAL] is None:
                exec_.hold.engaged = True
                exec_.hold.target_z = drone.state.position[2]

    def relay_peer(
        self, src: int, dst: int | None, payload: bytes, record: bool = True
    ) -> int:
        """Relay a PEER payload; each copy is independently delayed and lossy.

        Returns how many copies passed the loss draw. Broadcast (dst=None)
        excludes the sender. Recipients are processed in ascending drone id so
        the seeded loss stream is replayable.
        """
        self._drone(src)
        if dst is not None:
            self._drone(dst)
            recipients = [dst]
        else:
            recipients = [i for i in sorted(self.drones) if i != src]
        if record and self.log is not None:
            self.log.record({
                "kind": "peer", "tick": self.tick, "src": src,
                "dst": dst, "payload": payload.hex(),
            })
        delivered = 0
        for recipient in recipients:
            if self.link.loss_prob > 0.0 and self._link_rng.random() < self.link.loss_prob:
                continue
            delivered += 1
            self._schedule(self.tick + self._latency_ticks, ("peer", src, recipient, payload))
        return delivered

    def reset_progress(self) -> None:
        for drone in self.drones.values():
            drone.progress = CourseProgress()

    # --- stepping ----------------------------------------------------------------

    def _deliver_due(self) -> None:
        while self._events and self._events[0][0] <= self.tick:
            _, _, event = heapq.heappop(self._events)
            kind = event[0]
            if kind == "cmd":
                _, drone_id, cmd, reply = event
                drone = self.drones[drone_id]
                status = drone.executive.enqueue(cmd, self.tick)
                if reply is not None:
                    reply(status, round(drone.state.time * 1000))
            elif kind == "peer":
                _, src, recipient, payload = event
                drone = self.drones[recipient]
                try:
                    position, velocity, t_ms = decode_peer_snapshot_payload(payload)
                except ValueError:
                    # non-snapshot peer traffic is student data: hand it outward
                    if self.on_peer_delivery is not None:
                        self.on_peer_delivery(src, recipient, payload)
                    continue
                drone.peers[src] = PeerSnapshot(
                    drone_id=src,
                    position=position,
                    velocity=velocity,
                    stamped=t_ms / 1000.0,
                    received=drone.state.time,
                )
            elif kind == "height":
                _, drone_id, reply = event
                drone = self.drones[drone_id]
                value = drone.executive.read_height(drone.state)
                if reply is not None:
                    reply(value)

    def _flock_thrust(self, drone: DroneSim) -> ChannelThrust:
        now = drone.state.time
        me = PeerSnapshot(
            drone_id=drone.id,
            position=drone.state.position,
            velocity=drone.state.velocity,
            stamped=now,
            received=now,
        )
        neighbors = list(drone.peers.values())
        accel = add(
            flock_accel(me, neighbors, self.flock),
            avoidance_accel(me, neighbors, self.flock),
        )
        accel = clamp_norm(accel, self.flock.max_accel)
        # hover feedforward: flocking should not have to fight the net weight
        accel = add(accel, (0.0, 0.0, self.physics.net_weight / self.physics.mass))
        return flock_to_channels(accel, drone.state, self.physics)

    def step(self) -> None:
        self._deliver_due()

        if self.tick % PEER_BROADCAST_PERIOD == 0:
            for drone_id in sorted(self.drones):
                drone = self.drones[drone_id]
                if drone.flock_on:
                    payload = encode_peer_snapshot_payload(
                        drone.state.position,
                        drone.state.velocity,
                        round(drone.state.time * 1000),
                    )
                    self.relay_peer(drone_id, None, payload, record=False)

        for drone_id in sorted(self.drones):
            drone = self.drones[drone_id]
            exec_thrust = drone.executive.tick(
                drone.state, self.tick, apply_hold=not drone.flock_on
            )
            thrust = self._flock_thrust(drone) if drone.flock_on else exec_thrust
            state = replace(drone.state, thrust=clamp_thrust(thrust, self.physics))
            prev_position = state.position
            state = dynamics.step(state, self.physics)
            position, velocity, _ = resolve_collision(state.position, state.velocity, self.arena)
            if position != state.position or velocity != state.velocity:
                state = replace(state, position=position, velocity=velocity)
            drone.state = state

            before = drone.progress.next_hoop
            update_progress(drone.progress, prev_position, state.position, state.time,
                            self.arena.hoops)
            if drone.progress.next_hoop != before and self.on_race_event is not None:
                hoop_order = drone.progress.crossings[-1][0]
                self.on_race_event(drone_id, hoop_order, state.time, drone.progress.finished)

        self.tick += 1
        if self.tick % self.telemetry_period == 0 and self.on_telemetry is not None:
            self.on_telemetry(self.telemetry_snapshot())

    def run(self, n_ticks: int) -> None:
        for _ in range(n_ticks):
            self.step()

    def run_until(self, tick: int) -> None:
        while self.tick < tick:
            self.step()

    # --- observation ---------------------------------------------------------------

    def telemetry_snapshot(self) -> list[TelemetryRecord]:
        # height here is the noise-free quantized value: telemetry is a derived
        # output and must not consume the drone's seeded sensor stream
        records = []
        for drone_id in sorted(self.drones):
            drone = self.drones[drone_id]
            records.append(TelemetryRecord(
                drone_id=drone_id,
                t=drone.state.time,
                position=drone.state.position,
                velocity=drone.state.velocity,
                heading=drone.state.heading,
                yaw_rate=drone.state.yaw_rate,
                height=quantize_height(drone.state.position[2], self.height_quantum),
                channels=drone.executive.active_opcodes(),
            ))
        return records

    def state_hash(self) -> str:
        """64-bit digest of all drone physical state plus the tick counter."""
        h = hashlib.blake2b(digest_size=8)
        h.update(struct.pack("<Q", self.tick))
        for drone_id in sorted(self.drones):
            s = self.drones[drone_id].state
            h.update(struct.pack("<B", drone_id))
            h.update(struct.pack(
                "<12d",
                *s.position, *s.velocity, s.heading, s.yaw_rate,
                s.thrust.vertical, s.thrust.yaw, s.thrust.lateral, s.time,
            ))
        return h.hexdigest()

    def finalize_log(self) -> str:
        digest = self.state_hash()
        if self.log is not None:
            self.log.finalize(self.tick, digest)
        return digest


# --- replay ------------------------------------------------------------------------


def world_from_header(header: dict, **overrides) -> World:
    return World(
        physics=PhysicsParams(**header["physics"]),
        arena_doc=header["arena"],
        seed=header["seed"],
        n_drones=header["n_drones"],
        link=LinkParams(**header["link"]),
        flock=FlockParams(**header["flock"]),
        height_quantum=header["height_quantum"],
        height_noise_sd=header["height_noise_sd"],
        enable_log=False,
        **overrides,
    )


def replay_world(log: ReplayLog, until_tick: int | None = None) -> tuple[str, World]:
    """Re-run a recorded log in a fresh world; returns (final state hash, world)."""
    world = world_from_header(log.header)
    final_tick = until_tick if until_tick is not None else log.final_tick
    if final_tick is None:
        final_tick = log.records[-1]["tick"] + 1 if log.records else 0
    for rec in log.records:
        world.run_until(rec["tick"])
        kind = rec["kind"]
        if kind == "cmd":
            world.inject_command(
                rec["drone"], Opcode[rec["op"]], rec["duration_ms"], rec.get("seq", 0),
                record=False,
            )
        elif kind == "peer":
            world.relay_peer(rec["src"], rec["dst"], bytes.fromhex(rec["payload"]),
                             record=False)
        elif kind == "flock":
            world.set_flock(rec["drone"], rec["on"], record=False)
        elif kind == "height":
            world.inject_height_req(rec["drone"], record=False)
    world.run_until(final_tick)
    return world.state_hash(), world
