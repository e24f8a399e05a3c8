"""Arena geometry: hoop traversal, bounds/obstacle collision, course progress.

Arenas are loaded from JSON documents (schema in arena.md); units are meters
in a z-up right-handed frame. Hoops are flat discs crossed in order-index
order; obstacles and the arena bounds are axis-aligned boxes. The drone is a
0.15 m sphere for collision purposes.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

from .vec import Vec3, dist, dot, sub

DRONE_RADIUS = 0.15
UNIT_NORMAL_TOL = 1e-9
RIM_TOL = 1e-9  # tangent crossings within this of the rim count as a miss

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class Hoop:
    center: Vec3
    normal: Vec3  # unit
    radius: float
    order: int


@dataclass(frozen=True)
class Box:
    lo: Vec3
    hi: Vec3

    def contains(self, p: Vec3, margin: float = 0.0) -> bool:
        return all(self.lo[i] + margin <= p[i] <= self.hi[i] - margin for i in range(3))

    def closest_point(self, p: Vec3) -> Vec3:
        return tuple(min(max(p[i], self.lo[i]), self.hi[i]) for i in range(3))  # type: ignore[return-value]


@dataclass(frozen=True)
class Spawn:
    position: Vec3
    heading: float = 0.0


@dataclass(frozen=True)
class Arena:
    bounds: Box
    hoops: tuple[Hoop, ...]      # sorted by order index
    obstacles: tuple[Box, ...]
    spawns: tuple[Spawn, ...]


@dataclass(frozen=True)
class Contact:
    surface: str   # e.g. "bounds:z_max", "obstacle[1]"
    normal: Vec3   # outward from the surface, into allowed space


class ArenaError(ValueError):
    """Arena document failed validation; .errors lists every violation."""

    def __init__(self, errors: list[str]) -> None:
        super().__init__("; ".join(errors))
        self.errors = errors


def segment_crosses_hoop(p0: Vec3, p1: Vec3, hoop: Hoop) -> Vec3 | None:
    """Point where segment p0->p1 crosses the hoop disc, or None.

    Requires a strict sign change of the plane distance (direction-agnostic),
    and the crossing point strictly inside the rim; tangent hits are misses.
    """
    d0 = dot(sub(p0, hoop.center), hoop.normal)
    d1 = dot(sub(p1, hoop.center), hoop.normal)
    if not ((d0 < 0.0 < d1) or (d1 < 0.0 < d0)):
        return None
    t = d0 / (d0 - d1)
    crossing = (
        p0[0] + t * (p1[0] - p0[0]),
        p0[1] + t * (p1[1] - p0[1]),
        p0[2] + t * (p1[2] - p0[2]),
    )
    off_center = dist(crossing, hoop.center)
    if off_center >= hoop.radius - RIM_TOL:
        return None
    return crossing


@dataclass
class CourseProgress:
    next_hoop: int = 0
    start_t: float | None = None
    finish_t: float | None = None
    crossings: list[tuple[int, float]] = field(default_factory=list)

    @property
    def finished(self) -> bool:
        return self.finish_t is not None

    def trial_time(self) -> float | None:
        if self.start_t is None or self.finish_t is None:
            return None
        return self.finish_t - self.start_t


def update_progress(
    progress: CourseProgress, p0: Vec3, p1: Vec3, t: float, hoops: tuple[Hoop, ...]
) -> CourseProgress:
    """Advance progress iff the segment crosses the next in-order hoop at time t."""
    if progress.next_hoop >= len(hoops) or p0 == p1:
        return progress
    hoop = hoops[progress.next_hoop]
    if segment_crosses_hoop(p0, p1, hoop) is None:
        return progress
    if progress.next_hoop == 0:
        progress.start_t = t
    progress.crossings.append((hoop.order, t))
    progress.next_hoop += 1
    if progress.next_hoop == len(hoops):
        progress.finish_t = t
    return progress


def check_collision(position: Vec3, arena: Arena, radius: float = DRONE_RADIUS) -> list[Contact]:
    """Surfaces the drone sphere currently penetrates."""
    contacts: list[Contact] = []
    for i in range(3):
        if position[i] - radius < arena.bounds.lo[i]:
            n = tuple(1.0 if j == i else 0.0 for j in range(3))
            contacts.append(Contact(f"bounds:{AXES[i]}_min", n))  # type: ignore[arg-type]
        if position[i] + radius > arena.bounds.hi[i]:
            n = tuple(-1.0 if j == i else 0.0 for j in range(3))
            contacts.append(Contact(f"bounds:{AXES[i]}_max", n))  # type: ignore[arg-type]
    for idx, box in enumerate(arena.obstacles):
        closest = box.closest_point(position)
        if dist(position, closest) < radius:
            contacts.append(Contact(f"obstacle[{idx}]", _obstacle_normal(position, box)))
    return contacts


def _obstacle_normal(position: Vec3, box: Box) -> Vec3:
    """Outward normal of the nearest obstacle face (faces only; ties pick lowest axis)."""
    closest = box.closest_point(position)
    d = sub(position, closest)
    n = math.sqrt(dot(d, d))
    if n > 0.0:
        return (d[0] / n, d[1] / n, d[2] / n)
    # center inside the box: push out through the shallowest face
    best_axis, best_sign, best_depth = 0, 1.0, math.inf
    for i in range(3):
        for sign, depth in ((-1.0, position[i] - box.lo[i]), (1.0, box.hi[i] - position[i])):
            if depth < best_depth:
                best_axis, best_sign, best_depth = i, sign, depth
    return tuple(best_sign if j == best_axis else 0.0 for j in range(3))  # type: ignore[return-value]


def resolve_collision(
    position: Vec3, velocity: Vec3, arena: Arena, radius: float = DRONE_RADIUS
) -> tuple[Vec3, Vec3, list[Contact]]:
    """Clamp the drone onto penetrated surfaces and zero inward velocity components.

    Obstacles are resolved first, then bounds, so the result always lies inside
    the arena bounds.
    """
    contacts = check_collision(position, arena, radius)
    if not contacts:
        return position, velocity, contacts
    px, py, pz = position
    vx, vy, vz = velocity
    for contact in contacts:
        if contact.surface.startswith("bounds"):
            continue
        nx, ny, nz = contact.normal
        box = arena.obstacles[int(contact.surface[len("obstacle["):-1])]
        closest = box.closest_point((px, py, pz))
        depth = radius - dist((px, py, pz), closest)
        if depth > 0.0:
            px, py, pz = px + nx * depth, py + ny * depth, pz + nz * depth
        inward = vx * nx + vy * ny + vz * nz
        if inward < 0.0:
            vx, vy, vz = vx - inward * nx, vy - inward * ny, vz - inward * nz
    lo, hi = arena.bounds.lo, arena.bounds.hi
    pos = [px, py, pz]
    vel = [vx, vy, vz]
    for i in range(3):
        if pos[i] - radius < lo[i]:
            pos[i] = lo[i] + radius
            if vel[i] < 0.0:
                vel[i] = 0.0
        elif pos[i] + radius > hi[i]:
            pos[i] = hi[i] - radius
            if vel[i] > 0.0:
                vel[i] = 0.0
    return tuple(pos), tuple(vel), contacts  # type: ignore[return-value]


# --- document validation --------------------------------------------------------

def _as_vec3(value: object, label: str, errors: list[str]) -> Vec3 | None:
    if (not isinstance(value, (list, tuple)) or len(value) != 3
            or not all(isinstance(v, (int, float)) and math.isfinite(v) for v in value)):
        errors.append(f"{label}: expected 3 finite numbers")
        return None
    return (float(value[0]), float(value[1]), float(value[2]))


def validate_arena(document: dict) -> Arena:
    """Build an Arena from a JSON document, raising ArenaError with every violation."""
    errors: list[str] = []
    if not isinstance(document, dict):
        raise ArenaError(["document must be a JSON object"])

    bounds = None
    bdoc = document.get("bounds")
    if not isinstance(bdoc, dict):
        errors.append("bounds: missing or not an object")
    else:
        lo = _as_vec3(bdoc.get("min"), "bounds.min", errors)
        hi = _as_vec3(bdoc.get("max"), "bounds.max", errors)
        if lo and hi:
            if all(lo[i] < hi[i] for i in range(3)):
                bounds = Box(lo, hi)
            else:
                errors.append("bounds: min must be strictly below max on every axis")

    hoops: list[Hoop] = []
    for i, hdoc in enumerate(document.get("hoops", [])):
        if not isinstance(hdoc, dict):
            errors.append(f"hoops[{i}]: expected an object")
            continue
        center = _as_vec3(hdoc.get("center"), f"hoops[{i}].center", errors)
        normal = _as_vec3(hdoc.get("normal"), f"hoops[{i}].normal", errors)
        radius = hdoc.get("radius")
        order = hdoc.get("order")
        if normal is not None and abs(math.sqrt(dot(normal, normal)) - 1.0) > UNIT_NORMAL_TOL:
            errors.append(f"hoops[{i}].normal: not a unit vector")
            normal = None
        if not isinstance(radius, (int, float)) or not radius > 0.0:
            errors.append(f"hoops[{i}].radius: must be positive")
            radius = None
        if not isinstance(order, int) or order < 0:
            errors.append(f"hoops[{i}].order: must be a non-negative integer")
            order = None
        if center is not None and normal is not None and radius is not None and order is not None:
            hoops.append(Hoop(center, normal, float(radius), order))
    orders = [h.order for h in hoops]
    if len(set(orders)) != len(orders):
        errors.append("hoops: duplicate order index")
    elif orders and sorted(orders) != list(range(len(orders))):
        errors.append("hoops: order indices must be dense from 0")

    obstacles: list[Box] = []
    for i, odoc in enumerate(document.get("obstacles", [])):
        if not isinstance(odoc, dict):
            errors.append(f"obstacles[{i}]: expected an object")
            continue
        lo = _as_vec3(odoc.get("min"), f"obstacles[{i}].min", errors)
        hi = _as_vec3(odoc.get("max"), f"obstacles[{i}].max", errors)
        if lo and hi:
            if all(lo[j] < hi[j] for j in range(3)):
                obstacles.append(Box(lo, hi))
            else:
                errors.append(f"obstacles[{i}]: min must be strictly below max on every axis")

    spawns: list[Spawn] = []
    for i, sdoc in enumerate(document.get("spawns", [])):
        if not isinstance(sdoc, dict):
            errors.append(f"spawns[{i}]: expected an object")
            continue
        pos = _as_vec3(sdoc.get("position"), f"spawns[{i}].position", errors)
        heading = sdoc.get("heading", 0.0)
        if not isinstance(heading, (int, float)) or not math.isfinite(heading):
            errors.append(f"spawns[{i}].heading: must be a finite number")
            heading = 0.0
        if pos is not None:
            if bounds is not None and not bounds.contains(pos):
                errors.append(f"spawns[{i}]: position outside bounds")
            else:
                spawns.append(Spawn(pos, float(heading)))

    if errors:
        raise ArenaError(errors)
    if bounds is None:
        raise ArenaError(["bounds: missing"])
    return Arena(
        bounds=bounds,
        hoops=tuple(sorted(hoops, key=lambda h: h.order)),
        obstacles=tuple(obstacles),
        spawns=tuple(spawns),
    )


def arena_hash(document: dict) -> str:
    """Stable 64-bit hash of the arena document, for replay-log headers."""
    blob = json.dumps(document, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.blake2b(blob, digest_size=8).hexdigest()


def load_arena(path: str) -> tuple[Arena, dict]:
    with open(path, encoding="utf-8") as f:
        document = json.load(f)
    return validate_arena(document), document


DEFAULT_ARENA_DOC: dict = {
    "bounds": {"min": [-6.0, -4.0, 0.0], "max": [6.0, 4.0, 3.0]},
    "hoops": [
        {"center": [-2.0, 0.0, 1.5], "normal": [1.0, 0.0, 0.0], "radius": 0.5, "order": 0},
        {"center": [2.0, 1.0, 1.2], "normal": [0.0, 1.0, 0.0], "radius": 0.5, "order": 1},
        {"center": [4.0, -1.0, 1.5], "normal": [1.0, 0.0, 0.0], "radius": 0.5, "order": 2},
    ],
    "obstacles": [
        {"min": [-0.5, -2.5, 0.0], "max": [0.5, -1.5, 2.0]},
    ],
    "spawns": [
        {"position": [-5.0, 0.0, 1.0], "heading": 0.0},
        {"position": [-5.0, 1.0, 1.0], "heading": 0.0},
        {"position": [-5.0, -1.0, 1.0], "heading": 0.0},
        {"position": [-5.0, 2.0, 1.0], "heading": 0.0},
        {"position": [-5.0, -2.0, 1.0], "heading": 0.0},
    ],
}


def default_arena() -> Arena:
    return validate_arena(DEFAULT_ARENA_DOC)
