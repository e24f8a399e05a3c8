"""Gateway configuration: one JSON document plus CLI overrides."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .arena import DEFAULT_ARENA_DOC, ArenaError, validate_arena
from .dynamics import PhysicsParams
from .flocking import FlockParams
from .world import LinkParams

DEFAULT_FRAMES_PORT = 7787
DEFAULT_CONSOLE_PORT = 7788


class ConfigError(ValueError):
    def __init__(self, errors: list[str]) -> None:
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass
class GatewayConfig:
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    link: LinkParams = field(default_factory=LinkParams)
    flock: FlockParams = field(default_factory=FlockParams)
    seed: int = 0
    drones: int = 3
    frames_port: int = DEFAULT_FRAMES_PORT
    console_port: int = DEFAULT_CONSOLE_PORT
    arena_doc: dict = field(default_factory=lambda: DEFAULT_ARENA_DOC)
    height_quantum: float = 0.01
    height_noise_sd: float = 0.0
    runs_dir: str = "runs"
    real_time: bool = True


def load_config(path: str | None = None, **overrides) -> GatewayConfig:
    """Build a validated config from an optional JSON file and keyword overrides.

    Overrides win over the file; unknown keys and invalid values are collected
    into a single ConfigError.
    """
    errors: list[str] = []
    doc: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as f:
                doc = json.load(f)
        except OSError as e:
            raise ConfigError([f"cannot read config: {e}"]) from None
        except json.JSONDecodeError as e:
            raise ConfigError([f"config is not valid JSON: {e}"]) from None
        if not isinstance(doc, dict):
            raise ConfigError(["config root must be a JSON object"])

    known = {"physics", "link", "flock", "seed", "drones", "ports", "arena",
             "height_quantum", "height_noise_sd", "runs_dir"}
    for key in doc:
        if key not in known:
            errors.append(f"unknown config key {key!r}")

    def section(name: str, cls, default):
        value = doc.get(name)
        if value is None:
            return default
        if not isinstance(value, dict):
            errors.append(f"{name}: expected an object")
            return default
        try:
            return cls(**value)
        except (TypeError, ValueError) as e:
            errors.append(f"{name}: {e}")
            return default

    physics = section("physics", PhysicsParams, PhysicsParams())
    link = section("link", LinkParams, LinkParams())
    flock = section("flock", FlockParams, FlockParams())

    cfg = GatewayConfig(physics=physics, link=link, flock=flock)

    if "seed" in doc:
        if isinstance(doc["seed"], int):
            cfg.seed = doc["seed"]
        else:
            errors.append("seed: expected an integer")
    if "drones" in doc:
        if isinstance(doc["drones"], int):
            cfg.drones = doc["drones"]
        else:
            errors.append("drones: expected an integer")
    ports = doc.get("ports", {})
    if not isinstance(ports, dict):
        errors.append("ports: expected an object")
    else:
        cfg.frames_port = ports.get("frames", cfg.frames_port)
        cfg.console_port = ports.get("console", cfg.console_port)
    for key in ("height_quantum", "height_noise_sd"):
        if key in doc:
            if isinstance(doc[key], (int, float)):
                setattr(cfg, key, float(doc[key]))
            else:
                errors.append(f"{key}: expected a number")
    if "runs_dir" in doc:
        cfg.runs_dir = str(doc["runs_dir"])

    arena_ref = doc.get("arena")
    if isinstance(arena_ref, str):
        try:
            with open(arena_ref, encoding="utf-8") as f:
                cfg.arena_doc = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            errors.append(f"arena: cannot load {arena_ref!r}: {e}")
    elif isinstance(arena_ref, dict):
        cfg.arena_doc = arena_ref
    elif arena_ref is not None:
        errors.append("arena: expected a path or an inline object")

    for key, value in overrides.items():
        if value is None:
            continue
        if not hasattr(cfg, key):
            errors.append(f"unknown override {key!r}")
            continue
        setattr(cfg, key, value)

    if not 1 <= cfg.drones <= 250:
        errors.append("drones: must be between 1 and 250")
    # port 0 asks the OS for an ephemeral port, so two zeros cannot collide
    if cfg.frames_port == cfg.console_port and cfg.frames_port != 0:
        errors.append("ports: frames and console ports must differ")
    for name in ("frames_port", "console_port"):
        port = getattr(cfg, name)
        if not (isinstance(port, int) and 0 <= port < 65536):
            errors.append(f"{name}: invalid port {port!r}")
    try:
        validate_arena(cfg.arena_doc)
    except ArenaError as e:
        errors.extend(f"arena: {msg}" for msg in e.errors)

    if errors:
        raise ConfigError(errors)
    return cfg
