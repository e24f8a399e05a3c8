"""Operator command line: run the gateway, replay logs, validate, inspect.

Exit codes are a stable contract for classroom scripting:
0 success, 1 runtime failure, 2 invalid input.
"""
from __future__ import annotations

import argparse
import json
import sys

from .arena import ArenaError, validate_arena
from .config import ConfigError, load_config
from .protocol import (
    FrameError,
    FrameType,
    decode_ack_payload,
    decode_command_payload,
    decode_frame,
    decode_height_resp_payload,
    decode_telemetry_payload,
)
from .replay import ReplayError, HeaderMismatch, load_replay_log
from .world import replay_world

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _err(message: str) -> None:
    print(message, file=sys.stderr)


def cmd_sim(args: argparse.Namespace) -> int:
    try:
        config = load_config(
            args.config,
            seed=args.seed,
            drones=args.drones,
            frames_port=args.frames_port,
            console_port=args.console_port,
            real_time=not args.fast,
        )
    except ConfigError as e:
        for line in e.errors:
            _err(f"config error: {line}")
        return EXIT_INVALID

    max_ticks = None
    if args.duration is not None:
        if args.duration <= 0:
            _err("config error: --duration must be positive")
            return EXIT_INVALID
        max_ticks = round(args.duration / config.physics.dt)

    from .gateway import Gateway  # deferred: sim is the only networked subcommand

    try:
        gw = Gateway(config, log_path=args.log, max_ticks=max_ticks)
    except OSError as e:
        _err(f"cannot open replay log: {e}")
        return EXIT_RUNTIME
    try:
        gw.start()
    except OSError as e:
        _err(f"cannot bind ports {config.frames_port}/{config.console_port}: {e}")
        gw.stop()
        return EXIT_RUNTIME
    _err(f"gateway up: frames port {gw.frames_port}, console port {gw.console_port}, "
         f"{config.drones} drones, seed {config.seed}"
         + (f", duration {args.duration}s" if args.duration else ""))
    try:
        gw.join()
    except KeyboardInterrupt:
        _err("interrupted")
    finally:
        gw.stop()
    print(json.dumps({"log": gw.log_path, "final_tick": gw.world.tick,
                      "final_hash": gw.final_hash}))
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        log = load_replay_log(args.log)
    except OSError as e:
        _err(f"cannot read log: {e}")
        return EXIT_INVALID
    except HeaderMismatch as e:
        _err(f"header mismatch: {e}")
        return EXIT_INVALID
    except ReplayError as e:
        _err(f"bad log: {e}")
        return EXIT_INVALID

    expected = args.expect_hash or log.final_hash
    if expected is None:
        _err("log has no recorded final hash; pass --expect-hash")
        return EXIT_INVALID
    try:
        computed, world = replay_world(log)
    except (KeyError, TypeError, ValueError) as e:
        _err(f"bad log: {e}")
        return EXIT_INVALID
    print(json.dumps({"final_tick": world.tick, "computed": computed,
                      "expected": expected, "match": computed == expected}))
    if computed != expected:
        _err("replay hash mismatch")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_validate_arena(args: argparse.Namespace) -> int:
    try:
        with open(args.file, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as e:
        _err(f"cannot read arena: {e}")
        return EXIT_INVALID
    except json.JSONDecodeError as e:
        _err(f"arena is not valid JSON: {e}")
        return EXIT_INVALID
    try:
        arena = validate_arena(doc)
    except ArenaError as e:
        for line in e.errors:
            _err(f"arena error: {line}")
        return EXIT_INVALID
    print(f"OK: {len(arena.hoops)} hoops, {len(arena.obstacles)} obstacles, "
          f"{len(arena.spawns)} spawns")
    return EXIT_OK


def cmd_frame_dump(args: argparse.Namespace) -> int:
    try:
        raw = bytes.fromhex(args.hex.replace(" ", ""))
    except ValueError:
        _err("not valid hex input")
        return EXIT_INVALID
    try:
        frame = decode_frame(raw)
    except FrameError as e:
        _err(f"{type(e).__name__}: {e}")
        return EXIT_INVALID
    print(f"type      {frame.ftype.name} ({frame.ftype:#04x})")
    print(f"drone_id  {frame.drone_id}")
    print(f"seq       {frame.seq}")
    print(f"payload   {len(frame.payload)} bytes: {frame.payload.hex() or '-'}")
    if frame.ftype == FrameType.CMD:
        try:
            opcode, duration_ms = decode_command_payload(frame.payload)
            detail = opcode.name if duration_ms is None else f"{opcode.name}, {duration_ms} ms"
            print(f"command   {detail}")
        except ValueError as e:
            print(f"command   malformed: {e}")
    elif frame.ftype == FrameType.ACK:
        status, t_ms = decode_ack_payload(frame.payload)
        print(f"ack       {status.name}, t={t_ms} ms")
    elif frame.ftype == FrameType.HEIGHT_RESP:
        print(f"height    {decode_height_resp_payload(frame.payload):.2f} m")
    elif frame.ftype == FrameType.TELEMETRY:
        rec = decode_telemetry_payload(frame.drone_id, frame.payload)
        print(f"telemetry t={rec.t:.2f}s pos=({rec.position[0]:.2f}, {rec.position[1]:.2f}, "
              f"{rec.position[2]:.2f}) heading={rec.heading:.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blimpsim",
                                     description="Classroom blimp-drone ground station")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_sim = sub.add_parser("sim", help="run the gateway and simulator")
    p_sim.add_argument("--config", default=None, help="config JSON path")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--drones", type=int, default=None)
    p_sim.add_argument("--frames-port", type=int, default=None, dest="frames_port")
    p_sim.add_argument("--console-port", type=int, default=None, dest="console_port")
    pace = p_sim.add_mutually_exclusive_group()
    pace.add_argument("--real-time", action="store_true", default=None,
                      help="pace the loop to wall clock (default)")
    pace.add_argument("--fast", action="store_true",
                      help="run unpaced (CI / headless)")
    p_sim.add_argument("--duration", type=float, default=None,
                       help="stop after this many sim seconds")
    p_sim.add_argument("--log", default=None, help="replay log path (default runs/...)")
    p_sim.set_defaults(func=cmd_sim)

    p_replay = sub.add_parser("replay", help="re-run a replay log and check its hash")
    p_replay.add_argument("log")
    p_replay.add_argument("--expect-hash", default=None)
    p_replay.set_defaults(func=cmd_replay)

    p_validate = sub.add_parser("validate-arena", help="check an arena JSON document")
    p_validate.add_argument("file")
    p_validate.set_defaults(func=cmd_validate_arena)

    p_dump = sub.add_parser("frame-dump", help="decode a hex-encoded wire frame")
    p_dump.add_argument("hex")
    p_dump.set_defaults(func=cmd_frame_dump)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
