"""CLI contract tests: exit codes, frame-dump output, sim/replay round trip."""
from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

from blimpsim.cli import main

GOLDEN_CMD_UP_HEX = "42440110030100050001d0070000abd9"


def test_frame_dump_golden_cmd(capsys):
    assert main(["frame-dump", GOLDEN_CMD_UP_HEX]) == 0
    out = capsys.readouterr().out
    assert "CMD" in out
    assert "UP, 2000 ms" in out
    assert "drone_id  3" in out


def test_frame_dump_rejects_bad_hex(capsys):
    assert main(["frame-dump", "zz not hex"]) == 2


def test_frame_dump_rejects_corrupt_frame(capsys):
    corrupted = GOLDEN_CMD_UP_HEX[:-2] + "00"
    assert main(["frame-dump", corrupted]) == 2
    assert "CrcMismatch" in capsys.readouterr().err


def test_validate_arena_ok(tmp_path, capsys):
    from blimpsim.arena import DEFAULT_ARENA_DOC
    path = tmp_path / "arena.json"
    path.write_text(json.dumps(DEFAULT_ARENA_DOC))
    assert main(["validate-arena", str(path)]) == 0
    assert capsys.readouterr().out.startswith("OK")


def test_validate_arena_bad(tmp_path, capsys):
    path = tmp_path / "arena.json"
    path.write_text(json.dumps({
        "bounds": {"min": [0, 0, 0], "max": [10, 10, 3]},
        "hoops": [{"center": [5, 5, 1], "normal": [0, 0, 2], "radius": 0.5, "order": 0}],
    }))
    assert main(["validate-arena", str(path)]) == 2
    assert "unit" in capsys.readouterr().err


def test_validate_arena_missing_file():
    assert main(["validate-arena", "/nonexistent/arena.json"]) == 2


def test_sim_rejects_bad_config(tmp_path, capsys):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"ports": {"frames": 9000, "console": 9000}}))
    assert main(["sim", "--config", str(cfg), "--fast", "--duration", "1"]) == 2
    assert "ports" in capsys.readouterr().err


def test_sim_rejects_bad_arena_in_config(tmp_path, capsys):
    arena = tmp_path / "arena.json"
    arena.write_text(json.dumps({"bounds": {"min": [0, 0, 0], "max": [0, 0, 0]}}))
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"arena": str(arena)}))
    assert main(["sim", "--config", str(cfg), "--fast", "--duration", "1"]) == 2


def test_sim_port_busy_is_runtime_failure(tmp_path, capsys):
    import socket
    blocker = socket.socket()
    blocker.bind(("0.0.0.0", 0))
    port = blocker.getsockname()[1]
    blocker.listen(1)
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"ports": {"frames": port, "console": 0},
                               "runs_dir": str(tmp_path / "runs")}))
    try:
        assert main(["sim", "--config", str(cfg), "--fast", "--duration", "0.5"]) == 1
    finally:
        blocker.close()


def _run_sim(tmp_path, seconds="3", seed="5") -> dict:
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({
        "seed": int(seed),
        "drones": 2,
        "ports": {"frames": 0, "console": 0},
        "runs_dir": str(tmp_path / "runs"),
    }))
    log = tmp_path / "run.jsonl"
    proc = subprocess.run(
        [sys.executable, "-m", "blimpsim.cli", "sim", "--config", str(cfg),
         "--fast", "--duration", seconds, "--log", str(log)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    summary = json.loads(proc.stdout.strip().split("\n")[-1])
    return summary


def test_sim_then_replay_across_processes(tmp_path):
    summary = _run_sim(tmp_path)
    assert os.path.exists(summary["log"])
    assert summary["final_tick"] == 300

    proc = subprocess.run(
        [sys.executable, "-m", "blimpsim.cli", "replay", summary["log"]],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    result = json.loads(proc.stdout)
    assert result["match"] is True
    assert result["computed"] == summary["final_hash"]


def test_replay_expect_hash_mismatch_fails(tmp_path):
    summary = _run_sim(tmp_path)
    assert main(["replay", summary["log"], "--expect-hash", "0" * 16]) == 1


def test_replay_tampered_log_fails(tmp_path, capsys):
    summary = _run_sim(tmp_path)
    text = open(summary["log"]).read()
    tampered = tmp_path / "tampered.jsonl"
    # flip the recorded hash so the honest recompute cannot match
    tampered.write_text(text.replace(summary["final_hash"],
                                     "deadbeefdeadbeef"))
    assert main(["replay", str(tampered)]) == 1


def test_replay_wrong_version_distinct_exit(tmp_path, capsys):
    summary = _run_sim(tmp_path)
    lines = open(summary["log"]).read().strip().split("\n")
    header = json.loads(lines[0])
    header["version"] = 99
    lines[0] = json.dumps(header)
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines))
    assert main(["replay", str(bad)]) == 2  # invalid input, not runtime failure


def test_replay_missing_file():
    assert main(["replay", "/nonexistent.jsonl"]) == 2
