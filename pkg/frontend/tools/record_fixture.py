"""Record a real gateway console stream into tests/fixtures/stream.json.

Runs a scripted race against a live (fast-mode) gateway: an operator session
records every JSON message it receives while a pilot session flies drone 0
through a two-hoop course, goes stationary with off(), then finishes. The
recorded stream drives the console's zero-authority replay test.

Usage: python tools/record_fixture.py   (from the frontend/ directory;
requires the blimpsim package installed)
"""
from __future__ import annotations

import json
import os
import sys
import tempfile
import time

from blimpsim import ws
from blimpsim.config import load_config
from blimpsim.gateway import Gateway

ARENA = {
    "bounds": {"min": [-6.0, -4.0, 0.0], "max": [6.0, 4.0, 3.0]},
    "hoops": [
        {"center": [-2.0, 0.0, 1.0], "normal": [1.0, 0.0, 0.0], "radius": 0.9, "order": 0},
        {"center": [2.0, 0.0, 1.0], "normal": [1.0, 0.0, 0.0], "radius": 0.9, "order": 1},
    ],
    "obstacles": [{"min": [-0.5, 1.0, 0.0], "max": [0.5, 2.0, 2.0]}],
    "spawns": [{"position": [-5.0, 0.0, 1.0], "heading": 0.0},
               {"position": [-5.0, 2.5, 1.0], "heading": 0.0}],
}

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures", "stream.json")


class Recorder:
    """Records the stream, decimating telemetry so the fixture stays small."""

    def __init__(self, port: int, role: str, telemetry_keep_every: int = 10):
        self.conn = ws.connect("127.0.0.1", port)
        self.messages: list[dict] = []
        self.telemetry_keep_every = telemetry_keep_every
        self._telemetry_count = 0
        self.send({"type": "hello", "role": role, "subscribe": True})

    def send(self, doc: dict) -> None:
        self.conn.send_text(json.dumps(doc))

    def pump_until(self, predicate, timeout: float = 60.0) -> dict:
        self.conn.sock.settimeout(timeout)
        while True:
            text = self.conn.recv_text()
            if text is None:
                raise ConnectionError("channel closed")
            doc = json.loads(text)
            if doc["type"] == "telemetry":
                self._telemetry_count += 1
                if self._telemetry_count % self.telemetry_keep_every == 0:
                    self.messages.append(doc)
            else:
                self.messages.append(doc)
            if predicate(doc):
                return doc


def main() -> int:
    workdir = tempfile.mkdtemp()
    cfg = load_config(None, frames_port=0, console_port=0, real_time=False, drones=2,
                      runs_dir=os.path.join(workdir, "runs"), arena_doc=ARENA)
    gw = Gateway(cfg, log_path=os.path.join(workdir, "run.jsonl"))
    gw.start()
    try:
        operator = Recorder(gw.console_port, "operator")
        operator.pump_until(lambda m: m["type"] == "welcome")

        pilot = Recorder(gw.console_port, "pilot")
        pilot.pump_until(lambda m: m["type"] == "welcome")
        pilot.send({"type": "attach", "drone_id": 0})
        pilot.pump_until(lambda m: m["type"] == "attach_result")

        operator.send({"type": "race", "verb": "arm"})
        operator.pump_until(lambda m: m["type"] == "race_state" and m["active"])

        pilot.send({"type": "cmd", "drone_id": 0, "op": "forward", "duration_ms": 12000})
        pilot.pump_until(lambda m: m["type"] == "ack")

        # operator sees both crossings, the finish, and the leaderboard push
        operator.pump_until(lambda m: m["type"] == "race_event" and m["finished"])
        operator.pump_until(lambda m: m["type"] == "leaderboard")

        # stationary check material: stop the drone, then collect telemetry
        # at full rate so the settling is visible in the fixture
        pilot.send({"type": "cmd", "drone_id": 0, "op": "off"})
        pilot.pump_until(lambda m: m["type"] == "ack")
        time.sleep(0.1)
        operator.telemetry_keep_every = 1
        seen = 0

        def count_telemetry(m: dict) -> bool:
            nonlocal seen
            if m["type"] == "telemetry":
                seen += 1
            return seen >= 40

        operator.pump_until(count_telemetry)
        operator.telemetry_keep_every = 50
        operator.send({"type": "leaderboard"})
        operator.pump_until(lambda m: m["type"] == "leaderboard")

        os.makedirs(os.path.dirname(OUT), exist_ok=True)
        with open(OUT, "w", encoding="utf-8") as f:
            json.dump(operator.messages, f)
        print(f"recorded {len(operator.messages)} messages -> {OUT}")
        operator.conn.close()
        pilot.conn.close()
    finally:
        gw.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
