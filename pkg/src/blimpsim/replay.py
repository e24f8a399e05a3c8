"""Replay log: line-delimited JSON recording every exogenous input to a run.

First line is the header (seed, physics, link, flock, arena document), then
one record per input in injection order with its sim tick, and finally a
final_hash record. Feeding the records back into a fresh world reproduces the
run bit-exactly; the hash contract is documented in replay.md.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterator

LOG_VERSION = 1

INPUT_KINDS = ("cmd", "peer", "flock", "height")


class ReplayError(Exception):
    pass


class HeaderMismatch(ReplayError):
    """Log header does not match this binary's replay format version."""


class NonMonotonicTime(ReplayError):
    """Record ticks must be non-decreasing."""


@dataclass
class ReplayLog:
    header: dict
    records: list[dict] = field(default_factory=list)
    final_hash: str | None = None
    final_tick: int | None = None
    _sink: IO[str] | None = None

    @classmethod
    def create(cls, header: dict, sink: IO[str] | None = None) -> "ReplayLog":
        header = {"kind": "header", "version": LOG_VERSION, **header}
        log = cls(header=header, _sink=sink)
        if sink is not None:
            sink.write(json.dumps(header, sort_keys=True) + "\n")
            sink.flush()
        return log

    def record(self, rec: dict) -> None:
        if self.records and rec["tick"] < self.records[-1]["tick"]:
            raise NonMonotonicTime(f"tick {rec['tick']} after {self.records[-1]['tick']}")
        self.records.append(rec)
        if self._sink is not None:
            self._sink.write(json.dumps(rec, sort_keys=True) + "\n")
            self._sink.flush()

    def finalize(self, tick: int, state_hash: str) -> None:
        self.final_hash = state_hash
        self.final_tick = tick
        if self._sink is not None:
            rec = {"kind": "final_hash", "tick": tick, "hash": state_hash}
            self._sink.write(json.dumps(rec, sort_keys=True) + "\n")
            self._sink.flush()


def load_replay_log(path: str) -> ReplayLog:
    """Parse and validate a replay log file."""
    with open(path, encoding="utf-8") as f:
        return parse_replay_log(f)


def parse_replay_log(lines: Iterator[str]) -> ReplayLog:
    header: dict | None = None
    records: list[dict] = []
    final_hash: str | None = None
    final_tick: int | None = None
    last_tick = -1
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise ReplayError(f"line {lineno}: invalid JSON ({e})") from None
        kind = rec.get("kind")
        if header is None:
            if kind != "header":
                raise HeaderMismatch(f"line {lineno}: first record must be the header")
            if rec.get("version") != LOG_VERSION:
                raise HeaderMismatch(
                    f"log version {rec.get('version')} != supported {LOG_VERSION}"
                )
            header = rec
            continue
        if kind == "final_hash":
            final_hash = rec["hash"]
            final_tick = rec["tick"]
            continue
        if kind not in INPUT_KINDS:
            raise ReplayError(f"line {lineno}: unknown record kind {kind!r}")
        tick = rec.get("tick")
        if not isinstance(tick, int) or tick < 0:
            raise ReplayError(f"line {lineno}: bad tick {tick!r}")
        if tick < last_tick:
            raise NonMonotonicTime(f"line {lineno}: tick {tick} after {last_tick}")
        last_tick = tick
        records.append(rec)
    if header is None:
        raise HeaderMismatch("empty log")
    return ReplayLog(header=header, records=records, final_hash=final_hash,
                     final_tick=final_tick)
