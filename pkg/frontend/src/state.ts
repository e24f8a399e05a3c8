// Console state: a reducer over gateway messages and pure view-model
// selectors. Zero authority lives here by construction: every number the
// view model exposes is copied from a received message, never derived from
// local physics or local clocks (wall time is used only to detect a stale
// channel).

import type {
  ArenaDoc,
  DroneTelemetry,
  LeaderboardRow,
  Role,
  ServerMessage,
} from './messages.js';

export const TELEMETRY_RING_SECONDS = 10;
export const STALE_CHANNEL_MS = 2000;
const TOAST_LIMIT = 6;

export interface TelemetrySample extends DroneTelemetry {
  t: number;
}

export interface Split {
  raceId: number;
  droneId: number;
  hoop: number;
  t: number;
  finished: boolean;
}

export interface Toast {
  kind: 'ack' | 'nack' | 'error' | 'info';
  text: string;
}

export class ConsoleStore {
  sessionId: string | null = null;
  role: Role = 'observer';
  drones: number[] = [];
  arena: ArenaDoc | null = null;
  telemetryHz = 20;

  latest = new Map<number, TelemetrySample>();
  history = new Map<number, TelemetrySample[]>();  // ring, TELEMETRY_RING_SECONDS
  lastSimT: number | null = null;
  lastMessageWallMs: number | null = null;
  connected = false;

  raceActive = false;
  raceId: number | null = null;
  splits: Split[] = [];
  leaderboard: LeaderboardRow[] = [];
  attached = new Set<number>();
  toasts: Toast[] = [];
  heights = new Map<number, number>();

  reduce(msg: ServerMessage, wallMs: number): void {
    this.lastMessageWallMs = wallMs;
    switch (msg.type) {
      case 'welcome':
        this.sessionId = msg.session_id;
        this.role = msg.role;
        this.drones = msg.drones.slice();
        this.arena = msg.arena;
        this.telemetryHz = msg.telemetry_hz;
        this.raceActive = msg.race_active;
        this.connected = true;
        break;
      case 'telemetry':
        this.lastSimT = msg.t;
        for (const drone of msg.drones) {
          const sample: TelemetrySample = { ...drone, t: msg.t };
          this.latest.set(drone.id, sample);
          const ring = this.history.get(drone.id) ?? [];
          ring.push(sample);
          const cutoff = msg.t - TELEMETRY_RING_SECONDS;
          while (ring.length > 0 && ring[0].t < cutoff) ring.shift();
          this.history.set(drone.id, ring);
        }
        break;
      case 'attach_result':
        if (msg.ok) {
          this.attached.add(msg.drone_id);
          this.pushToast({ kind: 'info', text: `attached drone ${msg.drone_id}` });
        } else {
          this.pushToast({
            kind: 'nack',
            text: `attach drone ${msg.drone_id} failed: ${msg.reason ?? 'refused'}`,
          });
        }
        break;
      case 'detach_result':
        this.attached.delete(msg.drone_id);
        break;
      case 'ack':
        if (!msg.ok) {
          this.pushToast({
            kind: 'nack',
            text: `drone ${msg.drone_id}: command refused (${msg.status})`,
          });
        }
        break;
      case 'height':
        this.heights.set(msg.drone_id, msg.value);
        break;
      case 'flock_set':
        break; // reflected by the flock flag in telemetry
      case 'race_state':
        this.raceActive = msg.active;
        this.raceId = msg.race_id;
        if (msg.active) this.splits = [];
        break;
      case 'race_event':
        this.splits.push({
          raceId: msg.race_id,
          droneId: msg.drone_id,
          hoop: msg.hoop,
          t: msg.t,
          finished: msg.finished,
        });
        break;
      case 'leaderboard':
        this.leaderboard = msg.rows.slice();
        break;
      case 'error':
        this.pushToast({ kind: 'error', text: msg.message });
        break;
      case 'subscribed':
        break;
    }
  }

  private pushToast(toast: Toast): void {
    this.toasts.push(toast);
    while (this.toasts.length > TOAST_LIMIT) this.toasts.shift();
  }

  // -- view model -------------------------------------------------------------

  /** Channel considered lost after STALE_CHANNEL_MS without any message. */
  isStale(nowWallMs: number): boolean {
    if (!this.connected) return true;
    if (this.lastMessageWallMs === null) return true;
    return nowWallMs - this.lastMessageWallMs > STALE_CHANNEL_MS;
  }

  /** Drone markers exactly as last reported; no extrapolation, ever. */
  markers(): TelemetrySample[] {
    return [...this.latest.values()].sort((a, b) => a.id - b.id);
  }

  /** Altitude strip entries: the reported height-sensor value per drone. */
  altitudes(): { id: number; height: number }[] {
    return this.markers().map((m) => ({ id: m.id, height: m.height }));
  }

  /** Hoops with their order labels, straight from the arena document. */
  hoopLabels(): { order: number; center: [number, number, number]; radius: number }[] {
    const hoops = this.arena?.hoops ?? [];
    return hoops
      .slice()
      .sort((a, b) => a.order - b.order)
      .map((h) => ({ order: h.order, center: h.center, radius: h.radius }));
  }

  /** Split rows for the active race, formatted from gateway times only. */
  splitRows(): { droneId: number; hoop: number; time: string; finished: boolean }[] {
    return this.splits
      .filter((s) => s.raceId === this.raceId)
      .map((s) => ({
        droneId: s.droneId,
        hoop: s.hoop,
        time: formatSeconds(s.t),
        finished: s.finished,
      }));
  }

  /** Leaderboard rows as display strings; times verbatim from the gateway. */
  leaderboardRows(): { droneId: number; pilot: string; time: string; dnf: boolean }[] {
    return this.leaderboard.map((row) => ({
      droneId: row.drone_id,
      pilot: row.pilot,
      time: row.dnf || row.trial_time === null ? 'DNF' : formatSeconds(row.trial_time),
      dnf: row.dnf,
    }));
  }
}

export function formatSeconds(t: number): string {
  return `${t.toFixed(2)}s`;
}
