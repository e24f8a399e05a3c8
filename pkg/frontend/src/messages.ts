// Message types mirroring console_api.md. The console renders only what
// arrives in these messages; it never computes physics, progress, or times.

export type Role = 'pilot' | 'operator' | 'observer';

export type Vec3 = [number, number, number];

export interface ArenaHoop {
  center: Vec3;
  normal: Vec3;
  radius: number;
  order: number;
}

export interface ArenaBox {
  min: Vec3;
  max: Vec3;
}

export interface ArenaDoc {
  bounds: { min: Vec3; max: Vec3 };
  hoops?: ArenaHoop[];
  obstacles?: ArenaBox[];
  spawns?: { position: Vec3; heading?: number }[];
}

export interface DroneTelemetry {
  id: number;
  position: Vec3;
  velocity: Vec3;
  heading: number;
  yaw_rate: number;
  height: number;
  channels: [number, number, number];
  flock: boolean;
  next_hoop: number;
}

export interface WelcomeMsg {
  type: 'welcome';
  session_id: string;
  role: Role;
  drones: number[];
  arena: ArenaDoc;
  telemetry_hz: number;
  race_active: boolean;
}

export interface TelemetryMsg {
  type: 'telemetry';
  t: number;
  drones: DroneTelemetry[];
}

export interface AckMsg {
  type: 'ack';
  drone_id: number;
  seq?: number;
  tag?: unknown;
  ok: boolean;
  status: string;
  t?: number;
}

export interface AttachResultMsg {
  type: 'attach_result';
  drone_id: number;
  ok: boolean;
  reason?: string;
  tag?: unknown;
}

export interface HeightMsg {
  type: 'height';
  drone_id: number;
  value: number;
  tag?: unknown;
}

export interface FlockSetMsg {
  type: 'flock_set';
  drone_id: number;
  on: boolean;
  tag?: unknown;
}

export interface RaceStateMsg {
  type: 'race_state';
  active: boolean;
  race_id: number;
}

export interface RaceEventMsg {
  type: 'race_event';
  race_id: number;
  drone_id: number;
  hoop: number;
  t: number;
  finished: boolean;
}

export interface LeaderboardRow {
  race_id: number;
  drone_id: number;
  pilot: string;
  start_t: number | null;
  finish_t: number | null;
  trial_time: number | null;
  dnf: boolean;
}

export interface LeaderboardMsg {
  type: 'leaderboard';
  rows: LeaderboardRow[];
}

export interface ErrorMsg {
  type: 'error';
  message: string;
  tag?: unknown;
}

export interface SubscribedMsg {
  type: 'subscribed';
  on: boolean;
}

export interface DetachResultMsg {
  type: 'detach_result';
  drone_id: number;
  ok: boolean;
}

export type ServerMessage =
  | WelcomeMsg
  | TelemetryMsg
  | AckMsg
  | AttachResultMsg
  | HeightMsg
  | FlockSetMsg
  | RaceStateMsg
  | RaceEventMsg
  | LeaderboardMsg
  | ErrorMsg
  | SubscribedMsg
  | DetachResultMsg;

export type CommandOp =
  | 'up'
  | 'down'
  | 'forward'
  | 'backward'
  | 'turn_left'
  | 'turn_right'
  | 'off';

export const COMMAND_OPS: CommandOp[] = [
  'up', 'down', 'forward', 'backward', 'turn_left', 'turn_right', 'off',
];
