// DOM wiring for the pilot and race-operator panels.

import type { Channel } from './net.js';
import type { CommandOp } from './messages.js';
import { COMMAND_OPS } from './messages.js';
import { opForKey } from './keymap.js';
import type { ConsoleStore } from './state.js';

export interface Controls {
  selectedDrone: number | null;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function wireControls(store: ConsoleStore, channel: Channel): Controls {
  const controls: Controls = { selectedDrone: null };
  const droneSelect = el<HTMLSelectElement>('drone-select');
  const durationInput = el<HTMLInputElement>('duration');
  const buttonRow = el<HTMLDivElement>('pilot-buttons');

  const refreshDrones = () => {
    if (droneSelect.options.length === store.drones.length) return;
    droneSelect.innerHTML = '';
    for (const id of store.drones) {
      const option = document.createElement('option');
      option.value = String(id);
      option.textContent = `drone ${id}`;
      droneSelect.appendChild(option);
    }
  };
  setInterval(refreshDrones, 500);

  droneSelect.addEventListener('change', () => {
    controls.selectedDrone = Number(droneSelect.value);
    channel.send({ type: 'attach', drone_id: controls.selectedDrone });
  });

  const sendCommand = (op: CommandOp) => {
    if (controls.selectedDrone === null) return;
    const doc: Record<string, unknown> = {
      type: 'cmd',
      drone_id: controls.selectedDrone,
      op,
    };
    if (op !== 'off') {
      doc.duration_ms = Math.max(1, Math.round(Number(durationInput.value) * 1000));
    }
    channel.send(doc);
  };

  for (const op of COMMAND_OPS) {
    const button = document.createElement('button');
    button.textContent = op.replace('_', ' ');
    button.addEventListener('click', () => sendCommand(op));
    buttonRow.appendChild(button);
  }

  document.addEventListener('keydown', (event) => {
    if (event.target instanceof HTMLInputElement) return;
    const op = opForKey(event.key);
    if (op) {
      event.preventDefault();
      sendCommand(op);
    }
  });

  el<HTMLButtonElement>('height-btn').addEventListener('click', () => {
    if (controls.selectedDrone !== null) {
      channel.send({ type: 'height', drone_id: controls.selectedDrone });
    }
  });
  el<HTMLButtonElement>('flock-btn').addEventListener('click', () => {
    if (controls.selectedDrone !== null) {
      const latest = store.latest.get(controls.selectedDrone);
      channel.send({
        type: 'flock',
        drone_id: controls.selectedDrone,
        on: !(latest?.flock ?? false),
      });
    }
  });
  el<HTMLButtonElement>('race-arm').addEventListener('click', () => {
    channel.send({ type: 'race', verb: 'arm' });
  });
  el<HTMLButtonElement>('race-abort').addEventListener('click', () => {
    channel.send({ type: 'race', verb: 'abort' });
  });
  el<HTMLButtonElement>('leaderboard-btn').addEventListener('click', () => {
    channel.send({ type: 'leaderboard' });
  });

  return controls;
}

export function renderPanels(store: ConsoleStore): void {
  el<HTMLDivElement>('session-info').textContent = store.sessionId
    ? `session ${store.sessionId} (${store.role})`
    : 'connecting…';

  el<HTMLDivElement>('race-state').textContent = store.raceActive
    ? `trial ${store.raceId} running`
    : 'no active trial';

  const splits = el<HTMLUListElement>('splits');
  splits.innerHTML = '';
  for (const row of store.splitRows()) {
    const item = document.createElement('li');
    item.textContent = `drone ${row.droneId} — hoop ${row.hoop} @ ${row.time}` +
      (row.finished ? '  🏁' : '');
    splits.appendChild(item);
  }

  const board = el<HTMLOListElement>('leaderboard');
  board.innerHTML = '';
  for (const row of store.leaderboardRows()) {
    const item = document.createElement('li');
    item.textContent = `drone ${row.droneId} (${row.pilot}) — ${row.time}`;
    if (row.dnf) item.style.opacity = '0.6';
    board.appendChild(item);
  }

  const toasts = el<HTMLUListElement>('toasts');
  toasts.innerHTML = '';
  for (const toast of store.toasts.slice(-4)) {
    const item = document.createElement('li');
    item.textContent = toast.text;
    item.className = `toast-${toast.kind}`;
    toasts.appendChild(item);
  }

  const heights = el<HTMLDivElement>('height-readout');
  const parts: string[] = [];
  for (const [id, value] of store.heights) {
    parts.push(`drone ${id}: ${value.toFixed(2)} m`);
  }
  heights.textContent = parts.join('   ');
}
