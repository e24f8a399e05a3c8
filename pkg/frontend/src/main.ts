// Console entry point: connect, reduce messages, paint at animation rate.

import { ConsoleStore } from './state.js';
import type { Role, ServerMessage } from './messages.js';
import { openChannel } from './net.js';
import { drawAltitudeStrip, drawArena } from './render.js';
import { renderPanels, wireControls } from './controls.js';

const params = new URLSearchParams(window.location.search);
const host = params.get('host') ?? window.location.hostname ?? 'localhost';
const port = params.get('port') ?? '7788';
const role = (params.get('role') ?? 'pilot') as Role;

const store = new ConsoleStore();
const inbox: { msg: ServerMessage; wallMs: number }[] = [];

const channel = openChannel(
  `ws://${host}:${port}/`,
  role,
  (msg, wallMs) => inbox.push({ msg, wallMs }),
  () => {
    store.connected = false;
  },
);

const controls = wireControls(store, channel);
const arenaCanvas = document.getElementById('arena') as HTMLCanvasElement;
const stripCanvas = document.getElementById('altitude') as HTMLCanvasElement;

function frame(): void {
  while (inbox.length > 0) {
    const { msg, wallMs } = inbox.shift()!;
    store.reduce(msg, wallMs);
  }
  drawArena(arenaCanvas, store, controls.selectedDrone, performance.now());
  drawAltitudeStrip(stripCanvas, store);
  renderPanels(store);
  requestAnimationFrame(frame);
}

requestAnimationFrame(frame);
