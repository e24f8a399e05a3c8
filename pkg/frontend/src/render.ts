// Canvas renderer: top-down arena plus a per-drone altitude strip.
// Pure painting; every value comes from the store's view model.

import type { ConsoleStore, TelemetrySample } from './state.js';

const DRONE_COLORS = ['#4fc3f7', '#ffb74d', '#aed581', '#f06292', '#ba68c8',
                      '#4db6ac', '#fff176', '#a1887f'];

export function droneColor(id: number): string {
  return DRONE_COLORS[id % DRONE_COLORS.length];
}

interface Projection {
  toX(x: number): number;
  toY(y: number): number;
  scale: number;
}

function projection(store: ConsoleStore, width: number, height: number): Projection | null {
  const bounds = store.arena?.bounds;
  if (!bounds) return null;
  const margin = 24;
  const spanX = bounds.max[0] - bounds.min[0];
  const spanY = bounds.max[1] - bounds.min[1];
  const scale = Math.min((width - 2 * margin) / spanX, (height - 2 * margin) / spanY);
  const offX = (width - spanX * scale) / 2;
  const offY = (height - spanY * scale) / 2;
  return {
    toX: (x) => offX + (x - bounds.min[0]) * scale,
    // world +y is up on screen
    toY: (y) => height - offY - (y - bounds.min[1]) * scale,
    scale,
  };
}

export function drawArena(
  canvas: HTMLCanvasElement,
  store: ConsoleStore,
  selectedDrone: number | null,
  nowWallMs: number,
): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.fillStyle = '#10141a';
  ctx.fillRect(0, 0, width, height);
  const proj = projection(store, width, height);
  if (!proj || !store.arena) {
    ctx.fillStyle = '#8899aa';
    ctx.font = '14px system-ui';
    ctx.fillText('waiting for gateway…', 20, 30);
    return;
  }
  const bounds = store.arena.bounds;

  ctx.strokeStyle = '#3c4a5a';
  ctx.lineWidth = 2;
  ctx.strokeRect(
    proj.toX(bounds.min[0]),
    proj.toY(bounds.max[1]),
    (bounds.max[0] - bounds.min[0]) * proj.scale,
    (bounds.max[1] - bounds.min[1]) * proj.scale,
  );

  for (const box of store.arena.obstacles ?? []) {
    ctx.fillStyle = '#46525f';
    ctx.fillRect(
      proj.toX(box.min[0]),
      proj.toY(box.max[1]),
      (box.max[0] - box.min[0]) * proj.scale,
      (box.max[1] - box.min[1]) * proj.scale,
    );
  }

  // hoops: a disc seen from above is a chord perpendicular to its normal
  for (const hoop of store.hoopLabels()) {
    const [cx, cy] = [proj.toX(hoop.center[0]), proj.toY(hoop.center[1])];
    const arena = store.arena.hoops?.find((h) => h.order === hoop.order);
    const n = arena?.normal ?? [1, 0, 0];
    const horiz = Math.hypot(n[0], n[1]) || 1;
    const dirX = -n[1] / horiz;
    const dirY = n[0] / horiz;
    const r = hoop.radius * proj.scale;
    ctx.strokeStyle = '#e8c14b';
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(cx - dirX * r, cy + dirY * r);
    ctx.lineTo(cx + dirX * r, cy - dirY * r);
    ctx.stroke();
    ctx.fillStyle = '#e8c14b';
    ctx.font = 'bold 13px system-ui';
    ctx.fillText(String(hoop.order), cx + 6, cy - 6);
  }

  for (const marker of store.markers()) {
    drawDrone(ctx, proj, marker, marker.id === selectedDrone);
  }

  if (store.isStale(nowWallMs)) {
    ctx.fillStyle = 'rgba(120, 20, 20, 0.85)';
    ctx.fillRect(0, 0, width, 34);
    ctx.fillStyle = '#ffdddd';
    ctx.font = 'bold 15px system-ui';
    ctx.fillText('CHANNEL STALE — no gateway data', 14, 22);
  }
}

function drawDrone(
  ctx: CanvasRenderingContext2D,
  proj: Projection,
  marker: TelemetrySample,
  selected: boolean,
): void {
  const x = proj.toX(marker.position[0]);
  const y = proj.toY(marker.position[1]);
  const r = Math.max(5, 0.15 * proj.scale);
  ctx.fillStyle = droneColor(marker.id);
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fill();
  if (selected) {
    ctx.strokeStyle = '#ffffff';
    ctx.lineWidth = 2;
    ctx.stroke();
  }
  // heading arrow (screen y is flipped, so negate the sine)
  const hx = Math.cos(marker.heading);
  const hy = -Math.sin(marker.heading);
  ctx.strokeStyle = '#ffffff';
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x, y);
  ctx.lineTo(x + hx * r * 2.2, y + hy * r * 2.2);
  ctx.stroke();
  ctx.fillStyle = '#cfd8e3';
  ctx.font = '12px system-ui';
  ctx.fillText(`${marker.id}${marker.flock ? ' ⋔' : ''}`, x + r + 3, y + 4);
}

export function drawAltitudeStrip(canvas: HTMLCanvasElement, store: ConsoleStore): void {
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.fillStyle = '#10141a';
  ctx.fillRect(0, 0, width, height);
  const ceiling = store.arena?.bounds.max[2] ?? 3;
  const entries = store.altitudes();
  const lane = width / Math.max(1, entries.length);
  ctx.font = '11px system-ui';
  entries.forEach((entry, i) => {
    const h = Math.min(1, entry.height / ceiling) * (height - 26);
    ctx.fillStyle = droneColor(entry.id);
    ctx.fillRect(i * lane + 6, height - 14 - h, lane - 12, h);
    ctx.fillStyle = '#cfd8e3';
    ctx.fillText(`${entry.id}: ${entry.height.toFixed(2)}m`, i * lane + 4, height - 2);
  });
}
