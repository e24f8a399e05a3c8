// Keyboard piloting: one key per drone-control call.

import type { CommandOp } from './messages.js';

export const KEY_BINDINGS: Record<string, CommandOp> = {
  w: 'up',
  s: 'down',
  ArrowUp: 'forward',
  ArrowDown: 'backward',
  ArrowLeft: 'turn_left',
  ArrowRight: 'turn_right',
  ' ': 'off',
};

export function opForKey(key: string): CommandOp | null {
  return KEY_BINDINGS[key] ?? null;
}
