import { describe, expect, it } from 'vitest';

import { opForKey, KEY_BINDINGS } from '../src/keymap.js';

describe('keyboard bindings', () => {
  it('covers all seven piloting actions', () => {
    const ops = new Set(Object.values(KEY_BINDINGS));
    expect(ops).toEqual(new Set([
      'up', 'down', 'forward', 'backward', 'turn_left', 'turn_right', 'off',
    ]));
  });

  it('maps movement keys', () => {
    expect(opForKey('w')).toBe('up');
    expect(opForKey('s')).toBe('down');
    expect(opForKey('ArrowUp')).toBe('forward');
    expect(opForKey('ArrowDown')).toBe('backward');
    expect(opForKey('ArrowLeft')).toBe('turn_left');
    expect(opForKey('ArrowRight')).toBe('turn_right');
    expect(opForKey(' ')).toBe('off');
  });

  it('ignores unbound keys', () => {
    expect(opForKey('q')).toBeNull();
    expect(opForKey('Escape')).toBeNull();
  });
});
