import { describe, expect, it } from 'vitest';

import { Viewport } from '../src/transform.js';

describe('viewport transform', () => {
  it('places field points at hand-computed screen positions', () => {
    const vp = new Viewport(800, 600, 40); // scale = (600 - 80) / 2 = 260
    expect(vp.scale).toBe(260);
    expect(vp.toScreen({ x: 0, y: 0 })).toEqual({ x: 400, y: 300 });
    expect(vp.toScreen({ x: 1, y: 0 })).toEqual({ x: 660, y: 300 });
    expect(vp.toScreen({ x: 0, y: 1 })).toEqual({ x: 400, y: 40 }); // y flips
    expect(vp.toScreen({ x: -1, y: -1 })).toEqual({ x: 140, y: 560 });
  });

  it('round-trips payload positions within one pixel', () => {
    const vp = new Viewport(1024, 768);
    vp.panBy(37.5, -12.25);
    vp.zoomAt({ x: 300, y: 200 }, 1.7);
    for (const p of [
      { x: 0.1, y: -0.4 },
      { x: -1, y: 1 },
      { x: 0.333, y: 0.667 },
    ]) {
      const screen = vp.toScreen(p);
      const back = vp.toScreen(vp.toField(screen));
      expect(Math.abs(back.x - screen.x)).toBeLessThanOrEqual(1);
      expect(Math.abs(back.y - screen.y)).toBeLessThanOrEqual(1);
    }
  });

  it('zoom keeps the anchor point fixed', () => {
    const vp = new Viewport(800, 600);
    const anchor = { x: 250, y: 420 };
    const before = vp.toField(anchor);
    vp.zoomAt(anchor, 2.0);
    const after = vp.toField(anchor);
    expect(Math.abs(after.x - before.x)).toBeLessThan(1e-9);
    expect(Math.abs(after.y - before.y)).toBeLessThan(1e-9);
  });

  it('pan shifts every point by the same pixel offset', () => {
    const vp = new Viewport(800, 600);
    const a = vp.toScreen({ x: 0.5, y: 0.5 });
    vp.panBy(15, -30);
    const b = vp.toScreen({ x: 0.5, y: 0.5 });
    expect(b.x - a.x).toBe(15);
    expect(b.y - a.y).toBe(-30);
  });
});
