import { FieldPoint } from './types.js';

export interface Rect {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/** Corner order does not matter; bounds are inclusive. */
export function normalizeRect(r: Rect): Rect {
  return {
    x0: Math.min(r.x0, r.x1),
    y0: Math.min(r.y0, r.y1),
    x1: Math.max(r.x0, r.x1),
    y1: Math.max(r.y0, r.y1),
  };
}

/**
 * Ids whose field point lies inside the rectangle, sorted by id.
 * Mirrors the server-side region selection semantics exactly (inclusive
 * bounds), so a lasso in the browser and a rectangle query against the
 * session agree on membership.
 */
export function selectInRect(points: FieldPoint[], rect: Rect): string[] {
  const r = normalizeRect(rect);
  return points
    .filter((p) => p.x >= r.x0 && p.x <= r.x1 && p.y >= r.y0 && p.y <= r.y1)
    .map((p) => p.id)
    .sort();
}
