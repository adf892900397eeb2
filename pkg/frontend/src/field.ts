import { FieldViewState } from './state.js';
import { Viewport } from './transform.js';
import { DetectionRow } from './types.js';

export const CLASS_COLORS: Record<string, string> = {
  bottle: '#4287f5',
  plastic: '#f0c842',
  anchor: '#78787f',
  tire: '#282828',
  metal: '#a0522d',
  other: '#966fd6',
  starfish: '#eb6ea0',
};

const BADGE_COLORS: Record<string, string> = {
  unverified: '#9aa0a6',
  verified: '#34a853',
  reclassified: '#fbbc05',
  rejected: '#ea4335',
};

// below this on-screen thumbnail size the field degrades to dots
const LOD_THUMB_PX = 14;
const THUMB_PX = 36;

/**
 * Canvas renderer for the image field: one thumbnail per detection at its
 * embedding position, class ring, review-state badge, optional uncertainty
 * encoded as opacity. Thousands of points stay navigable because zoomed-out
 * views draw plain dots.
 */
export class FieldRenderer {
  private thumbs = new Map<string, HTMLImageElement>();
  showUncertainty = false;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    readonly viewport: Viewport,
  ) {}

  private thumbFor(row: DetectionRow, onLoad: () => void): HTMLImageElement {
    let img = this.thumbs.get(row.id);
    if (!img) {
      img = new Image();
      img.src = row.thumb;
      img.onload = onLoad;
      this.thumbs.set(row.id, img);
    }
    return img;
  }

  draw(state: FieldViewState, dragRect: { x0: number; y0: number; x1: number; y1: number } | null): void {
    const ctx = this.canvas.getContext('2d');
    if (!ctx) return;
    const { width, height } = this.canvas;
    ctx.clearRect(0, 0, width, height);
    const rows = state.rowById;
    const zoomedIn = this.viewport.scale * 0.04 >= LOD_THUMB_PX; // ~25 thumbs per unit

    for (const point of state.points) {
      const row = rows.get(point.id);
      if (!row) continue;
      const s = this.viewport.toScreen(point);
      if (s.x < -THUMB_PX || s.y < -THUMB_PX || s.x > width + THUMB_PX || s.y > height + THUMB_PX) {
        continue;
      }
      const selected = state.selection.has(point.id);
      ctx.globalAlpha = this.showUncertainty ? Math.max(0.15, 1 - row.uncertainty) : 1.0;

      if (zoomedIn) {
        const img = this.thumbFor(row, () => this.draw(state, dragRect));
        const half = THUMB_PX / 2;
        if (img.complete && img.naturalWidth > 0) {
          ctx.drawImage(img, s.x - half, s.y - half, THUMB_PX, THUMB_PX);
        } else {
          ctx.fillStyle = CLASS_COLORS[row.class] ?? '#666';
          ctx.fillRect(s.x - half, s.y - half, THUMB_PX, THUMB_PX);
        }
        ctx.lineWidth = selected ? 4 : 2;
        ctx.strokeStyle = CLASS_COLORS[row.class] ?? '#666';
        ctx.strokeRect(s.x - half, s.y - half, THUMB_PX, THUMB_PX);
        // review-state badge, top-right corner
        ctx.fillStyle = BADGE_COLORS[row.state];
        ctx.beginPath();
        ctx.arc(s.x + half - 3, s.y - half + 3, 4, 0, 2 * Math.PI);
        ctx.fill();
      } else {
        ctx.fillStyle = CLASS_COLORS[row.class] ?? '#666';
        ctx.beginPath();
        ctx.arc(s.x, s.y, selected ? 6 : 4, 0, 2 * Math.PI);
        ctx.fill();
        ctx.strokeStyle = BADGE_COLORS[row.state];
        ctx.lineWidth = 2;
        ctx.stroke();
      }
      if (selected) {
        ctx.globalAlpha = 1.0;
        ctx.strokeStyle = '#1a73e8';
        ctx.lineWidth = 2;
        const r = zoomedIn ? THUMB_PX / 2 + 4 : 9;
        ctx.strokeRect(s.x - r, s.y - r, 2 * r, 2 * r);
      }
    }
    ctx.globalAlpha = 1.0;

    if (dragRect) {
      ctx.strokeStyle = '#1a73e8';
      ctx.fillStyle = 'rgba(26, 115, 232, 0.12)';
      ctx.lineWidth = 1.5;
      const x = Math.min(dragRect.x0, dragRect.x1);
      const y = Math.min(dragRect.y0, dragRect.y1);
      const w = Math.abs(dragRect.x1 - dragRect.x0);
      const h = Math.abs(dragRect.y1 - dragRect.y0);
      ctx.fillRect(x, y, w, h);
      ctx.strokeRect(x, y, w, h);
    }
  }
}
