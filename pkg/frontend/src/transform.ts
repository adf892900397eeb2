/** Viewport math between embedding space ([-1,1]^2, y up) and canvas pixels. */

export interface Point {
  x: number;
  y: number;
}

export class Viewport {
  /** pixels per embedding unit */
  scale: number;
  panX = 0;
  panY = 0;

  constructor(
    public width: number,
    public height: number,
    margin = 40,
  ) {
    // fit the [-1,1]^2 field with a margin
    this.scale = Math.max(1, (Math.min(width, height) - 2 * margin) / 2);
  }

  toScreen(p: Point): Point {
    return {
      x: this.width / 2 + this.panX + p.x * this.scale,
      y: this.height / 2 + this.panY - p.y * this.scale,
    };
  }

  toField(s: Point): Point {
    return {
      x: (s.x - this.width / 2 - this.panX) / this.scale,
      y: -(s.y - this.height / 2 - this.panY) / this.scale,
    };
  }

  panBy(dx: number, dy: number): void {
    this.panX += dx;
    this.panY += dy;
  }

  /** Zoom by `factor` keeping the screen point `anchor` fixed. */
  zoomAt(anchor: Point, factor: number): void {
    const before = this.toField(anchor);
    this.scale = Math.min(1e5, Math.max(10, this.scale * factor));
    const after = this.toScreen(before);
    this.panX += anchor.x - after.x;
    this.panY += anchor.y - after.y;
  }
}
