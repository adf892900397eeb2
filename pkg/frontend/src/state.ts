import { DetectionRow, FieldPoint, SessionPayload, ViewKey } from './types.js';

export type PendingAction = 'reclassify' | 'reject' | 'restore' | null;

/**
 * Client-side view state. Only the server mutates review state; this store
 * holds what the inspector is looking at: the active view, the field
 * positions for that view, the current selection, and at most one pending
 * batch action. Selection is clamped to loaded ids on every update.
 */
export class FieldViewState {
  session: SessionPayload | null = null;
  view: ViewKey = 'pattern';
  points: FieldPoint[] = [];
  selection = new Set<string>();
  pending: PendingAction = null;
  lastError = '';

  get rows(): DetectionRow[] {
    return this.session?.detections ?? [];
  }

  get rowById(): Map<string, DetectionRow> {
    return new Map(this.rows.map((r) => [r.id, r]));
  }

  /** Counts shown in the header; always derived from the latest payload. */
  counts(): { perClass: Record<string, number>; rejected: number; total: number } {
    const perClass: Record<string, number> = {};
    let rejected = 0;
    for (const row of this.rows) {
      if (row.state === 'rejected') {
        rejected += 1;
        continue;
      }
      perClass[row.class] = (perClass[row.class] ?? 0) + 1;
    }
    return { perClass, rejected, total: this.rows.length };
  }

  applySession(payload: SessionPayload): void {
    this.session = payload;
    const ids = new Set(payload.detections.map((d) => d.id));
    // invariant: selection is always a subset of loaded detections
    this.selection = new Set([...this.selection].filter((id) => ids.has(id)));
    if (this.points.length === 0) {
      this.points = payload.detections.map((d) => ({ id: d.id, x: d.x, y: d.y }));
    }
  }

  /** Repositioning on a view toggle must not drop the selection. */
  applyField(view: ViewKey, points: FieldPoint[]): void {
    this.view = view;
    this.points = points;
  }

  setSelection(ids: string[]): void {
    const known = new Set(this.rows.map((r) => r.id));
    this.selection = new Set(ids.filter((id) => known.has(id)));
  }

  clearSelection(): void {
    this.selection = new Set();
  }

  beginAction(action: Exclude<PendingAction, null>): void {
    if (this.pending !== null) {
      throw new Error(`action ${this.pending} already in flight`);
    }
    if (this.selection.size === 0) {
      throw new Error('empty selection');
    }
    this.pending = action;
  }

  endAction(): void {
    this.pending = null;
  }
}
