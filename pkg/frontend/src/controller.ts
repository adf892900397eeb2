import { ApiClient } from './api.js';
import { Rect, selectInRect } from './selection.js';
import { FieldViewState } from './state.js';
import { ApiError, ViewKey } from './types.js';

/**
 * Drives the review workflow against the API with pessimistic updates:
 * nothing changes locally until the server acknowledged the mutation, and
 * the authoritative session payload is re-fetched after every write. On a
 * failed batch the selection is preserved so the inspector can retry.
 */
export class SessionController {
  constructor(
    readonly api: ApiClient,
    readonly state = new FieldViewState(),
    private readonly onChange: () => void = () => {},
  ) {}

  async load(): Promise<void> {
    const session = await this.api.getSession();
    this.state.applySession(session);
    await this.setView(session.active_view);
  }

  async refresh(): Promise<void> {
    this.state.applySession(await this.api.getSession());
    this.onChange();
  }

  async setView(view: ViewKey): Promise<void> {
    const field = await this.api.getField(view);
    this.state.applyField(field.view, field.points);
    this.onChange();
  }

  /** Rectangle lasso in field coordinates; inclusive bounds, sorted ids. */
  selectRect(rect: Rect): string[] {
    const ids = selectInRect(this.state.points, rect);
    this.state.setSelection(ids);
    this.onChange();
    return ids;
  }

  selectIds(ids: string[]): void {
    this.state.setSelection(ids);
    this.onChange();
  }

  private async applyBatch(
    action: 'reclassify' | 'reject' | 'restore',
    run: (ids: string[]) => Promise<unknown>,
    ids?: string[],
  ): Promise<boolean> {
    const batch = ids ?? [...this.state.selection].sort();
    if (ids) this.state.setSelection(ids);
    this.state.beginAction(action);
    try {
      await run(batch);
    } catch (error) {
      // pessimistic: nothing was applied locally, selection stays put
      this.state.lastError = error instanceof ApiError
        ? `${error.status}: ${error.message}`
        : String(error);
      this.onChange();
      return false;
    } finally {
      this.state.endAction();
    }
    this.state.lastError = '';
    await this.refresh();
    return true;
  }

  reclassifySelection(newClass: string): Promise<boolean> {
    return this.applyBatch('reclassify', (ids) => this.api.reclassify(ids, newClass));
  }

  rejectSelection(): Promise<boolean> {
    return this.applyBatch('reject', (ids) => this.api.reject(ids));
  }

  /** Restore straight from the audit panel: acts on explicit ids. */
  restoreIds(ids: string[]): Promise<boolean> {
    return this.applyBatch('restore', (batch) => this.api.restore(batch), ids);
  }
}
