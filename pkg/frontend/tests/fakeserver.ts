/**
 * In-memory stand-in for the review API used by the UI tests. It mirrors the
 * server contract exactly: same endpoints, same status codes, atomic
 * batches, dense audit sequence numbers, rejected detections excluded from
 * export, restore returning the pre-rejection state.
 */

import { FetchLike } from '../src/api.js';
import { AuditEvent, DetectionRow, FieldPoint, ReviewState, ViewKey } from '../src/types.js';

interface Stored {
  row: DetectionRow;
  preReject: [string, ReviewState] | null;
}

export interface SeedDetection {
  id: string;
  cls: string;
  x: number;
  y: number;
  uncertainty?: number;
}

export class FakeServer {
  private detections = new Map<string, Stored>();
  readonly events: AuditEvent[] = [];
  private fieldViews: Record<ViewKey, FieldPoint[]>;
  readonly classes = ['bottle', 'plastic', 'anchor', 'tire', 'metal', 'other', 'starfish'];

  constructor(seeds: SeedDetection[], fieldViews?: Partial<Record<ViewKey, FieldPoint[]>>) {
    for (const seed of seeds) {
      this.detections.set(seed.id, {
        row: {
          id: seed.id,
          x: seed.x,
          y: seed.y,
          thumb: `/api/thumb/${seed.id}`,
          class: seed.cls,
          state: 'unverified',
          uncertainty: seed.uncertainty ?? 0.2,
          scores: { [seed.cls]: 0.8 },
          spectrum_covered: false,
        },
        preReject: null,
      });
    }
    const base = seeds.map((s) => ({ id: s.id, x: s.x, y: s.y }));
    this.fieldViews = {
      pattern: fieldViews?.pattern ?? base,
      spectrum: fieldViews?.spectrum ?? base.map((p) => ({ ...p, x: -p.x })),
      probability: fieldViews?.probability ?? base.map((p) => ({ ...p, y: -p.y })),
    };
  }

  private ids(): string[] {
    return [...this.detections.keys()].sort();
  }

  sessionPayload() {
    return {
      session_id: 'fake',
      classes: this.classes,
      active_view: 'pattern' as ViewKey,
      audit_cursor: this.events.length,
      detections: this.ids().map((id) => ({ ...this.detections.get(id)!.row })),
    };
  }

  exportPayload() {
    return {
      session_id: 'fake',
      detections: this.ids()
        .map((id) => this.detections.get(id)!.row)
        .filter((row) => row.state !== 'rejected')
        .map((row) => ({ id: row.id, class: row.class, state: row.state })),
    };
  }

  /** Direct mutation path (the "issued straight against the API" arm). */
  mutate(
    action: 'reclassify' | 'reject' | 'restore',
    ids: string[],
    newClass?: string,
  ): { status: number; body: unknown } {
    if (!Array.isArray(ids) || ids.length === 0) {
      return { status: 400, body: { error: 'ids must be a non-empty list' } };
    }
    const unknown = ids.filter((id) => !this.detections.has(id));
    if (unknown.length) {
      return { status: 404, body: { error: `unknown detection ids: ${unknown}` } };
    }
    if (action === 'reclassify') {
      if (!newClass || !this.classes.includes(newClass)) {
        return { status: 400, body: { error: `unknown class ${newClass}` } };
      }
      const rejected = ids.filter((id) => this.detections.get(id)!.row.state === 'rejected');
      if (rejected.length) {
        return { status: 400, body: { error: `cannot modify rejected: ${rejected}` } };
      }
    }
    const batch = [...new Set(ids)];
    const event: AuditEvent = {
      seq: this.events.length + 1,
      timestamp: 0,
      actor: 'inspector',
      action,
      ids: batch,
      ...(action === 'reclassify' ? { new_class: newClass } : {}),
    };
    for (const id of batch) {
      const stored = this.detections.get(id)!;
      if (action === 'reclassify') {
        if (stored.row.class === newClass) {
          stored.row.state = 'verified';
        } else {
          stored.row.class = newClass!;
          stored.row.state = 'reclassified';
        }
      } else if (action === 'reject') {
        if (stored.row.state !== 'rejected') {
          stored.preReject = [stored.row.class, stored.row.state];
          stored.row.state = 'rejected';
        }
      } else if (stored.row.state === 'rejected') {
        const [cls, state] = stored.preReject ?? [stored.row.class, 'unverified'];
        stored.row.class = cls;
        stored.row.state = state;
        stored.preReject = null;
      }
    }
    this.events.push(event);
    return { status: 200, body: { applied: event, audit_cursor: this.events.length } };
  }

  /** FetchLike adapter so ApiClient can run against this fake unchanged. */
  fetcher(): FetchLike {
    return async (url, init) => {
      const respond = (status: number, body: unknown) => ({
        status,
        json: async () => body,
      });
      if (url.endsWith('/api/session')) return respond(200, this.sessionPayload());
      if (url.includes('/api/field')) {
        const view = (new URL(url, 'http://x').searchParams.get('view') ?? 'pattern') as ViewKey;
        if (!(view in this.fieldViews)) return respond(400, { error: 'bad view' });
        return respond(200, { view, points: this.fieldViews[view] });
      }
      if (url.endsWith('/api/audit')) return respond(200, { events: this.events });
      if (url.endsWith('/api/export')) return respond(200, this.exportPayload());
      const body = init?.body ? (JSON.parse(init.body) as Record<string, unknown>) : {};
      const ids = body['ids'] as string[];
      if (url.endsWith('/api/reclassify')) {
        const r = this.mutate('reclassify', ids, body['class'] as string);
        return respond(r.status, r.body);
      }
      if (url.endsWith('/api/reject')) {
        const r = this.mutate('reject', ids);
        return respond(r.status, r.body);
      }
      if (url.endsWith('/api/restore')) {
        const r = this.mutate('restore', ids);
        return respond(r.status, r.body);
      }
      return respond(404, { error: `no route ${url}` });
    };
  }
}
