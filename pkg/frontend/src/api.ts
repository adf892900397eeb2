import {
  ApiError,
  AuditEvent,
  ExportPayload,
  FieldPayload,
  MutationResult,
  SessionPayload,
  ViewKey,
} from './types.js';

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ status: number; json(): Promise<unknown> }>;

/** Thin typed client over the review endpoints; fetch is injectable for tests. */
export class ApiClient {
  constructor(
    private readonly base: string = '',
    private readonly fetcher: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: Parameters<FetchLike>[1]): Promise<T> {
    const response = await this.fetcher(this.base + path, init);
    const body = (await response.json()) as Record<string, unknown>;
    if (response.status >= 400) {
      throw new ApiError(response.status, String(body['error'] ?? response.status));
    }
    return body as T;
  }

  getSession(): Promise<SessionPayload> {
    return this.request('/api/session');
  }

  getField(view: ViewKey): Promise<FieldPayload> {
    return this.request(`/api/field?view=${view}`);
  }

  getAudit(): Promise<{ events: AuditEvent[] }> {
    return this.request('/api/audit');
  }

  getExport(): Promise<ExportPayload> {
    return this.request('/api/export');
  }

  private mutate(path: string, payload: Record<string, unknown>): Promise<MutationResult> {
    return this.request(path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  reclassify(ids: string[], newClass: string): Promise<MutationResult> {
    return this.mutate('/api/reclassify', { ids, class: newClass });
  }

  reject(ids: string[]): Promise<MutationResult> {
    return this.mutate('/api/reject', { ids });
  }

  restore(ids: string[]): Promise<MutationResult> {
    return this.mutate('/api/restore', { ids });
  }
}
