/** Payload shapes of the review API. */

export type ViewKey = 'pattern' | 'spectrum' | 'probability';

export type ReviewState = 'unverified' | 'verified' | 'reclassified' | 'rejected';

export interface DetectionRow {
  id: string;
  x: number;
  y: number;
  thumb: string;
  class: string;
  state: ReviewState;
  uncertainty: number;
  scores: Record<string, number>;
  spectrum_covered: boolean;
}

export interface SessionPayload {
  session_id: string;
  classes: string[];
  active_view: ViewKey;
  audit_cursor: number;
  detections: DetectionRow[];
}

export interface FieldPoint {
  id: string;
  x: number;
  y: number;
}

export interface FieldPayload {
  view: ViewKey;
  points: FieldPoint[];
}

export interface AuditEvent {
  seq: number;
  timestamp: number;
  actor: string;
  action: 'verify' | 'reclassify' | 'reject' | 'restore';
  ids: string[];
  new_class?: string;
}

export interface ExportPayload {
  session_id: string;
  detections: Array<Record<string, unknown>>;
}

export interface MutationResult {
  applied: AuditEvent;
  audit_cursor: number;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}
