"""Event-sourced review sessions: verify, reclassify, reject, restore, export.

Session state is never stored directly; it is the left fold of an append-only
audit log over the initial detection states. Every mutation validates its
whole batch first (a human selecting fifty thumbnails must not get partial
application), appends exactly one event, then applies it through the same
fold function used for replay, so `fold(initial, log) == current` holds by
construction and is still verified in tests.

On disk a session is a directory holding `initial.json` (the fused
detections) and `events.ndjson` (one audit event per line).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .detfuse import DEBRIS_CLASSES, FusedDetection
from .errors import FormatError

REVIEW_STATES = ("unverified", "verified", "reclassified", "rejected")
ACTIONS = ("verify", "reclassify", "reject", "restore")
VIEW_KEYS = ("pattern", "spectrum", "probability")


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    timestamp: float
    actor: str
    action: str
    ids: tuple[str, ...]
    new_class: str | None = None
    old_classes: dict[str, str] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out = {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "action": self.action,
            "ids": list(self.ids),
        }
        if self.new_class is not None:
            out["new_class"] = self.new_class
        if self.old_classes:
            out["old_classes"] = self.old_classes
        return out

    @classmethod
    def from_json_dict(cls, record: dict) -> "AuditEvent":
        return cls(
            seq=record["seq"],
            timestamp=record["timestamp"],
            actor=record["actor"],
            action=record["action"],
            ids=tuple(record["ids"]),
            new_class=record.get("new_class"),
            old_classes=record.get("old_classes", {}),
        )


def initial_state(det: FusedDetection) -> dict:
    return {"class": det.current_class, "state": det.review_state, "pre_reject": None}


def apply_event(states: dict[str, dict], event: AuditEvent) -> dict[str, dict]:
    """Pure fold step: returns the successor state mapping.

    Rejecting an already-rejected detection and restoring a non-rejected one
    are recorded no-ops; everything else transitions exactly one way.
    """
    out = {k: dict(v) for k, v in states.items()}
    for det_id in event.ids:
        s = out[det_id]
        if event.action == "verify":
            s["state"] = "verified"
        elif event.action == "reclassify":
            old = event.old_classes.get(det_id, s["class"])
            if event.new_class == old:
                s["state"] = "verified"  # confirming the class is a verification
            else:
                s["class"] = event.new_class
                s["state"] = "reclassified"
        elif event.action == "reject":
            if s["state"] != "rejected":
                s["pre_reject"] = [s["class"], s["state"]]
                s["state"] = "rejected"
        elif event.action == "restore":
            if s["state"] == "rejected":
                prior = s["pre_reject"] or [s["class"], "unverified"]
                s["class"], s["state"] = prior
                s["pre_reject"] = None
        else:  # pragma: no cover - events are validated on construction
            raise FormatError(f"unknown action {event.action!r}")
    return out


def replay(initial: dict[str, dict], events: list[AuditEvent]) -> dict[str, dict]:
    states = {k: dict(v) for k, v in initial.items()}
    for event in events:
        states = apply_event(states, event)
    return states


class ReviewSession:
    """In-memory session; one writer at a time, readers see applied state."""

    def __init__(self, session_id: str, detections: list[FusedDetection],
                 store: "SessionStore | None" = None):
        self.session_id = session_id
        self.detections = {d.det_id: d for d in detections}
        if len(self.detections) != len(detections):
            raise FormatError("duplicate detection ids")
        self.initial = {d.det_id: initial_state(d) for d in detections}
        self.states = {k: dict(v) for k, v in self.initial.items()}
        self.events: list[AuditEvent] = []
        self.active_view = "pattern"
        self._store = store

    # ------------------------------------------------------------------
    # queries

    def select_region(self, rect: tuple[float, float, float, float]) -> list[str]:
        """Ids whose embedding point lies inside the rectangle, bounds inclusive."""
        x0, y0, x1, y1 = rect
        x0, x1 = min(x0, x1), max(x0, x1)
        y0, y1 = min(y0, y1), max(y0, y1)
        return sorted(
            d.det_id
            for d in self.detections.values()
            if x0 <= d.embed_x <= x1 and y0 <= d.embed_y <= y1
        )

    def state_of(self, det_id: str) -> dict:
        return dict(self.states[det_id])

    def set_active_view(self, view: str) -> None:
        if view not in VIEW_KEYS:
            raise FormatError(f"view must be one of {VIEW_KEYS}, got {view!r}")
        self.active_view = view

    def export_final(self) -> list[dict]:
        """All non-rejected detections with their current class and state."""
        out = []
        for det_id in sorted(self.detections):
            s = self.states[det_id]
            if s["state"] == "rejected":
                continue
            det = self.detections[det_id]
            record = det.to_json_dict()
            record["class"] = s["class"]
            record["state"] = s["state"]
            del record["features"]  # review metadata, not export payload
            out.append(record)
        return out

    def rejected_count(self) -> int:
        return sum(1 for s in self.states.values() if s["state"] == "rejected")

    # ------------------------------------------------------------------
    # mutations (all-or-nothing per batch; exactly one event each)

    def _check_ids(self, ids: list[str], forbid_rejected: bool) -> tuple[str, ...]:
        if not ids:
            raise FormatError("empty id batch")
        unknown = [i for i in ids if i not in self.detections]
        if unknown:
            raise KeyError(f"unknown detection ids: {unknown}")
        if forbid_rejected:
            rejected = [i for i in ids if self.states[i]["state"] == "rejected"]
            if rejected:
                raise FormatError(f"cannot modify rejected detections: {rejected}")
        return tuple(dict.fromkeys(ids))  # dedupe, keep order

    def _commit(self, event: AuditEvent) -> AuditEvent:
        # durable first: if the append fails, memory must not diverge from disk
        if self._store is not None:
            self._store.append_event(event)
        self.states = apply_event(self.states, event)
        self.events.append(event)
        return event

    def _next_event(self, actor: str, action: str, ids: tuple[str, ...], **kw) -> AuditEvent:
        return AuditEvent(
            seq=len(self.events) + 1,
            timestamp=time.time(),
            actor=actor,
            action=action,
            ids=ids,
            **kw,
        )

    def verify(self, ids: list[str], actor: str = "inspector") -> AuditEvent:
        batch = self._check_ids(ids, forbid_rejected=True)
        return self._commit(self._next_event(actor, "verify", batch))

    def reclassify(self, ids: list[str], new_class: str, actor: str = "inspector") -> AuditEvent:
        if new_class not in DEBRIS_CLASSES:
            raise FormatError(f"unknown class {new_class!r}")
        batch = self._check_ids(ids, forbid_rejected=True)
        old = {i: self.states[i]["class"] for i in batch}
        return self._commit(
            self._next_event(actor, "reclassify", batch, new_class=new_class, old_classes=old)
        )

    def reject(self, ids: list[str], actor: str = "inspector") -> AuditEvent:
        batch = self._check_ids(ids, forbid_rejected=False)
        return self._commit(self._next_event(actor, "reject", batch))

    def restore(self, ids: list[str], actor: str = "inspector") -> AuditEvent:
        batch = self._check_ids(ids, forbid_rejected=False)
        return self._commit(self._next_event(actor, "restore", batch))


class SessionStore:
    """Directory-backed persistence: initial.json + events.ndjson."""

    INITIAL = "initial.json"
    EVENTS = "events.ndjson"

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)

    @classmethod
    def create(
        cls, directory: str | Path, detections: list[FusedDetection], session_id: str = "session"
    ) -> "ReviewSession":
        store = cls(directory)
        store.directory.mkdir(parents=True, exist_ok=True)
        payload = {
            "session_id": session_id,
            "detections": [d.to_json_dict() for d in detections],
        }
        (store.directory / cls.INITIAL).write_text(
            json.dumps(payload, indent=2), encoding="utf-8"
        )
        (store.directory / cls.EVENTS).touch()
        return ReviewSession(session_id, detections, store=store)

    def open(self) -> ReviewSession:
        initial_path = self.directory / self.INITIAL
        if not initial_path.exists():
            raise FormatError(f"not a session directory: {self.directory}")
        payload = json.loads(initial_path.read_text(encoding="utf-8"))
        detections = [FusedDetection.from_json_dict(r) for r in payload["detections"]]
        session = ReviewSession(payload["session_id"], detections, store=self)
        for event in self.read_events():
            if event.seq != len(session.events) + 1:
                raise FormatError(
                    f"event log not dense: expected seq {len(session.events) + 1}, "
                    f"got {event.seq}"
                )
            session.states = apply_event(session.states, event)
            session.events.append(event)
        return session

    def read_events(self) -> list[AuditEvent]:
        path = self.directory / self.EVENTS
        if not path.exists():
            return []
        events = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                events.append(AuditEvent.from_json_dict(json.loads(line)))
        return events

    def append_event(self, event: AuditEvent) -> None:
        # durable append: the mutation is acknowledged only after fsync
        with open(self.directory / self.EVENTS, "a", encoding="utf-8") as f:
            f.write(json.dumps(event.to_json_dict()) + "\n")
            f.flush()
            import os

            os.fsync(f.fileno())
