"""Hash-chained, append-only audit log.

Each record links the acting user, the event, and an event payload into a
SHA-256 chain:

    hash = SHA-256(prev_hash || canonical_json(record without "hash"))

where canonical JSON has lexicographically sorted keys and no
insignificant whitespace, and record 0 carries a prev_hash of 64 zeros.
Storage is one canonical-JSON record per line in a single append-only
file, so any standard tool can inspect it, and verification re-reads the
file from disk - a crash-truncated or tampered line surfaces as Broken at
that sequence number.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping

from .model import canonical_json, sha256_hex

GENESIS_HASH = "0" * 64

EVENTS = (
    "access_requested",
    "access_auto_approved",
    "access_approved",
    "access_rejected",
    "query_allowed",
    "query_denied",
    "query_executed",
)

# Beyond product_id (mandatory everywhere), each event requires these keys.
_REQUIRED_KEYS = {
    "query_allowed": ("purpose_text", "purpose_category", "sql_text"),
    "query_denied": ("purpose_text", "purpose_category", "sql_text", "verdict_reasons"),
    "query_executed": ("purpose_text", "purpose_category", "sql_text", "result_digest"),
}


class AuditError(Exception):
    pass


class PayloadError(AuditError):
    """The payload lacks a key its event type mandates."""


class StorageError(AuditError):
    """The append could not be persisted."""


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    timestamp: str
    actor: str
    event: str
    payload: dict
    prev_hash: str
    hash: str

    def body(self) -> dict:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "event": self.event,
            "payload": self.payload,
            "prev_hash": self.prev_hash,
        }

    def to_json(self) -> dict:
        doc = self.body()
        doc["hash"] = self.hash
        return doc


def compute_hash(prev_hash: str, body: Mapping) -> str:
    return sha256_hex(prev_hash + canonical_json(body))


def _default_clock() -> datetime:
    return datetime.now(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


class AuditLog:
    """Single-writer append-only log; reads of already-appended records are
    safe from any thread."""

    def __init__(self, path: Path | str, clock: Callable[[], datetime] | None = None):
        self.path = Path(path)
        self.clock = clock or _default_clock
        self._lock = threading.Lock()
        self._records: list[AuditRecord] = []
        if self.path.exists():
            self._records = list(read_records(self.path))

    @property
    def records(self) -> tuple[AuditRecord, ...]:
        return tuple(self._records)

    def append(self, event: str, actor: str, payload: Mapping) -> AuditRecord:
        if event not in EVENTS:
            raise PayloadError(f"unknown event {event!r}")
        if "product_id" not in payload:
            raise PayloadError(f"payload for {event!r} lacks mandatory key 'product_id'")
        for key in _REQUIRED_KEYS.get(event, ()):
            if key not in payload:
                raise PayloadError(f"payload for {event!r} lacks mandatory key {key!r}")
        with self._lock:
            prev_hash = self._records[-1].hash if self._records else GENESIS_HASH
            body = {
                "seq": len(self._records),
                "timestamp": format_timestamp(self.clock()),
                "actor": actor,
                "event": event,
                "payload": dict(payload),
                "prev_hash": prev_hash,
            }
            record = AuditRecord(hash=compute_hash(prev_hash, body), **body)
            line = canonical_json(record.to_json()) + "\n"
            try:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line)
                    fh.flush()
                    os.fsync(fh.fileno())
            except OSError as exc:
                raise StorageError(f"cannot append to {self.path}: {exc}") from exc
            self._records.append(record)
            return record

    def query(self, actor: str | None = None, product_id: str | None = None,
              event: str | None = None, since: str | None = None) -> list[AuditRecord]:
        """Conjunctive filtering, seq-ascending."""
        out = []
        for record in self._records:
            if actor is not None and record.actor != actor:
                continue
            if product_id is not None and record.payload.get("product_id") != product_id:
                continue
            if event is not None and record.event != event:
                continue
            if since is not None and record.timestamp < since:
                continue
            out.append(record)
        return out

    def verify(self) -> "ChainStatus":
        return verify_chain(self.path)


@dataclass(frozen=True)
class ChainStatus:
    ok: bool
    first_bad_seq: int | None = None

    def to_json(self) -> dict:
        if self.ok:
            return {"ok": True}
        return {"ok": False, "first_bad_seq": self.first_bad_seq}


def read_records(path: Path | str) -> list[AuditRecord]:
    """Parse the log file, trusting nothing; use verify_chain for integrity."""
    records = []
    raw = Path(path).read_bytes()
    for i, line in enumerate(_lines(raw)):
        doc = json.loads(line.decode("utf-8"))
        records.append(
            AuditRecord(
                seq=doc["seq"],
                timestamp=doc["timestamp"],
                actor=doc["actor"],
                event=doc["event"],
                payload=doc["payload"],
                prev_hash=doc["prev_hash"],
                hash=doc["hash"],
            )
        )
    return records


def _lines(raw: bytes) -> list[bytes]:
    chunks = raw.split(b"\n")
    if chunks and chunks[-1] == b"":
        chunks.pop()
    return chunks


def verify_chain(path: Path | str) -> ChainStatus:
    """Recompute every hash straight off the disk bytes.

    Ok iff every record parses, seqs run 0..n-1 with no gaps, each
    prev_hash equals the previous record's hash, and every stored hash
    matches its recomputation. Otherwise Broken at the first bad index.
    """
    path = Path(path)
    if not path.exists():
        return ChainStatus(ok=True)
    prev_hash = GENESIS_HASH
    for i, line in enumerate(_lines(path.read_bytes())):
        try:
            doc = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            return ChainStatus(ok=False, first_bad_seq=i)
        if not isinstance(doc, dict):
            return ChainStatus(ok=False, first_bad_seq=i)
        try:
            body = {
                "seq": doc["seq"],
                "timestamp": doc["timestamp"],
                "actor": doc["actor"],
                "event": doc["event"],
                "payload": doc["payload"],
                "prev_hash": doc["prev_hash"],
            }
            stored_hash = doc["hash"]
        except KeyError:
            return ChainStatus(ok=False, first_bad_seq=i)
        if doc["seq"] != i:
            return ChainStatus(ok=False, first_bad_seq=i)
        if doc["prev_hash"] != prev_hash:
            return ChainStatus(ok=False, first_bad_seq=i)
        if compute_hash(prev_hash, body) != stored_hash:
            return ChainStatus(ok=False, first_bad_seq=i)
        prev_hash = stored_hash
    return ChainStatus(ok=True)
