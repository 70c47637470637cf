/**
 * Client-side audit chain verification.
 *
 * Recomputes each record's hash from the fetched records alone:
 *
 *     hash = SHA-256(prev_hash || canonicalJson(record without "hash"))
 *
 * canonicalJson byte-matches the gateway's canonical JSON (keys sorted,
 * no insignificant whitespace, raw UTF-8) for the ASCII snake_case keys
 * the gateway emits, so a green badge here is as strong as the server's
 * own verification for the fetched window.
 */

import type { AuditRecord, ChainStatus } from './types.js';

export const GENESIS_HASH = '0'.repeat(64);

export function canonicalJson(value: unknown): string {
  if (value === null || typeof value !== 'object') {
    return JSON.stringify(value);
  }
  if (Array.isArray(value)) {
    return `[${value.map(canonicalJson).join(',')}]`;
  }
  const entries = Object.entries(value as Record<string, unknown>)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([key, val]) => `${JSON.stringify(key)}:${canonicalJson(val)}`);
  return `{${entries.join(',')}}`;
}

export async function sha256Hex(text: string): Promise<string> {
  const digest = await crypto.subtle.digest('SHA-256', new TextEncoder().encode(text));
  return Array.from(new Uint8Array(digest))
    .map((byte) => byte.toString(16).padStart(2, '0'))
    .join('');
}

function body(record: AuditRecord): Record<string, unknown> {
  return {
    seq: record.seq,
    timestamp: record.timestamp,
    actor: record.actor,
    event: record.event,
    payload: record.payload,
    prev_hash: record.prev_hash,
  };
}

/** Verify a full chain fetched from seq 0; empty input is a valid chain. */
export async function verifyChain(records: AuditRecord[]): Promise<ChainStatus> {
  let prevHash = GENESIS_HASH;
  for (let i = 0; i < records.length; i++) {
    const record = records[i]!;
    if (record.seq !== i || record.prev_hash !== prevHash) {
      return { ok: false, firstBadSeq: i };
    }
    const recomputed = await sha256Hex(prevHash + canonicalJson(body(record)));
    if (recomputed !== record.hash) {
      return { ok: false, firstBadSeq: i };
    }
    prevHash = record.hash;
  }
  return { ok: true, firstBadSeq: null };
}
