/**
 * In-memory console state.
 *
 * The API key lives here for the tab's lifetime only - never persisted.
 * Update helpers are pure enough to unit-test without a DOM; rendering
 * subscribes to the single change callback.
 */

import type { AccessRequest, AuditRecord, ChainStatus } from './types.js';

export interface Session {
  apiKey: string;
  baseUrl: string;
  pollIntervalMs: number;
}

export interface ConsoleState {
  session: Session | null;
  banner: string | null;
  pending: AccessRequest[];
  audit: AuditRecord[];
  chain: ChainStatus | null;
  /** Requests with an in-flight or locally-failed decision; buttons disabled. */
  decisionLocked: Set<string>;
}

export function initialState(): ConsoleState {
  return {
    session: null,
    banner: null,
    pending: [],
    audit: [],
    chain: null,
    decisionLocked: new Set(),
  };
}

export const DEFAULT_POLL_INTERVAL_MS = 2000;

export function startSession(state: ConsoleState, apiKey: string, baseUrl = '',
                             pollIntervalMs = DEFAULT_POLL_INTERVAL_MS): void {
  state.session = { apiKey, baseUrl, pollIntervalMs };
  state.banner = null;
}

export function endSession(state: ConsoleState): void {
  state.session = null;
  state.pending = [];
  state.audit = [];
  state.chain = null;
  state.decisionLocked = new Set();
}

export function applyPending(state: ConsoleState, requests: AccessRequest[]): void {
  state.pending = requests;
  state.banner = null;
  // a request that left the pending list no longer needs its lock
  const pendingIds = new Set(requests.map((r) => r.id));
  for (const id of [...state.decisionLocked]) {
    if (!pendingIds.has(id)) state.decisionLocked.delete(id);
  }
}

export function applyAudit(state: ConsoleState, records: AuditRecord[],
                           chain: ChainStatus): void {
  state.audit = records;
  state.chain = chain;
}

export function applyFailure(state: ConsoleState, error: unknown): void {
  state.banner = error instanceof Error ? error.message : String(error);
}

export function lockDecision(state: ConsoleState, requestId: string): void {
  state.decisionLocked.add(requestId);
}

export function unlockDecision(state: ConsoleState, requestId: string): void {
  state.decisionLocked.delete(requestId);
}
