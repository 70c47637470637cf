import { describe, expect, it } from 'vitest';

import {
  applyFailure,
  applyPending,
  endSession,
  initialState,
  lockDecision,
  startSession,
} from '../src/state.js';
import type { AccessRequest } from '../src/types.js';

function request(id: string): AccessRequest {
  return {
    id,
    product_id: 'customers',
    requester: 'alice',
    purpose: { text: 'x', category: 'analytics' },
    status: 'pending',
    decision: { effect: 'require_manual', matched_rule: 'default', warnings: [] },
    reviewer: null,
    review_note: null,
    created_at: '2026-01-01T00:00:00.000000Z',
    decided_at: null,
  };
}

describe('console state', () => {
  it('keeps the api key in memory only for the session', () => {
    const state = initialState();
    startSession(state, 'key-dana-owner');
    expect(state.session?.apiKey).toBe('key-dana-owner');
    expect(state.session?.pollIntervalMs).toBe(2000);
    endSession(state);
    expect(state.session).toBeNull();
  });

  it('applyPending clears the banner and stale decision locks', () => {
    const state = initialState();
    applyFailure(state, new Error('temporary failure'));
    lockDecision(state, 'ar-1');
    lockDecision(state, 'ar-2');
    applyPending(state, [request('ar-2')]);
    expect(state.banner).toBeNull();
    // ar-1 left the pending list (decided elsewhere): its lock is gone
    expect(state.decisionLocked.has('ar-1')).toBe(false);
    // ar-2 is still pending and still locked (its POST is in flight)
    expect(state.decisionLocked.has('ar-2')).toBe(true);
  });

  it('applyFailure stringifies unknown errors', () => {
    const state = initialState();
    applyFailure(state, 'plain failure');
    expect(state.banner).toBe('plain failure');
  });

  it('endSession forgets everything', () => {
    const state = initialState();
    startSession(state, 'k');
    applyPending(state, [request('ar-9')]);
    lockDecision(state, 'ar-9');
    endSession(state);
    expect(state.pending).toEqual([]);
    expect(state.decisionLocked.size).toBe(0);
    expect(state.audit).toEqual([]);
  });
});
