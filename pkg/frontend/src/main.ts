/**
 * Console wiring: session -> client -> two pollers (pending requests and
 * the audit chain) -> render. The audit badge comes from client-side hash
 * verification of the fetched records.
 */

import { ApiError, GatewayClient } from './api.js';
import { createPoller, type Poller } from './poller.js';
import {
  applyAudit,
  applyFailure,
  applyPending,
  endSession,
  initialState,
  lockDecision,
  startSession,
  unlockDecision,
} from './state.js';
import { renderApp } from './views.js';
import { verifyChain } from './verify.js';
import './style.css';

const state = initialState();
let client: GatewayClient | null = null;
let pendingPoller: Poller | null = null;
let auditPoller: Poller | null = null;

function render(): void {
  const mount = document.getElementById('app');
  if (!mount) return;
  mount.replaceChildren(
    renderApp(state, { onLogin: login, onDecide: decide, onLogout: logout }),
  );
}

function stopPollers(): void {
  pendingPoller?.stop();
  auditPoller?.stop();
  pendingPoller = auditPoller = null;
}

function login(apiKey: string): void {
  startSession(state, apiKey);
  client = new GatewayClient(state.session!.baseUrl, apiKey);
  const interval = state.session!.pollIntervalMs;

  pendingPoller = createPoller(
    () => client!.pendingRequests(),
    (requests) => {
      applyPending(state, requests);
      render();
    },
    (error) => {
      applyFailure(state, error);
      if (error instanceof ApiError && error.kind === 'unauthorized') logout();
      render();
    },
    interval,
  );
  auditPoller = createPoller(
    async () => {
      const records = await client!.auditRecords();
      return { records, chain: await verifyChain(records) };
    },
    ({ records, chain }) => {
      applyAudit(state, records, chain);
      render();
    },
    (error) => {
      applyFailure(state, error);
      render();
    },
    interval,
  );
  pendingPoller.start();
  auditPoller.start();
  render();
}

function logout(): void {
  stopPollers();
  client = null;
  endSession(state);
  render();
}

function decide(requestId: string, decision: 'approve' | 'reject', note: string): void {
  if (!client) return;
  lockDecision(state, requestId);
  render();
  client
    .decide(requestId, decision, note || undefined)
    .then(() => {
      void pendingPoller?.fetchNow();
      void auditPoller?.fetchNow();
    })
    .catch((error: unknown) => {
      // Forbidden / InvalidState surface in the banner; the row stays
      // locked until the next poll removes or refreshes it.
      applyFailure(state, error);
      if (!(error instanceof ApiError) || error.kind === 'network') {
        unlockDecision(state, requestId);
      }
      render();
    });
}

render();
