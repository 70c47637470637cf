/**
 * DOM rendering. Everything shown comes from gateway responses held in
 * ConsoleState; these functions only lay it out.
 */

import type { ConsoleState } from './state.js';
import type { AccessRequest, AuditRecord, GovernanceWarning } from './types.js';

export interface DecisionHandler {
  (requestId: string, decision: 'approve' | 'reject', note: string): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderBanner(state: ConsoleState): HTMLElement {
  const banner = el('div', state.banner ? 'banner banner-error' : 'banner banner-hidden');
  banner.id = 'banner';
  if (state.banner) banner.textContent = state.banner;
  return banner;
}

export function renderLogin(onSubmit: (apiKey: string) => void): HTMLElement {
  const wrap = el('div', 'login');
  wrap.append(el('h1', undefined, 'Data Product Console'));
  wrap.append(el('p', 'hint',
    'Enter your marketplace API key. It is kept in memory only.'));
  const form = el('form');
  const input = el('input');
  input.type = 'password';
  input.placeholder = 'X-Api-Key';
  input.id = 'api-key-input';
  const button = el('button', undefined, 'Open console');
  button.type = 'submit';
  form.append(input, button);
  form.addEventListener('submit', (event) => {
    event.preventDefault();
    if (input.value.trim()) onSubmit(input.value.trim());
  });
  wrap.append(form);
  return wrap;
}

function warningBadge(warning: GovernanceWarning): HTMLElement {
  const badge = el('li', `warning warning-${warning.code}`);
  badge.append(el('span', 'warning-code', warning.code));
  badge.append(el('span', 'warning-message', ` ${warning.message}`));
  if (warning.column_refs.length) {
    badge.append(el('span', 'warning-columns', ` [${warning.column_refs.join(', ')}]`));
  }
  return badge;
}

function requestCard(request: AccessRequest, locked: boolean,
                     onDecide: DecisionHandler): HTMLElement {
  const card = el('div', 'request-card');
  card.dataset['requestId'] = request.id;

  const head = el('div', 'request-head');
  head.append(el('strong', undefined, request.requester));
  head.append(el('span', undefined, ' requests '));
  head.append(el('strong', undefined, request.product_id));
  head.append(el('span', 'request-id', ` (${request.id})`));
  card.append(head);

  const purpose = el('div', 'request-purpose');
  purpose.append(el('span', 'purpose-text', `"${request.purpose.text}"`));
  purpose.append(el('span', `purpose-category category-${request.purpose.category}`,
    ` ${request.purpose.category}`));
  card.append(purpose);

  if (request.decision.warnings.length) {
    const list = el('ul', 'warnings');
    for (const warning of request.decision.warnings) list.append(warningBadge(warning));
    card.append(list);
  }

  const note = el('input', 'note-input');
  note.placeholder = 'review note (optional)';
  const approve = el('button', 'approve', 'Approve');
  const reject = el('button', 'reject', 'Reject');
  approve.disabled = reject.disabled = locked;
  for (const [button, decision] of [[approve, 'approve'], [reject, 'reject']] as const) {
    button.addEventListener('click', () => {
      // lock immediately so a double click cannot fire a second POST
      approve.disabled = reject.disabled = true;
      onDecide(request.id, decision, note.value);
    });
  }
  const actions = el('div', 'request-actions');
  actions.append(note, approve, reject);
  card.append(actions);
  return card;
}

export function renderPending(state: ConsoleState, onDecide: DecisionHandler): HTMLElement {
  const section = el('section', 'pending');
  section.id = 'pending';
  section.append(el('h2', undefined, 'Pending access requests'));
  if (!state.pending.length) {
    section.append(el('p', 'empty-state', 'Nothing awaiting review.'));
    return section;
  }
  for (const request of state.pending) {
    section.append(requestCard(request, state.decisionLocked.has(request.id), onDecide));
  }
  return section;
}

function auditRow(record: AuditRecord): HTMLElement {
  const row = el('tr', `audit-row event-${record.event}`);
  row.append(el('td', undefined, String(record.seq)));
  row.append(el('td', undefined, record.timestamp));
  row.append(el('td', undefined, record.actor));
  row.append(el('td', undefined, record.event));
  row.append(el('td', 'payload', JSON.stringify(record.payload)));
  return row;
}

export function renderAudit(state: ConsoleState): HTMLElement {
  const section = el('section', 'audit');
  section.id = 'audit';
  const head = el('h2', undefined, 'Audit chain ');
  const badge = el('span');
  badge.id = 'chain-badge';
  if (state.chain === null) {
    badge.className = 'badge badge-unknown';
    badge.textContent = 'verifying…';
  } else if (state.chain.ok) {
    badge.className = 'badge badge-ok';
    badge.textContent = 'chain verified';
  } else {
    badge.className = 'badge badge-broken';
    badge.textContent = `chain BROKEN at seq ${state.chain.firstBadSeq}`;
  }
  head.append(badge);
  section.append(head);

  if (!state.audit.length) {
    section.append(el('p', 'empty-state', 'No audit records yet.'));
    return section;
  }
  const table = el('table', 'audit-table');
  const header = el('tr');
  for (const title of ['seq', 'timestamp', 'actor', 'event', 'payload']) {
    header.append(el('th', undefined, title));
  }
  table.append(header);
  for (const record of state.audit) table.append(auditRow(record));
  section.append(table);
  return section;
}

export function renderApp(state: ConsoleState, handlers: {
  onLogin: (apiKey: string) => void;
  onDecide: DecisionHandler;
  onLogout: () => void;
}): HTMLElement {
  const root = el('div', 'app');
  root.append(renderBanner(state));
  if (!state.session) {
    root.append(renderLogin(handlers.onLogin));
    return root;
  }
  const bar = el('div', 'topbar');
  bar.append(el('span', 'title', 'Data Product Console'));
  const logout = el('button', 'logout', 'Forget key');
  logout.addEventListener('click', handlers.onLogout);
  bar.append(logout);
  root.append(bar);
  root.append(renderPending(state, handlers.onDecide));
  root.append(renderAudit(state));
  return root;
}
