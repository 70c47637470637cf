/**
 * Typed gateway API client.
 *
 * Every console read and the single console write (the decision POST) go
 * through here; the console holds no governance logic of its own.
 */

import type { AccessRequest, AuditFilters, AuditRecord, ProductSummary } from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Gateway or transport failure, normalized for banner rendering. */
export class ApiError extends Error {
  constructor(
    readonly kind: 'network' | 'unauthorized' | 'forbidden' | 'invalid_state' | 'gateway',
    readonly status: number | null,
    message: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

function classify(status: number, body: { error?: string; message?: string }): ApiError {
  const message = body.message ?? body.error ?? `HTTP ${status}`;
  if (status === 401) return new ApiError('unauthorized', status, message);
  if (status === 403) return new ApiError('forbidden', status, message);
  if (status === 409 && body.error === 'invalid_state') {
    return new ApiError('invalid_state', status, message);
  }
  return new ApiError('gateway', status, message);
}

export class GatewayClient {
  private readonly fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string,
    private readonly apiKey: string,
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, {
        method,
        headers: {
          'X-Api-Key': this.apiKey,
          ...(body !== undefined ? { 'Content-Type': 'application/json' } : {}),
        },
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (err) {
      throw new ApiError('network', null, `gateway unreachable: ${String(err)}`);
    }
    const text = await response.text();
    const parsed: unknown = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw classify(response.status, (parsed ?? {}) as { error?: string; message?: string });
    }
    return parsed as T;
  }

  health(): Promise<{ status: string; products: number; audit_records: number }> {
    return this.request('GET', '/api/health');
  }

  listProducts(): Promise<ProductSummary[]> {
    return this.request('GET', '/api/dataproducts');
  }

  pendingRequests(): Promise<AccessRequest[]> {
    return this.request('GET', '/api/accessrequests?status=pending');
  }

  requestsWithStatus(status: string): Promise<AccessRequest[]> {
    return this.request('GET', `/api/accessrequests?status=${encodeURIComponent(status)}`);
  }

  /** The console's only mutation. */
  decide(requestId: string, decision: 'approve' | 'reject', note?: string): Promise<AccessRequest> {
    return this.request('POST', `/api/accessrequests/${encodeURIComponent(requestId)}/decision`, {
      decision,
      ...(note ? { note } : {}),
    });
  }

  auditRecords(filters: AuditFilters = {}): Promise<AuditRecord[]> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value) params.set(key, value);
    }
    const suffix = params.toString() ? `?${params.toString()}` : '';
    return this.request('GET', `/api/audit${suffix}`);
  }

  verifyAudit(): Promise<{ ok: boolean; first_bad_seq?: number }> {
    return this.request('GET', '/api/audit/verify');
  }
}
