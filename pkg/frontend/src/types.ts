/** Wire types: exact JSON shapes of the gateway API. */

export type PurposeCategory =
  | 'analytics'
  | 'reporting'
  | 'marketing_outreach'
  | 'support_operations'
  | 'research'
  | 'other';

export type WarningCode =
  | 'pii_exposure'
  | 'purpose_mismatch'
  | 'classification_exceeded'
  | 'row_limit_risk';

export interface GovernanceWarning {
  code: WarningCode;
  message: string;
  column_refs: string[];
}

export interface GovernanceDecision {
  effect: 'auto_approve' | 'require_manual' | 'deny';
  matched_rule: string;
  warnings: GovernanceWarning[];
}

export type RequestStatus = 'pending' | 'approved' | 'auto_approved' | 'rejected';

export interface AccessRequest {
  id: string;
  product_id: string;
  requester: string;
  purpose: { text: string; category: PurposeCategory };
  status: RequestStatus;
  decision: GovernanceDecision;
  reviewer: string | null;
  review_note: string | null;
  created_at: string;
  decided_at: string | null;
}

export interface AuditRecord {
  seq: number;
  timestamp: string;
  actor: string;
  event: string;
  payload: Record<string, unknown>;
  prev_hash: string;
  hash: string;
}

export interface ChainStatus {
  ok: boolean;
  firstBadSeq: number | null;
}

export interface ProductSummary {
  id: string;
  name: string;
  description: string;
  owner: string;
}

export interface AuditFilters {
  actor?: string;
  product_id?: string;
  event?: string;
  since?: string;
}
