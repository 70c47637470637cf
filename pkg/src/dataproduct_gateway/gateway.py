"""Marketplace gateway: the access-request lifecycle and the governed
query path, tying catalog, governance, sqlguard, executor, and audit
together behind one service object.

All mutations (request store, audit appends) are serialized through a
single lock; registry metadata and loaded datasets are immutable after
startup, so reads need no coordination.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from . import catalog, governance, sqlguard
from .audit import AuditLog, format_timestamp
from .catalog import DataContract, DataProduct, ProductDetail, ProductSummary, Registry, User
from .executor import ResultSet, Table, execute, load_dataset
from .governance import DeclaredPurpose, GovernanceDecision, RuleEvaluator
from .sqlguard import ContractViolation, ParseError

REQUEST_STATUSES = ("pending", "approved", "auto_approved", "rejected")
ACTIVE_STATUSES = ("pending", "approved", "auto_approved")
GRANTING_STATUSES = ("approved", "auto_approved")


class GatewayError(Exception):
    pass


class NotFound(GatewayError):
    pass


class Conflict(GatewayError):
    pass


class ProductInactive(GatewayError):
    pass


class InvalidState(GatewayError):
    pass


class Forbidden(GatewayError):
    pass


class AccessDenied(GatewayError):
    pass


@dataclass
class AccessRequest:
    id: str
    product_id: str
    requester: str
    purpose: DeclaredPurpose
    status: str
    decision: GovernanceDecision
    created_at: str
    reviewer: str | None = None
    review_note: str | None = None
    decided_at: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "product_id": self.product_id,
            "requester": self.requester,
            "purpose": {"text": self.purpose.text, "category": self.purpose.category},
            "status": self.status,
            "decision": self.decision.to_json(),
            "reviewer": self.reviewer,
            "review_note": self.review_note,
            "created_at": self.created_at,
            "decided_at": self.decided_at,
        }


@dataclass(frozen=True)
class AccessGrant:
    """View over an approving request; what run_query checks for."""

    requester: str
    product_id: str
    purpose: DeclaredPurpose


@dataclass(frozen=True)
class GovernanceRejection:
    """A structured refusal, not a transport error."""

    reasons: tuple[governance.DenialReason, ...]

    def to_json(self) -> dict:
        return {"rejected": True, "reasons": [r.to_json() for r in self.reasons]}


class RequestStore:
    """In-memory access-request store; mutate only under the service lock."""

    def __init__(self):
        self._requests: dict[str, AccessRequest] = {}

    def add(self, request: AccessRequest) -> None:
        self._requests[request.id] = request

    def get(self, request_id: str) -> AccessRequest | None:
        return self._requests.get(request_id)

    def all(self) -> list[AccessRequest]:
        return list(self._requests.values())

    def for_pair(self, requester: str, product_id: str) -> list[AccessRequest]:
        return [
            r for r in self._requests.values()
            if r.requester == requester and r.product_id == product_id
        ]

    def active_request(self, requester: str, product_id: str) -> AccessRequest | None:
        for request in self.for_pair(requester, product_id):
            if request.status in ACTIVE_STATUSES:
                return request
        return None

    def grant_for(self, requester: str, product_id: str) -> AccessGrant | None:
        for request in self.for_pair(requester, product_id):
            if request.status in GRANTING_STATUSES:
                return AccessGrant(requester, product_id, request.purpose)
        return None

    def access_status(self, requester: str, product_id: str) -> str:
        """State collapsed for product detail: active > pending > rejected > none."""
        statuses = {r.status for r in self.for_pair(requester, product_id)}
        if statuses & set(GRANTING_STATUSES):
            return "active"
        if "pending" in statuses:
            return "pending"
        if "rejected" in statuses:
            return "rejected"
        return "none"

    def list(self, status: str | None = None, product_id: str | None = None,
             requester: str | None = None) -> list[AccessRequest]:
        out = [
            r for r in self._requests.values()
            if (status is None or r.status == status)
            and (product_id is None or r.product_id == product_id)
            and (requester is None or r.requester == requester)
        ]
        return sorted(out, key=lambda r: r.id)


def _default_clock() -> datetime:
    return datetime.now(timezone.utc)


def _sequential_ids(prefix: str) -> Callable[[], str]:
    counter = itertools.count(1)
    return lambda: f"{prefix}-{next(counter):06d}"


@dataclass
class GatewayConfig:
    registry_dir: Path
    audit_file: Path
    host: str = "127.0.0.1"
    port: int = 8080
    console_dir: Path | None = None


class GatewayService:
    def __init__(
        self,
        registry: Registry,
        audit_log: AuditLog,
        clock: Callable[[], datetime] | None = None,
        id_factory: Callable[[], str] | None = None,
        evaluator=None,
    ):
        self.registry = registry
        self.audit = audit_log
        self.clock = clock or _default_clock
        self.id_factory = id_factory or _sequential_ids("ar")
        self.evaluator = evaluator or RuleEvaluator()
        self.store = RequestStore()
        self._lock = threading.Lock()
        self.tables: dict[str, Table] = self._load_datasets()

    def _load_datasets(self) -> dict[str, Table]:
        """Resolve every dataset_ref and cross-check it against its contract.

        A port's dataset_ref names a CSV whose columns must match, in order,
        a same-named table in the port's contract; the contract's column
        definitions are authoritative for classifications.
        """
        tables: dict[str, Table] = {}
        for product in self.registry.products.values():
            for port in product.output_ports:
                contract = self.registry.contracts[port.contract_ref]
                name = port.dataset_ref
                if name in tables:
                    continue
                if name not in contract.tables:
                    raise catalog.RegistryError(
                        f"dataset {name!r} has no table definition in contract {contract.id!r}"
                    )
                table = load_dataset(
                    self.registry.dataset_dir / f"{name}.csv",
                    self.registry.dataset_dir / f"{name}.schema",
                )
                declared = contract.tables[name]
                loaded = [(c.name, c.value_type, c.classification) for c in table.columns]
                expected = [(c.name, c.value_type, c.classification) for c in declared]
                if loaded != expected:
                    raise catalog.RegistryError(
                        f"dataset {name!r} schema disagrees with contract {contract.id!r}"
                    )
                tables[name] = Table(name=table.name, columns=declared, rows=table.rows)
        return tables

    # -- auth ------------------------------------------------------------

    def user_by_key(self, api_key: str) -> User | None:
        return self.registry.user_by_key(api_key)

    # -- discovery -------------------------------------------------------

    def search(self, terms: list[str], status: str | None = None) -> list[ProductSummary]:
        return catalog.search_products(self.registry, terms, status)

    def list_products(self, status: str | None = None) -> list[ProductSummary]:
        return catalog.list_products(self.registry, status)

    def product_detail(self, product_id: str, caller: User) -> ProductDetail:
        try:
            return catalog.get_product(self.registry, product_id, caller, self.store)
        except catalog.NotFound as exc:
            raise NotFound(str(exc)) from exc

    # -- access requests ---------------------------------------------------

    def _product_and_contract(self, product_id: str) -> tuple[DataProduct, DataContract]:
        product = self.registry.products.get(product_id)
        if product is None:
            raise NotFound(f"no such product: {product_id}")
        return product, self.registry.contracts_for(product)[0]

    def create_access_request(self, caller: User, product_id: str, purpose_text: str,
                              purpose_category: str | None = None) -> AccessRequest:
        product = self.registry.products.get(product_id)
        if product is None:
            raise NotFound(f"no such product: {product_id}")
        if product.status != "active":
            raise ProductInactive(f"product {product_id!r} is {product.status}")
        purpose = governance.resolve_purpose(purpose_text, purpose_category)

        with self._lock:
            existing = self.store.active_request(caller.id, product_id)
            if existing is not None:
                raise Conflict(
                    f"requester {caller.id!r} already has an active request "
                    f"({existing.id}, {existing.status}) for {product_id!r}"
                )
            decision = self._evaluate_access_all_contracts(product, caller, purpose)
            now = format_timestamp(self.clock())
            request = AccessRequest(
                id=self.id_factory(),
                product_id=product_id,
                requester=caller.id,
                purpose=purpose,
                status="pending",
                decision=decision,
                created_at=now,
            )
            base_payload = {
                "product_id": product_id,
                "request_id": request.id,
                "purpose_text": purpose.text,
                "purpose_category": purpose.category,
            }
            self.audit.append("access_requested", caller.id, base_payload)
            if decision.effect == "auto_approve":
                request.status = "auto_approved"
                request.decided_at = now
                self.audit.append("access_auto_approved", caller.id, base_payload)
            elif decision.effect == "deny":
                request.status = "rejected"
                request.reviewer = "system"
                request.decided_at = now
                payload = dict(base_payload)
                payload["warnings"] = [w.to_json() for w in decision.warnings]
                self.audit.append("access_rejected", caller.id, payload)
            self.store.add(request)
            return request

    def _evaluate_access_all_contracts(self, product: DataProduct, caller: User,
                                       purpose: DeclaredPurpose) -> GovernanceDecision:
        """Products usually carry one contract; with several, the most
        restrictive effect wins and warnings are concatenated."""
        severity = {"auto_approve": 0, "require_manual": 1, "deny": 2}
        decisions = [
            self.evaluator.evaluate_access(product, contract, caller, purpose,
                                           self.registry.policies)
            for contract in self.registry.contracts_for(product)
        ]
        worst = max(decisions, key=lambda d: severity[d.effect])
        warnings: list = []
        for decision in decisions:
            for warning in decision.warnings:
                if warning not in warnings:
                    warnings.append(warning)
        return GovernanceDecision(worst.effect, worst.matched_rule, tuple(warnings))

    def decide_request(self, reviewer: User, request_id: str, decision: str,
                       note: str | None = None) -> AccessRequest:
        if decision not in ("approve", "reject"):
            raise ValueError(f"decision must be approve or reject, got {decision!r}")
        with self._lock:
            request = self.store.get(request_id)
            if request is None:
                raise NotFound(f"no such access request: {request_id}")
            if request.status != "pending":
                raise InvalidState(f"request {request_id} is {request.status}, not pending")
            product = self.registry.products[request.product_id]
            if reviewer.team_id != product.owner_team:
                raise Forbidden(
                    f"user {reviewer.id!r} is not in owner team {product.owner_team!r}"
                )
            request.status = "approved" if decision == "approve" else "rejected"
            request.reviewer = reviewer.id
            request.review_note = note
            request.decided_at = format_timestamp(self.clock())
            event = "access_approved" if decision == "approve" else "access_rejected"
            self.audit.append(event, reviewer.id, {
                "product_id": request.product_id,
                "request_id": request.id,
                "requester": request.requester,
                "note": note,
            })
            return request

    def list_requests(self, status: str | None = None, product_id: str | None = None,
                      requester: str | None = None) -> list[AccessRequest]:
        return self.store.list(status=status, product_id=product_id, requester=requester)

    # -- governed query path ----------------------------------------------

    def run_query(self, caller: User, product_id: str, sql_text: str,
                  purpose_text: str | None = None) -> ResultSet | GovernanceRejection:
        """Pipeline: resolve product -> require grant -> parse -> validate ->
        evaluate purpose -> execute -> audit. Every call leaves at least one
        audit record, whatever the outcome."""
        def denied(purpose: DeclaredPurpose | None, reasons: list[dict]):
            self._audit_query("query_denied", caller, product_id, sql_text, purpose,
                              verdict_reasons=reasons)

        # resolved early so even pre-grant denials audit the declared purpose
        supplied_purpose = governance.resolve_purpose(purpose_text) if purpose_text else None

        product = self.registry.products.get(product_id)
        if product is None:
            denied(supplied_purpose,
                   [{"code": "not_found", "message": f"no such product: {product_id}"}])
            raise NotFound(f"no such product: {product_id}")

        grant = self.store.grant_for(caller.id, product_id)
        if grant is None:
            denied(supplied_purpose,
                   [{"code": "access_denied",
                     "message": "caller holds no active grant for this product"}])
            raise AccessDenied(f"user {caller.id!r} has no active grant for {product_id!r}")

        session_purpose = supplied_purpose or grant.purpose

        contracts = self.registry.contracts_for(product)
        try:
            ast = sqlguard.parse_sql(sql_text)
            contract = next((c for c in contracts if ast.from_table.name in c.tables),
                            contracts[0])
            validated = sqlguard.validate(ast, contract)
        except ParseError as exc:
            denied(session_purpose, [{"code": "parse_error", "message": str(exc)}])
            raise
        except ContractViolation as exc:
            denied(session_purpose, [{"code": "validation_error", "kind": exc.kind,
                                      "message": str(exc)}])
            raise

        verdict = self.evaluator.evaluate_query(grant, validated, contract, session_purpose)
        if not verdict.allowed:
            denied(session_purpose, [r.to_json() for r in verdict.reasons])
            return GovernanceRejection(reasons=verdict.reasons)

        result = execute(validated, self.tables)
        self._audit_query("query_allowed", caller, product_id, sql_text, session_purpose)
        self._audit_query("query_executed", caller, product_id, sql_text, session_purpose,
                          result_digest=result.digest())
        return result

    def _audit_query(self, event: str, caller: User, product_id: str, sql_text: str,
                     purpose: DeclaredPurpose | None, **extra) -> None:
        payload = {
            "product_id": product_id,
            "sql_text": sql_text,
            "purpose_text": purpose.text if purpose else "",
            "purpose_category": purpose.category if purpose else "other",
        }
        payload.update(extra)
        with self._lock:
            self.audit.append(event, caller.id, payload)

    # -- audit pass-through -------------------------------------------------

    def audit_records(self, actor: str | None = None, product_id: str | None = None,
                      event: str | None = None, since: str | None = None):
        return self.audit.query(actor=actor, product_id=product_id, event=event, since=since)

    def verify_audit(self):
        return self.audit.verify()


def build_service(config: GatewayConfig, clock: Callable[[], datetime] | None = None,
                  id_factory: Callable[[], str] | None = None) -> GatewayService:
    registry = catalog.load_registry(config.registry_dir)
    audit_log = AuditLog(config.audit_file, clock=clock or _default_clock)
    return GatewayService(registry, audit_log, clock=clock, id_factory=id_factory)
