"""Deterministic governance engine.

Classifies declared purposes, decides access requests against ordered
policy rules and contract terms, and re-checks every query at execution
time. All functions are pure over immutable inputs: identical inputs give
identical decisions, bytewise, after canonical serialization.

An LLM-backed evaluator can be plugged in behind the Evaluator protocol;
only the rule engine ships here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Protocol

from .model import CLASSIFICATION_RANK, CLASSIFICATIONS, PURPOSE_CATEGORIES

WARNING_CODES = ("pii_exposure", "purpose_mismatch", "classification_exceeded", "row_limit_risk")

EFFECTS = ("auto_approve", "require_manual", "deny")

# Keyword families checked in this exact order; the first family with any
# case-insensitive substring hit wins.
PURPOSE_KEYWORDS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("marketing_outreach", ("campaign", "marketing", "email", "outreach")),
    ("support_operations", ("support", "ticket")),
    ("reporting", ("report", "dashboard")),
    ("research", ("research", "study")),
    ("analytics", ("top", "revenue", "analy", "customer insight")),
)


def classify_purpose(text: str) -> str:
    """Map free text to a purpose category via the keyword families above."""
    if not text:
        raise ValueError("purpose text must be non-empty")
    lowered = text.lower()
    for category, keywords in PURPOSE_KEYWORDS:
        if any(keyword in lowered for keyword in keywords):
            return category
    return "other"


@dataclass(frozen=True)
class DeclaredPurpose:
    text: str
    category: str

    def __post_init__(self):
        if not self.text:
            raise ValueError("purpose text must be non-empty")
        if self.category not in PURPOSE_CATEGORIES:
            raise ValueError(f"unknown purpose category {self.category!r}")


def resolve_purpose(text: str, category: str | None = None) -> DeclaredPurpose:
    """Build a DeclaredPurpose; an explicit category always wins over the
    keyword classifier."""
    return DeclaredPurpose(text=text, category=category or classify_purpose(text))


@dataclass(frozen=True)
class RuleMatch:
    # A contract matches max_classification when its most sensitive column
    # is at or below that level.
    max_classification: str | None = None
    purpose_in: frozenset[str] | None = None
    same_team: bool | None = None

    def is_empty(self) -> bool:
        return (
            self.max_classification is None
            and self.purpose_in is None
            and self.same_team is None
        )


@dataclass(frozen=True)
class PolicyRule:
    rule_id: str
    priority: int
    match: RuleMatch
    effect: str
    warning_template: str | None = None


@dataclass(frozen=True)
class GovernanceWarning:
    code: str
    message: str
    column_refs: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"code": self.code, "message": self.message, "column_refs": list(self.column_refs)}


@dataclass(frozen=True)
class GovernanceDecision:
    effect: str
    matched_rule: str
    warnings: tuple[GovernanceWarning, ...]

    def to_json(self) -> dict:
        return {
            "effect": self.effect,
            "matched_rule": self.matched_rule,
            "warnings": [w.to_json() for w in self.warnings],
        }


def _rule_matches(rule: PolicyRule, contract_max: str, purpose_category: str, same_team: bool) -> bool:
    m = rule.match
    if m.max_classification is not None:
        if CLASSIFICATION_RANK[contract_max] > CLASSIFICATION_RANK[m.max_classification]:
            return False
    if m.purpose_in is not None and purpose_category not in m.purpose_in:
        return False
    if m.same_team is not None and same_team != m.same_team:
        return False
    return True


def _rule_warning_code(rule: PolicyRule) -> str:
    if rule.match.purpose_in is not None:
        return "purpose_mismatch"
    if rule.match.max_classification is not None:
        return "classification_exceeded"
    return "pii_exposure"


def contract_term_warnings(contract, purpose: DeclaredPurpose) -> tuple[GovernanceWarning, ...]:
    """Warnings derived from the contract alone; independent of policy rules
    and therefore invariant under rule reordering."""
    warnings: list[GovernanceWarning] = []
    for classification in CLASSIFICATIONS:
        if classification not in contract.classifications_used():
            continue
        allowed = contract.terms.allowed_purposes[classification]
        if purpose.category not in allowed:
            columns = contract.columns_with_classification(classification)
            warnings.append(
                GovernanceWarning(
                    code="purpose_mismatch",
                    message=(
                        f"purpose '{purpose.category}' is not permitted for "
                        f"{classification}-classified columns"
                    ),
                    column_refs=columns,
                )
            )
    pii_columns = contract.columns_with_classification("pii")
    if pii_columns:
        warnings.append(
            GovernanceWarning(
                code="pii_exposure",
                message="request touches PII-classified columns",
                column_refs=pii_columns,
            )
        )
    return tuple(warnings)


def evaluate_access(product, contract, requester, purpose: DeclaredPurpose,
                    policies: Iterable[PolicyRule]) -> GovernanceDecision:
    """First-match rule evaluation plus contract-term warnings.

    Rules run in ascending priority order; the first rule whose present
    match fields all hold fixes the effect. No match falls back to
    require_manual under the rule id "default". Warnings never change the
    effect. A deny decision always carries at least one warning.
    """
    contract_max = contract.max_classification()
    same_team = requester.team_id == product.owner_team

    effect = "require_manual"
    matched_rule = "default"
    matched: PolicyRule | None = None
    for rule in sorted(policies, key=lambda r: r.priority):
        if _rule_matches(rule, contract_max, purpose.category, same_team):
            effect = rule.effect
            matched_rule = rule.rule_id
            matched = rule
            break

    warnings = list(contract_term_warnings(contract, purpose))
    if matched is not None and matched.warning_template:
        warnings.append(GovernanceWarning(code=_rule_warning_code(matched),
                                          message=matched.warning_template))
    if effect == "deny" and not warnings:
        warnings.append(
            GovernanceWarning(
                code="classification_exceeded",
                message=f"access denied by policy rule '{matched_rule}'",
            )
        )
    return GovernanceDecision(effect=effect, matched_rule=matched_rule, warnings=tuple(warnings))


@dataclass(frozen=True)
class DenialReason:
    code: str
    message: str
    column: str | None = None
    classification: str | None = None
    purpose: str | None = None

    def to_json(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "column": self.column,
            "classification": self.classification,
            "purpose": self.purpose,
        }


@dataclass(frozen=True)
class QueryVerdict:
    allowed: bool
    reasons: tuple[DenialReason, ...] = ()

    def __post_init__(self):
        if not self.allowed and not self.reasons:
            raise ValueError("deny verdicts must carry at least one reason")


def evaluate_query(grant, validated, contract, session_purpose: DeclaredPurpose) -> QueryVerdict:
    """Deny iff any column the query touches carries a classification whose
    contract terms exclude the session purpose; reasons list every offending
    (column, classification, purpose) triple."""
    reasons = []
    for table, column, classification in sorted(validated.referenced_columns):
        allowed = contract.terms.allowed_purposes[classification]
        if session_purpose.category not in allowed:
            reasons.append(
                DenialReason(
                    code="purpose_mismatch",
                    message=(
                        f"column {table}.{column} is {classification}-classified and its "
                        f"contract does not allow purpose '{session_purpose.category}'"
                    ),
                    column=f"{table}.{column}",
                    classification=classification,
                    purpose=session_purpose.category,
                )
            )
    if reasons:
        return QueryVerdict(allowed=False, reasons=tuple(reasons))
    return QueryVerdict(allowed=True)


class Evaluator(Protocol):
    """Plug point for alternative governance backends (e.g. an external
    LLM adapter). The shipped implementation is the deterministic rule
    engine below."""

    def evaluate_access(self, product, contract, requester, purpose, policies) -> GovernanceDecision: ...

    def evaluate_query(self, grant, validated, contract, session_purpose) -> QueryVerdict: ...


class RuleEvaluator:
    """Deterministic Evaluator backed by the module-level functions."""

    def evaluate_access(self, product, contract, requester, purpose, policies):
        return evaluate_access(product, contract, requester, purpose, policies)

    def evaluate_query(self, grant, validated, contract, session_purpose):
        return evaluate_query(grant, validated, contract, session_purpose)
