import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dataproduct_gateway.catalog import ColumnDef, ContractTerms, DataContract
from dataproduct_gateway.governance import (
    DeclaredPurpose,
    GovernanceDecision,
    PolicyRule,
    QueryVerdict,
    RuleMatch,
    classify_purpose,
    contract_term_warnings,
    evaluate_access,
    evaluate_query,
    resolve_purpose,
)
from dataproduct_gateway.model import CLASSIFICATIONS, PURPOSE_CATEGORIES, canonical_json


def contract_with(classification: str, allowed=None, columns=1) -> DataContract:
    cols = tuple(
        ColumnDef(f"c{i}", "text", classification) for i in range(columns)
    )
    allowed_purposes = {classification: frozenset(allowed or PURPOSE_CATEGORIES)}
    return DataContract(
        id=f"{classification}-contract",
        tables={"t": cols},
        terms=ContractTerms(allowed_purposes=allowed_purposes, row_limit=10),
    )


# --- purpose classification -------------------------------------------


def test_classify_marketing_campaign():
    text = "CSV file of all our top customers for a luxury email campaign"
    assert classify_purpose(text) == "marketing_outreach"


def test_classify_top_customers_is_analytics():
    assert classify_purpose("identify top customers by revenue") == "analytics"


def test_classify_support_before_analytics():
    # "top" also matches analytics, but the support family is checked first
    assert classify_purpose("analyze top reasons for support tickets") == "support_operations"


def test_classify_reporting_research_other():
    assert classify_purpose("quarterly dashboard refresh") == "reporting"
    assert classify_purpose("longitudinal study of churn") == "research"
    assert classify_purpose("just poking around") == "other"


def test_classify_empty_text_rejected():
    with pytest.raises(ValueError):
        classify_purpose("")


def test_explicit_category_overrides_classifier():
    purpose = resolve_purpose("email blast", category="analytics")
    assert purpose.category == "analytics"


def test_declared_purpose_invariants():
    with pytest.raises(ValueError):
        DeclaredPurpose(text="", category="analytics")
    with pytest.raises(ValueError):
        DeclaredPurpose(text="x", category="world_domination")


# --- access evaluation --------------------------------------------------


def test_seed_auto_approval_path(registry, users):
    product = registry.products["support-tickets"]
    contract = registry.contracts["support-tickets-contract"]
    purpose = resolve_purpose("analyze top reasons for support tickets")
    decision = evaluate_access(product, contract, users["alice"], purpose, registry.policies)
    assert decision.effect == "auto_approve"
    assert decision.matched_rule == "automated-benign-access"


def test_seed_manual_path_for_pii(registry, users):
    product = registry.products["customers"]
    contract = registry.contracts["customers-contract"]
    purpose = resolve_purpose("identify top customers by revenue")
    decision = evaluate_access(product, contract, users["alice"], purpose, registry.policies)
    assert decision.effect == "require_manual"
    assert decision.matched_rule == "manual-review-fallback"
    assert any(w.code == "pii_exposure" for w in decision.warnings)


def test_seed_marketing_denied_with_mismatch_warnings(registry, users):
    product = registry.products["customers"]
    contract = registry.contracts["customers-contract"]
    purpose = resolve_purpose("bulk email campaign to customers")
    decision = evaluate_access(product, contract, users["alice"], purpose, registry.policies)
    assert decision.effect == "deny"
    assert decision.matched_rule == "block-marketing-outreach"
    mismatches = [w for w in decision.warnings if w.code == "purpose_mismatch"]
    pii_refs = [w for w in mismatches if "customers.email" in w.column_refs]
    assert pii_refs, decision.warnings


def test_no_rule_matches_falls_back_to_manual(registry, users):
    product = registry.products["customers"]
    contract = registry.contracts["customers-contract"]
    purpose = resolve_purpose("whatever", category="other")
    decision = evaluate_access(product, contract, users["alice"], purpose, policies=[])
    assert decision.effect == "require_manual"
    assert decision.matched_rule == "default"


def test_deny_always_carries_a_warning(registry, users):
    rule = PolicyRule("deny-anything", 1, RuleMatch(same_team=False), "deny")
    contract = contract_with("public")
    product = registry.products["customers"]
    decision = evaluate_access(product, contract, users["alice"],
                               resolve_purpose("x", "analytics"), [rule])
    assert decision.effect == "deny"
    assert decision.warnings


def test_same_team_match(registry, users):
    rule = PolicyRule("owners-auto", 1, RuleMatch(same_team=True), "auto_approve")
    product = registry.products["customers"]
    contract = registry.contracts["customers-contract"]
    purpose = resolve_purpose("x", "other")
    dana = users["dana"]  # data-platform owns the product
    assert evaluate_access(product, contract, dana, purpose, [rule]).effect == "auto_approve"
    alice = users["alice"]
    assert evaluate_access(product, contract, alice, purpose, [rule]).effect == "require_manual"


def test_max_classification_is_an_upper_bound(registry, users):
    rule = PolicyRule("benign", 1, RuleMatch(max_classification="internal"), "auto_approve")
    product = registry.products["customers"]
    purpose = resolve_purpose("x", "analytics")
    low = contract_with("internal")
    high = contract_with("pii")
    assert evaluate_access(product, low, users["alice"], purpose, [rule]).effect == "auto_approve"
    assert evaluate_access(product, high, users["alice"], purpose, [rule]).effect == "require_manual"


_rules_strategy = st.lists(
    st.builds(
        PolicyRule,
        rule_id=st.sampled_from(["r1", "r2", "r3", "r4"]),
        priority=st.integers(0, 100),
        match=st.builds(
            RuleMatch,
            max_classification=st.sampled_from(CLASSIFICATIONS) | st.none(),
            purpose_in=st.none() | st.frozensets(st.sampled_from(PURPOSE_CATEGORIES), min_size=1),
            same_team=st.none() | st.booleans(),
        ),
        effect=st.sampled_from(["auto_approve", "require_manual", "deny"]),
        warning_template=st.none() | st.just("flagged by policy"),
    ),
    max_size=4,
)


@settings(max_examples=80, deadline=None)
@given(rules=_rules_strategy,
       classification=st.sampled_from(CLASSIFICATIONS),
       category=st.sampled_from(PURPOSE_CATEGORIES))
def test_decisions_are_deterministic(rules, classification, category):
    from tests_support_registry import product_and_user

    product, user = product_and_user()
    rules = [r for i, r in enumerate(rules) if not r.match.is_empty()]
    rules = [PolicyRule(r.rule_id, i, r.match, r.effect, r.warning_template)
             for i, r in enumerate(rules)]
    contract = contract_with(classification, allowed=["analytics"])
    purpose = resolve_purpose("x", category)
    first = evaluate_access(product, contract, user, purpose, rules)
    second = evaluate_access(product, contract, user, purpose, rules)
    assert canonical_json(first.to_json()) == canonical_json(second.to_json())


@settings(max_examples=80, deadline=None)
@given(rules=_rules_strategy, category=st.sampled_from(PURPOSE_CATEGORIES),
       shuffle_seed=st.integers(0, 1000))
def test_contract_warnings_invariant_under_rule_permutation(rules, category, shuffle_seed):
    import random

    from tests_support_registry import product_and_user

    product, user = product_and_user()
    rules = [r for r in rules if not r.match.is_empty()]
    rules = [PolicyRule(r.rule_id, i, r.match, r.effect, r.warning_template)
             for i, r in enumerate(rules)]
    contract = contract_with("pii", allowed=["analytics"], columns=2)
    purpose = resolve_purpose("x", category)

    def contract_warning_set(policy_list):
        decision = evaluate_access(product, contract, user, purpose, policy_list)
        template_texts = {r.warning_template for r in rules if r.warning_template}
        return {w for w in decision.warnings if w.message not in template_texts}

    baseline = contract_warning_set(rules)
    shuffled = rules[:]
    random.Random(shuffle_seed).shuffle(shuffled)
    reprioritized = [PolicyRule(r.rule_id, i, r.match, r.effect, r.warning_template)
                     for i, r in enumerate(shuffled)]
    assert contract_warning_set(reprioritized) == baseline
    expected = set(contract_term_warnings(contract, purpose))
    assert baseline == expected


# --- query-time evaluation ----------------------------------------------


class FakeValidated:
    def __init__(self, referenced):
        self.referenced_columns = frozenset(referenced)


def _customers_contract(registry):
    return registry.contracts["customers-contract"]


def test_query_allowed_for_analytics_on_pii(registry):
    contract = _customers_contract(registry)
    validated = FakeValidated({("customers", "name", "pii"), ("customers", "email", "pii")})
    verdict = evaluate_query(None, validated, contract, resolve_purpose("x", "analytics"))
    assert verdict.allowed


def test_query_denied_for_marketing_on_pii(registry):
    contract = _customers_contract(registry)
    validated = FakeValidated({("customers", "name", "pii"), ("customers", "email", "pii")})
    verdict = evaluate_query(None, validated, contract,
                             resolve_purpose("luxury email campaign"))
    assert not verdict.allowed
    assert {r.column for r in verdict.reasons} == {"customers.name", "customers.email"}
    assert all(r.code == "purpose_mismatch" for r in verdict.reasons)
    assert all(r.purpose == "marketing_outreach" for r in verdict.reasons)


def test_query_on_unrestricted_columns_always_allowed():
    contract = contract_with("public")
    validated = FakeValidated({("t", "c0", "public")})
    for category in PURPOSE_CATEGORIES:
        verdict = evaluate_query(None, validated, contract, resolve_purpose("x", category))
        assert verdict.allowed


def test_deny_verdict_requires_reasons():
    with pytest.raises(ValueError):
        QueryVerdict(allowed=False, reasons=())


@settings(max_examples=80, deadline=None)
@given(
    subset_mask=st.lists(st.booleans(), min_size=4, max_size=4),
    category=st.sampled_from(PURPOSE_CATEGORIES),
)
def test_query_verdict_monotone_in_column_sets(subset_mask, category):
    columns = [("t", f"c{i}", cls) for i, cls in enumerate(CLASSIFICATIONS)]
    contract = DataContract(
        id="m",
        tables={"t": tuple(ColumnDef(f"c{i}", "text", cls)
                           for i, cls in enumerate(CLASSIFICATIONS))},
        terms=ContractTerms(
            allowed_purposes={
                "public": frozenset(PURPOSE_CATEGORIES),
                "internal": frozenset({"analytics", "reporting"}),
                "confidential": frozenset({"analytics"}),
                "pii": frozenset({"analytics"}),
            },
            row_limit=5,
        ),
    )
    purpose = resolve_purpose("x", category)
    full = evaluate_query(None, FakeValidated(columns), contract, purpose)
    subset = [c for c, keep in zip(columns, subset_mask) if keep]
    small = evaluate_query(None, FakeValidated(subset), contract, purpose)
    if full.allowed:
        assert small.allowed
