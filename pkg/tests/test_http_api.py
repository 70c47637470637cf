import json

from conftest import ALICE_KEY, BOB_KEY, DANA_KEY, api


def test_api_requires_key(http_gateway):
    base, _ = http_gateway
    status, body = api(base, "GET", "/api/dataproducts")
    assert status == 401
    status, body = api(base, "GET", "/api/health", key="key-of-nobody")
    assert status == 401
    assert body["error"] == "unauthorized"


def test_health(http_gateway):
    base, _ = http_gateway
    status, body = api(base, "GET", "/api/health", ALICE_KEY)
    assert status == 200
    assert body["status"] == "ok"
    assert body["products"] == 2


def test_search_endpoint(http_gateway):
    base, _ = http_gateway
    status, body = api(base, "GET", "/api/dataproducts?q=customer", ALICE_KEY)
    assert status == 200
    assert [p["id"] for p in body] == ["customers"]
    for summary in body:
        assert set(summary) == {"id", "name", "description", "owner"}

    status, body = api(base, "GET", "/api/dataproducts?q=customer+sales+revenue", ALICE_KEY)
    assert status == 200 and body == []

    # no q lists everything active
    status, body = api(base, "GET", "/api/dataproducts", ALICE_KEY)
    assert [p["id"] for p in body] == ["customers", "support-tickets"]


def test_product_detail_and_404(http_gateway):
    base, _ = http_gateway
    status, body = api(base, "GET", "/api/dataproducts/customers", ALICE_KEY)
    assert status == 200
    assert body["product"]["id"] == "customers"
    assert body["access_status"] == "none"
    assert {c["id"] for c in body["contracts"]} == {"customers-contract"}
    status, body = api(base, "GET", "/api/dataproducts/ghost", ALICE_KEY)
    assert status == 404


def test_access_request_lifecycle_over_http(http_gateway):
    base, _ = http_gateway
    status, created = api(base, "POST", "/api/accessrequests", ALICE_KEY, {
        "product_id": "customers",
        "purpose_text": "identify top customers by revenue",
    })
    assert status == 200
    assert created["status"] == "pending"
    assert created["purpose"]["category"] == "analytics"

    # duplicate -> 409
    status, _ = api(base, "POST", "/api/accessrequests", ALICE_KEY, {
        "product_id": "customers", "purpose_text": "identify top customers by revenue",
    })
    assert status == 409

    # non-owner decision -> 403
    status, body = api(base, "POST", f"/api/accessrequests/{created['id']}/decision",
                       BOB_KEY, {"decision": "approve"})
    assert status == 403

    status, decided = api(base, "POST", f"/api/accessrequests/{created['id']}/decision",
                          DANA_KEY, {"decision": "approve", "note": "ok"})
    assert status == 200 and decided["status"] == "approved"

    # repeat decision -> 409 invalid state
    status, body = api(base, "POST", f"/api/accessrequests/{created['id']}/decision",
                       DANA_KEY, {"decision": "reject"})
    assert status == 409 and body["error"] == "invalid_state"

    status, detail = api(base, "GET", "/api/dataproducts/customers", ALICE_KEY)
    assert detail["access_status"] == "active"

    status, listed = api(base, "GET", "/api/accessrequests?status=approved", DANA_KEY)
    assert [r["id"] for r in listed] == [created["id"]]


def test_query_endpoint_success_and_rejection(http_gateway):
    base, _ = http_gateway
    _, created = api(base, "POST", "/api/accessrequests", ALICE_KEY, {
        "product_id": "customers", "purpose_text": "identify top customers by revenue",
    })
    api(base, "POST", f"/api/accessrequests/{created['id']}/decision",
        DANA_KEY, {"decision": "approve"})

    status, result = api(base, "POST", "/api/query", ALICE_KEY, {
        "product_id": "customers",
        "sql": "SELECT name, email FROM customers ORDER BY name ASC LIMIT 2",
    })
    assert status == 200
    assert result["columns"] == ["name", "email"]
    assert result["row_count"] == 2 and result["truncated"] is True
    assert "result_digest" in result

    # a governance rejection still travels as HTTP 200
    status, verdict = api(base, "POST", "/api/query", ALICE_KEY, {
        "product_id": "customers",
        "sql": "SELECT name, email FROM customers",
        "purpose_text": "luxury email campaign for top customers",
    })
    assert status == 200
    assert verdict["rejected"] is True
    assert verdict["reasons"][0]["code"] == "purpose_mismatch"


def test_query_without_grant_is_403(http_gateway):
    base, _ = http_gateway
    status, body = api(base, "POST", "/api/query", BOB_KEY, {
        "product_id": "customers", "sql": "SELECT id FROM customers",
    })
    assert status == 403
    assert body["error"] == "access_denied"


def test_query_parse_and_validation_are_422(http_gateway):
    base, _ = http_gateway
    _, created = api(base, "POST", "/api/accessrequests", ALICE_KEY, {
        "product_id": "support-tickets", "purpose_text": "analyze support tickets",
    })
    assert created["status"] == "auto_approved"

    status, body = api(base, "POST", "/api/query", ALICE_KEY, {
        "product_id": "support-tickets", "sql": "SELECT * FROM tickets",
    })
    assert status == 422 and body["error"] == "parse_error"
    assert body["line"] == 1 and body["column"] == 8

    status, body = api(base, "POST", "/api/query", ALICE_KEY, {
        "product_id": "support-tickets", "sql": "SELECT nope FROM tickets",
    })
    assert status == 422 and body["error"] == "validation_error"
    assert body["kind"] == "UnknownColumn"


def test_audit_endpoint_and_verify(http_gateway):
    base, service = http_gateway
    api(base, "POST", "/api/accessrequests", ALICE_KEY, {
        "product_id": "support-tickets", "purpose_text": "analyze support tickets",
    })
    status, records = api(base, "GET", "/api/audit", DANA_KEY)
    assert status == 200
    assert [r["event"] for r in records] == ["access_requested", "access_auto_approved"]

    status, filtered = api(base, "GET", "/api/audit?event=access_auto_approved", DANA_KEY)
    assert len(filtered) == 1

    status, verdict = api(base, "GET", "/api/audit/verify", DANA_KEY)
    assert verdict == {"ok": True}

    # tamper on disk, then verify again through the API
    lines = service.audit.path.read_text().splitlines()
    lines[0] = lines[0].replace("support-tickets", "support-Tickets", 1)
    service.audit.path.write_text("\n".join(lines) + "\n")
    status, verdict = api(base, "GET", "/api/audit/verify", DANA_KEY)
    assert verdict == {"ok": False, "first_bad_seq": 0}


def test_malformed_body_is_400(http_gateway):
    import urllib.request

    base, _ = http_gateway
    request = urllib.request.Request(base + "/api/query", data=b"{not json",
                                     method="POST")
    request.add_header("X-Api-Key", ALICE_KEY)
    import urllib.error

    try:
        urllib.request.urlopen(request, timeout=10)
        status = 200
    except urllib.error.HTTPError as exc:
        status = exc.code
    assert status == 400


def test_wrongly_typed_body_fields_are_422(http_gateway):
    base, _ = http_gateway
    cases = [
        ("/api/query", {"product_id": "customers", "sql": 42}),
        ("/api/query", {"product_id": ["customers"], "sql": "SELECT id FROM customers"}),
        ("/api/query", {"product_id": "customers", "sql": "SELECT id FROM customers",
                        "purpose_text": 9}),
        ("/api/accessrequests", {"product_id": "customers", "purpose_text": {"x": 1}}),
        ("/api/accessrequests", {}),
    ]
    for path, body in cases:
        status, doc = api(base, "POST", path, ALICE_KEY, body)
        assert status == 422, (path, body, status)
        assert doc["error"] == "invalid_request"


def test_protocol_level_errors_stay_json(http_gateway):
    import urllib.error
    import urllib.request

    base, _ = http_gateway
    # a request line beyond the server's limit is rejected before routing;
    # the body must still be JSON, not the stdlib HTML page
    request = urllib.request.Request(base + "/api/dataproducts?q=" + "z" * 70000)
    request.add_header("X-Api-Key", ALICE_KEY)
    try:
        urllib.request.urlopen(request, timeout=10)
        raise AssertionError("expected an HTTP error")
    except urllib.error.HTTPError as exc:
        assert exc.code == 414
        body = json.loads(exc.read().decode("utf-8"))
        assert body["error"] == "http_error"


def test_unknown_route_404(http_gateway):
    base, _ = http_gateway
    status, _ = api(base, "GET", "/api/everything", ALICE_KEY)
    assert status == 404
    status, _ = api(base, "GET", "/elsewhere", ALICE_KEY)
    assert status == 404
