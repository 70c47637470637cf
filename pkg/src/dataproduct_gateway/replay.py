"""Scripted MCP client replaying the three demonstration scenarios.

Drives the real MCP server as a subprocess over stdio against a running
gateway, printing a transcript and exiting nonzero at the first divergence
from the scenario's expected outcomes:

    1  discover the customer product, request access (manual approval),
       then - with approval - answer the top-customers question
    2  support tickets: automatic approval, grouped count query
    3  a held analytics grant does not cover a marketing purpose; the
       query is rejected before execution

Scenario 1 normally pauses once the request is pending; auto_approve
performs the data owner's decision through the gateway API instead.
Scenario 3 always performs that approval as setup, since it needs a
standing grant.
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import urllib.error
import urllib.request
from pathlib import Path

from .mcp_server import ENV_KEY, ENV_URL

TOP_CUSTOMERS_SQL = (
    "SELECT customers.name, SUM(orders.amount) AS total FROM customers "
    "JOIN orders ON customers.id = orders.customer_id "
    "GROUP BY customers.name ORDER BY total DESC LIMIT 5"
)
TICKET_REASONS_SQL = (
    "SELECT category, COUNT(*) AS n FROM tickets "
    "GROUP BY category ORDER BY n DESC, category ASC"
)
PII_EXPORT_SQL = "SELECT name, email FROM customers LIMIT 100"

ANALYTICS_PURPOSE = "identify top customers by revenue"
SUPPORT_PURPOSE = "analyze top reasons for support tickets"
MARKETING_PURPOSE = "Create a CSV file of all our top customers for a luxury email campaign"


class ReplayDivergence(Exception):
    pass


class McpClient:
    """Talks newline-delimited JSON-RPC to a spawned MCP server process."""

    def __init__(self, gateway_url: str, api_key: str):
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "dataproduct_gateway", "mcp"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            env={**os.environ, ENV_URL: gateway_url, ENV_KEY: api_key},
        )
        self.next_id = 0

    def request(self, method: str, params: dict | None = None) -> dict:
        self.next_id += 1
        message = {"jsonrpc": "2.0", "id": self.next_id, "method": method}
        if params is not None:
            message["params"] = params
        self.proc.stdin.write(json.dumps(message) + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise ReplayDivergence("MCP server closed its output stream")
        return json.loads(line)

    def notify(self, method: str) -> None:
        self.proc.stdin.write(json.dumps({"jsonrpc": "2.0", "method": method}) + "\n")
        self.proc.stdin.flush()

    def call_tool(self, name: str, arguments: dict):
        response = self.request("tools/call", {"name": name, "arguments": arguments})
        if "error" in response:
            raise ReplayDivergence(f"tools/call {name} failed: {response['error']}")
        result = response["result"]
        if result.get("isError"):
            raise ReplayDivergence(f"tool {name} errored: {result['content'][0]['text']}")
        return json.loads(result["content"][0]["text"])

    def close(self) -> None:
        if self.proc.stdin:
            self.proc.stdin.close()
        self.proc.wait(timeout=10)


class ScenarioRunner:
    def __init__(self, registry_dir: Path, gateway_url: str, out=sys.stdout):
        self.gateway_url = gateway_url
        self.out = out
        users = [
            json.loads(p.read_text(encoding="utf-8"))
            for p in sorted((registry_dir / "users").glob("*.json"))
        ]
        products = [
            json.loads(p.read_text(encoding="utf-8"))
            for p in sorted((registry_dir / "products").glob("*.json"))
        ]
        owner_teams = {p["owner_team"] for p in products}
        owners = [u for u in users if u["team_id"] in owner_teams]
        analysts = [u for u in users if u["team_id"] not in owner_teams]
        if not owners or not analysts:
            raise ReplayDivergence("registry lacks an owner or an analyst user")
        self.owner = owners[0]
        self.analyst = analysts[0]

    # -- helpers -----------------------------------------------------------

    def say(self, line: str) -> None:
        self.out.write(line + "\n")
        self.out.flush()

    def expect(self, condition: bool, step: str, observed) -> None:
        if not condition:
            raise ReplayDivergence(f"step {step!r} diverged; observed: {observed!r}")
        self.say(f"  ok: {step}")

    def http(self, method: str, path: str, api_key: str, body: dict | None = None) -> dict:
        data = json.dumps(body).encode("utf-8") if body is not None else None
        request = urllib.request.Request(self.gateway_url.rstrip("/") + path,
                                         data=data, method=method)
        request.add_header("X-Api-Key", api_key)
        if data is not None:
            request.add_header("Content-Type", "application/json")
        try:
            with urllib.request.urlopen(request, timeout=15) as response:
                return json.loads(response.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            raise ReplayDivergence(
                f"{method} {path} -> HTTP {exc.code}: {exc.read().decode('utf-8')}"
            ) from exc

    def check_gateway(self) -> None:
        try:
            self.http("GET", "/api/health", self.analyst["api_key"])
        except (urllib.error.URLError, OSError) as exc:
            raise ReplayDivergence(f"gateway not reachable at {self.gateway_url}: {exc}") from exc

    def handshake(self, client: McpClient) -> None:
        response = client.request("initialize", {
            "protocolVersion": "2024-11-05",
            "clientInfo": {"name": "dpgateway-replay", "version": "0.1.0"},
            "capabilities": {},
        })
        self.expect("result" in response, "initialize handshake", response)
        client.notify("notifications/initialized")
        tools = client.request("tools/list")["result"]["tools"]
        self.expect(len(tools) == 4, "tools/list exposes 4 tools", [t["name"] for t in tools])

    def approve_pending_as_owner(self, requester_id: str, product_id: str) -> None:
        pending = self.http(
            "GET",
            f"/api/accessrequests?status=pending&product_id={product_id}"
            f"&requester={requester_id}",
            self.owner["api_key"],
        )
        if not pending:
            raise ReplayDivergence(f"no pending request for {requester_id} on {product_id}")
        request_id = pending[0]["id"]
        decided = self.http(
            "POST", f"/api/accessrequests/{request_id}/decision",
            self.owner["api_key"], {"decision": "approve", "note": "replay approval"},
        )
        self.expect(decided["status"] == "approved",
                    f"owner approves request {request_id}", decided["status"])

    def access_status(self, client: McpClient, product_id: str) -> str:
        detail = client.call_tool("dataproduct_get", {"product_id": product_id})
        return detail["access_status"]

    def ensure_customers_grant(self, client: McpClient) -> None:
        status = self.access_status(client, "customers")
        if status == "none" or status == "rejected":
            created = client.call_tool("dataproduct_request_access", {
                "product_id": "customers", "purpose": ANALYTICS_PURPOSE,
            })
            self.expect(created["status"] == "pending",
                        "access request enters manual approval", created["status"])
            status = "pending"
        if status == "pending":
            self.approve_pending_as_owner(self.analyst["id"], "customers")
        self.expect(self.access_status(client, "customers") == "active",
                    "analytics grant on customers is active", status)

    # -- scenarios -----------------------------------------------------------

    def scenario_1(self, auto_approve: bool) -> int:
        client = McpClient(self.gateway_url, self.analyst["api_key"])
        try:
            self.say("scenario 1: identifying top customers with the human in the loop")
            self.handshake(client)

            narrow = client.call_tool("dataproduct_search", {"query": "customer sales revenue"})
            self.expect(narrow == [], "narrow search returns no products", narrow)
            broad = client.call_tool("dataproduct_search", {"query": "customer"})
            self.expect(len(broad) == 1 and broad[0]["id"] == "customers",
                        "broad search finds the customer product", broad)

            status = self.access_status(client, "customers")
            self.say(f"  access status: {status}")
            if status in ("none", "rejected"):
                created = client.call_tool("dataproduct_request_access", {
                    "product_id": "customers", "purpose": ANALYTICS_PURPOSE,
                })
                self.expect(created["status"] == "pending",
                            "request enters the manual approval queue", created["status"])
                status = "pending"
            if status == "pending":
                if not auto_approve:
                    self.say("  blocked: awaiting data owner approval "
                             "(rerun with --auto-approve or decide in the console)")
                    return 0
                self.approve_pending_as_owner(self.analyst["id"], "customers")
                self.expect(self.access_status(client, "customers") == "active",
                            "grant is active after approval", status)

            result = client.call_tool("dataproduct_query", {
                "product_id": "customers", "sql": TOP_CUSTOMERS_SQL,
            })
            self.expect(not result.get("rejected"), "query passes governance", result)
            self.expect(result["columns"] == ["name", "total"] and result["row_count"] >= 1,
                        "top customers are returned", result)
            self.say(f"  top customers: {result['rows']}")
            return 0
        finally:
            client.close()

    def scenario_2(self) -> int:
        client = McpClient(self.gateway_url, self.analyst["api_key"])
        try:
            self.say("scenario 2: analyzing support cases without human oversight")
            self.handshake(client)

            found = client.call_tool("dataproduct_search", {"query": "support tickets"})
            self.expect(len(found) == 1 and found[0]["id"] == "support-tickets",
                        "search finds the support tickets product", found)

            status = self.access_status(client, "support-tickets")
            if status != "active":
                created = client.call_tool("dataproduct_request_access", {
                    "product_id": "support-tickets", "purpose": SUPPORT_PURPOSE,
                })
                self.expect(created["status"] == "auto_approved",
                            "request is approved automatically", created["status"])

            result = client.call_tool("dataproduct_query", {
                "product_id": "support-tickets", "sql": TICKET_REASONS_SQL,
            })
            self.expect(not result.get("rejected"), "query passes governance", result)
            self.expect(result["row_count"] >= 3,
                        "ticket reasons group into at least 3 categories", result)
            self.say(f"  ticket reasons: {result['rows']}")
            return 0
        finally:
            client.close()

    def scenario_3(self) -> int:
        client = McpClient(self.gateway_url, self.analyst["api_key"])
        try:
            self.say("scenario 3: preventing misuse of customer data at query time")
            self.handshake(client)
            self.ensure_customers_grant(client)

            verdict = client.call_tool("dataproduct_query", {
                "product_id": "customers",
                "sql": PII_EXPORT_SQL,
                "purpose": MARKETING_PURPOSE,
            })
            self.expect(verdict.get("rejected") is True,
                        "query is blocked before execution", verdict)
            reasons = verdict.get("reasons", [])
            self.expect(any(r["code"] == "purpose_mismatch" for r in reasons),
                        "rejection cites a purpose mismatch", reasons)
            self.say(f"  rejection reasons: {[r['message'] for r in reasons]}")
            return 0
        finally:
            client.close()

    def run(self, scenario: int, auto_approve: bool = False) -> int:
        self.check_gateway()
        try:
            if scenario == 1:
                return self.scenario_1(auto_approve)
            if scenario == 2:
                return self.scenario_2()
            if scenario == 3:
                return self.scenario_3()
            raise ReplayDivergence(f"unknown scenario {scenario}")
        except ReplayDivergence as exc:
            self.say(f"DIVERGENCE: {exc}")
            return 1
