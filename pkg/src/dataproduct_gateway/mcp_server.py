"""MCP protocol endpoint: JSON-RPC 2.0 over stdio, newline-delimited.

Exposes exactly four tools (dataproduct_search, dataproduct_get,
dataproduct_request_access, dataproduct_query), each a thin pass-through
to the gateway HTTP API. Tool results embed the gateway's JSON body
verbatim as a single text content item; governance refusals and access
denials are content for the agent (isError false), while transport
failures and bad API keys are flagged isError true.

Configuration comes from the environment: MARKETPLACE_URL and
MARKETPLACE_API_KEY. The server holds no access state of its own -
restarting it never changes gateway outcomes.
"""

from __future__ import annotations

import json
import sys
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field

PROTOCOL_VERSION = "2024-11-05"
SERVER_NAME = "dataproduct-gateway-mcp"
SERVER_VERSION = "0.1.0"

ENV_URL = "MARKETPLACE_URL"
ENV_KEY = "MARKETPLACE_API_KEY"

TOOLS: tuple[dict, ...] = (
    {
        "name": "dataproduct_search",
        "description": (
            "Search the data product marketplace. Every whitespace-separated "
            "term must match the product id, title, or description; returns "
            "summaries of matching active products."
        ),
        "inputSchema": {
            "type": "object",
            "properties": {
                "query": {"type": "string", "description": "search terms, whitespace-separated"},
                "status": {
                    "type": "string",
                    "enum": ["active", "draft", "retired"],
                    "description": "product status filter (default active)",
                },
            },
            "required": ["query"],
        },
    },
    {
        "name": "dataproduct_get",
        "description": (
            "Fetch full details of a data product by id: metadata, data "
            "contracts, connection details, and the caller's access status."
        ),
        "inputSchema": {
            "type": "object",
            "properties": {
                "product_id": {"type": "string", "description": "data product id"},
            },
            "required": ["product_id"],
        },
    },
    {
        "name": "dataproduct_request_access",
        "description": (
            "Request access to a data product for a declared purpose. The "
            "request may be auto-approved, queued for the data owner, or "
            "rejected by policy; the response carries status and warnings."
        ),
        "inputSchema": {
            "type": "object",
            "properties": {
                "product_id": {"type": "string", "description": "data product id"},
                "purpose": {"type": "string", "description": "declared purpose of use"},
                "purpose_category": {
                    "type": "string",
                    "enum": [
                        "analytics", "reporting", "marketing_outreach",
                        "support_operations", "research", "other",
                    ],
                    "description": "explicit purpose category (otherwise classified from text)",
                },
            },
            "required": ["product_id", "purpose"],
        },
    },
    {
        "name": "dataproduct_query",
        "description": (
            "Run a SQL query against a data product you hold access to. The "
            "gateway validates the query against the data contract and the "
            "session purpose before executing; non-compliant queries are "
            "rejected with reasons."
        ),
        "inputSchema": {
            "type": "object",
            "properties": {
                "product_id": {"type": "string", "description": "data product id"},
                "sql": {"type": "string", "description": "SELECT statement (supported subset)"},
                "purpose": {
                    "type": "string",
                    "description": "purpose for this query (defaults to the grant's purpose)",
                },
            },
            "required": ["product_id", "sql"],
        },
    },
)

_TOOL_NAMES = tuple(t["name"] for t in TOOLS)


class ConfigError(Exception):
    pass


@dataclass
class McpServer:
    marketplace_url: str
    api_key: str
    initialized: bool = False
    client_info: dict = field(default_factory=dict)

    # -- gateway HTTP client ------------------------------------------------

    def _http(self, method: str, path: str, body: dict | None = None) -> tuple[int, str]:
        url = self.marketplace_url.rstrip("/") + path
        data = json.dumps(body).encode("utf-8") if body is not None else None
        request = urllib.request.Request(url, data=data, method=method)
        request.add_header("X-Api-Key", self.api_key)
        if data is not None:
            request.add_header("Content-Type", "application/json")
        try:
            with urllib.request.urlopen(request, timeout=30) as response:
                return response.status, response.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            return exc.code, exc.read().decode("utf-8")

    def call_tool(self, name: str, arguments: dict) -> dict:
        """Dispatch one tool call to its gateway endpoint and wrap the body."""
        try:
            if name == "dataproduct_search":
                query = urllib.parse.quote(arguments["query"])
                path = f"/api/dataproducts?q={query}"
                if "status" in arguments:
                    path += f"&status={urllib.parse.quote(arguments['status'])}"
                status, body = self._http("GET", path)
            elif name == "dataproduct_get":
                product_id = urllib.parse.quote(arguments["product_id"])
                status, body = self._http("GET", f"/api/dataproducts/{product_id}")
            elif name == "dataproduct_request_access":
                payload = {
                    "product_id": arguments["product_id"],
                    "purpose_text": arguments["purpose"],
                }
                if "purpose_category" in arguments:
                    payload["purpose_category"] = arguments["purpose_category"]
                status, body = self._http("POST", "/api/accessrequests", payload)
            else:
                payload = {
                    "product_id": arguments["product_id"],
                    "sql": arguments["sql"],
                }
                if "purpose" in arguments:
                    payload["purpose_text"] = arguments["purpose"]
                status, body = self._http("POST", "/api/query", payload)
        except (urllib.error.URLError, OSError) as exc:
            return _tool_result(f"gateway unreachable: {exc}", is_error=True)
        if status == 401:
            return _tool_result("invalid API key", is_error=True)
        # Domain outcomes (including refusals and 4xx verdicts) are
        # information for the agent, not transport errors.
        return _tool_result(body, is_error=False)

    # -- JSON-RPC handling ----------------------------------------------------

    def handle_line(self, line: str) -> dict | None:
        """Returns the response object, or None for notifications."""
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            return _error(None, -32700, "Parse error")
        if not isinstance(message, dict) or "method" not in message:
            return _error(message.get("id") if isinstance(message, dict) else None,
                          -32600, "Invalid Request")
        method = message["method"]
        msg_id = message.get("id")
        params = message.get("params") or {}
        is_notification = "id" not in message

        if method == "initialize":
            self.initialized = True
            self.client_info = params.get("clientInfo", {})
            return _result(msg_id, {
                "protocolVersion": PROTOCOL_VERSION,
                "capabilities": {"tools": {}},
                "serverInfo": {"name": SERVER_NAME, "version": SERVER_VERSION},
            })
        if method == "notifications/initialized":
            return None
        if is_notification:
            return None  # unknown notifications are dropped per JSON-RPC
        if method in ("tools/list", "tools/call") and not self.initialized:
            return _error(msg_id, -32002, "Server not initialized")
        if method == "tools/list":
            return _result(msg_id, {"tools": list(TOOLS)})
        if method == "tools/call":
            name = params.get("name")
            arguments = params.get("arguments") or {}
            if name not in _TOOL_NAMES:
                return _error(msg_id, -32602, f"Invalid params: unknown tool {name!r}")
            tool = next(t for t in TOOLS if t["name"] == name)
            arguments = {k: v for k, v in arguments.items() if v is not None}
            missing = [k for k in tool["inputSchema"]["required"] if k not in arguments]
            if missing:
                return _error(msg_id, -32602,
                              f"Invalid params: missing arguments {missing} for {name}")
            wrong = [k for k, v in arguments.items()
                     if k in tool["inputSchema"]["properties"] and not isinstance(v, str)]
            if wrong:
                return _error(msg_id, -32602,
                              f"Invalid params: arguments {wrong} must be strings")
            return _result(msg_id, self.call_tool(name, arguments))
        return _error(msg_id, -32601, f"Method not found: {method}")

    def serve(self, stdin=None, stdout=None) -> None:
        """Read newline-delimited JSON-RPC until end-of-input."""
        stdin = stdin or sys.stdin
        stdout = stdout or sys.stdout
        for line in stdin:
            line = line.strip()
            if not line:
                continue
            try:
                response = self.handle_line(line)
            except Exception as exc:  # a bad message must not kill the session
                response = _error(None, -32603, f"Internal error: {exc}")
            if response is not None:
                stdout.write(json.dumps(response) + "\n")
                stdout.flush()


def _result(msg_id, result: dict) -> dict:
    return {"jsonrpc": "2.0", "id": msg_id, "result": result}


def _error(msg_id, code: int, message: str) -> dict:
    return {"jsonrpc": "2.0", "id": msg_id, "error": {"code": code, "message": message}}


def _tool_result(text: str, is_error: bool) -> dict:
    return {"content": [{"type": "text", "text": text}], "isError": is_error}


def from_environment(env) -> McpServer:
    url = env.get(ENV_URL)
    key = env.get(ENV_KEY)
    if not url or not key:
        missing = [name for name, val in ((ENV_URL, url), (ENV_KEY, key)) if not val]
        raise ConfigError(f"missing environment variables: {', '.join(missing)}")
    return McpServer(marketplace_url=url, api_key=key)
