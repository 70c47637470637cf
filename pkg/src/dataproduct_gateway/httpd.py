"""HTTP/JSON surface for the gateway service.

Stdlib-only HTTP/1.1 server. All /api routes require the X-Api-Key header
(401 otherwise). Governance rejections travel as HTTP 200 with a verdict
body: the refusal is domain data, not a transport failure.

    GET  /api/health
    GET  /api/dataproducts?q=<terms>&status=<s>     (no q: list by status)
    GET  /api/dataproducts/{id}
    POST /api/accessrequests        {product_id, purpose_text, purpose_category?}
    GET  /api/accessrequests?status=&product_id=&requester=
    POST /api/accessrequests/{id}/decision   {decision, note?}
    POST /api/query                 {product_id, sql, purpose_text?}
    GET  /api/audit?actor=&product_id=&event=&since=
    GET  /api/audit/verify
    GET  /console/...               static console bundle, no auth
"""

from __future__ import annotations

import json
import mimetypes
import re
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlsplit

from . import gateway
from .executor import ResultSet
from .model import jsonable
from .sqlguard import ContractViolation, ParseError

_DECISION_RE = re.compile(r"^/api/accessrequests/([^/]+)/decision$")
_PRODUCT_RE = re.compile(r"^/api/dataproducts/([^/]+)$")


class ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "dpgateway/0.1"

    # -- plumbing ---------------------------------------------------------

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        if getattr(self.server, "verbose", False):
            super().log_message(format, *args)

    @property
    def service(self) -> "gateway.GatewayService":
        return self.server.service

    def send_json(self, status: int, doc) -> None:
        body = json.dumps(jsonable(doc)).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def send_error(self, code, message=None, explain=None):
        # protocol-level failures (e.g. an over-long request line) must stay
        # JSON too, not the stdlib's HTML page
        self.close_connection = True
        try:
            self.send_json(code, {"error": "http_error", "message": message or str(code)})
        except OSError:
            pass

    def send_error_json(self, status: int, error: str, message: str, **extra) -> None:
        doc = {"error": error, "message": message}
        doc.update(extra)
        self.send_json(status, doc)

    def read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        if not raw:
            return {}
        doc = json.loads(raw.decode("utf-8"))
        if not isinstance(doc, dict):
            raise ValueError("request body must be a JSON object")
        return doc

    @staticmethod
    def body_str(body: dict, key: str, required: bool = True) -> str | None:
        value = body.get(key)
        if value is None:
            if required:
                raise ValueError(f"missing field {key!r}")
            return None
        if not isinstance(value, str):
            raise ValueError(f"field {key!r} must be a string")
        return value

    def authenticate(self):
        key = self.headers.get("X-Api-Key")
        if not key:
            self.send_error_json(401, "unauthorized", "missing X-Api-Key header")
            return None
        user = self.service.user_by_key(key)
        if user is None:
            self.send_error_json(401, "unauthorized", "unknown API key")
            return None
        return user

    # -- request entry points ----------------------------------------------

    def do_GET(self):
        self._handle("GET")

    def do_POST(self):
        self._handle("POST")

    def _handle(self, method: str) -> None:
        url = urlsplit(self.path)
        path = url.path
        if path == "/console" or path.startswith("/console/"):
            if method == "GET":
                self._serve_console(path)
            else:
                self.send_error_json(405, "method_not_allowed", "console is read-only")
            return
        if not path.startswith("/api/"):
            self.send_error_json(404, "not_found", f"no route {path}")
            return
        caller = self.authenticate()
        if caller is None:
            return
        params = {k: v[-1] for k, v in parse_qs(url.query).items()}
        try:
            self._route(method, path, params, caller)
        except gateway.NotFound as exc:
            self.send_error_json(404, "not_found", str(exc))
        except gateway.Conflict as exc:
            self.send_error_json(409, "conflict", str(exc))
        except gateway.InvalidState as exc:
            self.send_error_json(409, "invalid_state", str(exc))
        except gateway.Forbidden as exc:
            self.send_error_json(403, "forbidden", str(exc))
        except gateway.AccessDenied as exc:
            self.send_error_json(403, "access_denied", str(exc))
        except gateway.ProductInactive as exc:
            self.send_error_json(422, "product_inactive", str(exc))
        except ParseError as exc:
            self.send_error_json(422, "parse_error", str(exc),
                                 line=exc.line, column=exc.column, expected=exc.expected)
        except ContractViolation as exc:
            self.send_error_json(422, "validation_error", str(exc),
                                 kind=exc.kind, line=exc.line, column=exc.col)
        except json.JSONDecodeError as exc:
            self.send_error_json(400, "bad_request", f"malformed JSON body: {exc}")
        except KeyError as exc:
            self.send_error_json(422, "invalid_request", f"missing field {exc}")
        except ValueError as exc:
            self.send_error_json(422, "invalid_request", str(exc))

    def _route(self, method: str, path: str, params: dict, caller) -> None:
        service = self.service

        if method == "GET" and path == "/api/health":
            self.send_json(200, {
                "status": "ok",
                "products": len(service.registry.products),
                "audit_records": len(service.audit.records),
            })
            return

        if method == "GET" and path == "/api/dataproducts":
            terms = params.get("q", "").split()
            status = params.get("status")
            if terms:
                summaries = service.search(terms, status)
            else:
                summaries = service.list_products(status)
            self.send_json(200, [s.to_json() for s in summaries])
            return

        match = _PRODUCT_RE.match(path)
        if method == "GET" and match:
            detail = service.product_detail(match.group(1), caller)
            self.send_json(200, detail.to_json())
            return

        if method == "POST" and path == "/api/accessrequests":
            body = self.read_body()
            request = service.create_access_request(
                caller,
                product_id=self.body_str(body, "product_id"),
                purpose_text=self.body_str(body, "purpose_text"),
                purpose_category=self.body_str(body, "purpose_category", required=False),
            )
            self.send_json(200, request.to_json())
            return

        if method == "GET" and path == "/api/accessrequests":
            requests = service.list_requests(
                status=params.get("status"),
                product_id=params.get("product_id"),
                requester=params.get("requester"),
            )
            self.send_json(200, [r.to_json() for r in requests])
            return

        match = _DECISION_RE.match(path)
        if method == "POST" and match:
            body = self.read_body()
            request = service.decide_request(
                caller, match.group(1), decision=self.body_str(body, "decision"),
                note=self.body_str(body, "note", required=False),
            )
            self.send_json(200, request.to_json())
            return

        if method == "POST" and path == "/api/query":
            body = self.read_body()
            outcome = service.run_query(
                caller,
                product_id=self.body_str(body, "product_id"),
                sql_text=self.body_str(body, "sql"),
                purpose_text=self.body_str(body, "purpose_text", required=False),
            )
            if isinstance(outcome, ResultSet):
                doc = outcome.to_json()
                doc["result_digest"] = outcome.digest()
                self.send_json(200, doc)
            else:
                self.send_json(200, outcome.to_json())
            return

        if method == "GET" and path == "/api/audit":
            records = service.audit_records(
                actor=params.get("actor"),
                product_id=params.get("product_id"),
                event=params.get("event"),
                since=params.get("since"),
            )
            self.send_json(200, [r.to_json() for r in records])
            return

        if method == "GET" and path == "/api/audit/verify":
            self.send_json(200, service.verify_audit().to_json())
            return

        self.send_error_json(404, "not_found", f"no route {method} {path}")

    # -- static console ------------------------------------------------------

    def _serve_console(self, path: str) -> None:
        root: Path | None = getattr(self.server, "console_dir", None)
        if root is None:
            self.send_error_json(404, "not_found", "no console bundle configured")
            return
        rel = path[len("/console"):].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            target = root / "index.html"
            if not target.is_file():
                self.send_error_json(404, "not_found", "console file missing")
                return
        body = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


class GatewayHTTPServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address: tuple[str, int], service, console_dir: Path | None = None,
                 verbose: bool = False):
        super().__init__(address, ApiHandler)
        self.service = service
        self.console_dir = console_dir
        self.verbose = verbose


def serve(service, host: str, port: int, console_dir: Path | None = None,
          verbose: bool = True) -> None:
    """Blocking serve loop; raises OSError if the port is unavailable."""
    server = GatewayHTTPServer((host, port), service, console_dir=console_dir, verbose=verbose)
    try:
        server.serve_forever()
    finally:
        server.server_close()
