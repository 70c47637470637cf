from __future__ import annotations

import json
import sys
import threading
import urllib.error
import urllib.request
from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dataproduct_gateway import seed
from dataproduct_gateway.audit import AuditLog
from dataproduct_gateway.catalog import load_registry
from dataproduct_gateway.gateway import GatewayService
from dataproduct_gateway.httpd import GatewayHTTPServer

ALICE_KEY = "key-alice-analyst"
BOB_KEY = "key-bob-analyst"
DANA_KEY = "key-dana-owner"


class FixedClock:
    """Deterministic clock: starts at a fixed instant, advances 1s per call."""

    def __init__(self, start: datetime | None = None):
        self.now = start or datetime(2026, 1, 1, 0, 0, 0, tzinfo=timezone.utc)

    def __call__(self) -> datetime:
        current = self.now
        self.now = current + timedelta(seconds=1)
        return current


@pytest.fixture(scope="session")
def seed_dir(tmp_path_factory) -> Path:
    target = tmp_path_factory.mktemp("registry")
    seed.write_seed(target, force=True)
    return target


@pytest.fixture
def registry(seed_dir):
    return load_registry(seed_dir)


def make_service(seed_dir: Path, audit_path: Path) -> GatewayService:
    return GatewayService(
        load_registry(seed_dir),
        AuditLog(audit_path, clock=FixedClock()),
        clock=FixedClock(),
    )


@pytest.fixture
def service(seed_dir, tmp_path) -> GatewayService:
    return make_service(seed_dir, tmp_path / "audit.log")


@pytest.fixture
def users(registry):
    return registry.users


@pytest.fixture
def http_gateway(service):
    """A live HTTP server around the service; yields (base_url, service)."""
    server = GatewayHTTPServer(("127.0.0.1", 0), service)
    thread = threading.Thread(target=lambda: server.serve_forever(poll_interval=0.02),
                              daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, service
    server.shutdown()
    server.server_close()


def api(base: str, method: str, path: str, key: str | None = None,
        body: dict | None = None) -> tuple[int, object]:
    """Minimal JSON-over-HTTP helper returning (status, parsed body)."""
    data = json.dumps(body).encode("utf-8") if body is not None else None
    request = urllib.request.Request(base + path, data=data, method=method)
    if key is not None:
        request.add_header("X-Api-Key", key)
    if data is not None:
        request.add_header("Content-Type", "application/json")
    try:
        with urllib.request.urlopen(request, timeout=10) as response:
            return response.status, json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raw = exc.read().decode("utf-8")
        return exc.code, json.loads(raw) if raw else {}
