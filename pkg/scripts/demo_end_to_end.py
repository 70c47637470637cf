#!/usr/bin/env python3
"""One-shot demo: seed a registry, start the gateway, replay all three
scenarios through the MCP server, then verify the audit chain.

Usage: python scripts/demo_end_to_end.py [workdir]
"""

from __future__ import annotations

import sys
import tempfile
import threading
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dataproduct_gateway import seed
from dataproduct_gateway.audit import verify_chain
from dataproduct_gateway.gateway import GatewayConfig, build_service
from dataproduct_gateway.httpd import GatewayHTTPServer
from dataproduct_gateway.replay import ScenarioRunner


def main() -> int:
    workdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="dpgw-"))
    registry_dir = workdir / "registry"
    audit_file = workdir / "audit.log"
    seed.write_seed(registry_dir, force=True)
    print(f"registry seeded at {registry_dir}")

    service = build_service(GatewayConfig(registry_dir=registry_dir, audit_file=audit_file))
    server = GatewayHTTPServer(("127.0.0.1", 0), service)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    url = f"http://127.0.0.1:{server.server_address[1]}"
    print(f"gateway listening at {url}\n")

    runner = ScenarioRunner(registry_dir, url)
    failures = 0
    failures += runner.run(1, auto_approve=True)
    print()
    failures += runner.run(2)
    print()
    failures += runner.run(3)
    print()

    status = verify_chain(audit_file)
    print(f"audit chain: {'OK' if status.ok else f'BROKEN at {status.first_bad_seq}'} "
          f"({len(service.audit.records)} records at {audit_file})")
    server.shutdown()
    return 1 if failures or not status.ok else 0


if __name__ == "__main__":
    sys.exit(main())
