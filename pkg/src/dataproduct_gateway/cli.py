"""Operator command line: seed fixtures, run the gateway or the MCP
server, verify the audit chain, and replay the demonstration scenarios."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import audit, gateway, httpd, mcp_server, replay, seed
from .catalog import RegistryError


def _add_registry(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--registry", type=Path, required=True,
                        help="registry directory (see 'seed')")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpgateway",
        description="governed data-product gateway",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_seed = sub.add_parser("seed", help="write the seed registry")
    _add_registry(p_seed)
    p_seed.add_argument("--force", action="store_true",
                        help="overwrite a non-empty target directory")

    p_serve = sub.add_parser("serve", help="run the gateway HTTP API")
    _add_registry(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8080)
    p_serve.add_argument("--audit-file", type=Path, default=None,
                         help="audit chain path (default: REGISTRY/audit.log)")
    p_serve.add_argument("--console-dir", type=Path, default=None,
                         help="static console bundle to serve at /console")

    sub.add_parser("mcp", help="run the MCP stdio server "
                               f"(needs {mcp_server.ENV_URL} and {mcp_server.ENV_KEY})")

    p_verify = sub.add_parser("verify-audit", help="verify the audit chain hashes")
    p_verify.add_argument("--audit-file", type=Path, required=True)

    p_replay = sub.add_parser("replay", help="replay a demonstration scenario")
    p_replay.add_argument("scenario", type=int, choices=(1, 2, 3))
    _add_registry(p_replay)
    p_replay.add_argument("--host", default="127.0.0.1")
    p_replay.add_argument("--port", type=int, default=8080)
    p_replay.add_argument("--auto-approve", action="store_true",
                          help="perform the data owner's approval automatically")

    return parser


def cmd_seed(args) -> int:
    try:
        target = seed.write_seed(args.registry, force=args.force)
    except FileExistsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"seed registry written to {target}")
    return 0


def cmd_serve(args) -> int:
    audit_file = args.audit_file or args.registry / "audit.log"
    config = gateway.GatewayConfig(
        registry_dir=args.registry,
        audit_file=audit_file,
        host=args.host,
        port=args.port,
        console_dir=args.console_dir,
    )
    try:
        service = gateway.build_service(config)
    except RegistryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"gateway listening on http://{args.host}:{args.port} "
          f"({len(service.registry.products)} products, audit: {audit_file})")
    try:
        httpd.serve(service, args.host, args.port, console_dir=args.console_dir)
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("shutting down")
    return 0


def cmd_mcp() -> int:
    try:
        server = mcp_server.from_environment(os.environ)
    except mcp_server.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    server.serve()
    return 0


def cmd_verify_audit(args) -> int:
    status = audit.verify_chain(args.audit_file)
    if status.ok:
        count = len(audit.read_records(args.audit_file)) if args.audit_file.exists() else 0
        print(f"audit chain OK ({count} records)")
        return 0
    print(f"audit chain BROKEN at seq {status.first_bad_seq}")
    return 1


def cmd_replay(args) -> int:
    url = f"http://{args.host}:{args.port}"
    runner = replay.ScenarioRunner(args.registry, url)
    code = runner.run(args.scenario, auto_approve=args.auto_approve)
    print("scenario outcome matched" if code == 0 else "scenario diverged", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "seed":
        return cmd_seed(args)
    if args.command == "serve":
        return cmd_serve(args)
    if args.command == "mcp":
        return cmd_mcp()
    if args.command == "verify-audit":
        return cmd_verify_audit(args)
    if args.command == "replay":
        return cmd_replay(args)
    return 2


if __name__ == "__main__":
    sys.exit(main())
