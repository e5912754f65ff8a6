"""Command-line entry points: run the relay or run a scan.

Exit codes: 0 on success, 2 for usage or input-file problems, 3 for
environment problems (ports that cannot be bound, endpoints that cannot
be reached).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import threading
from pathlib import Path
from typing import Optional, Sequence

from .httpmodel import CorpusError, load_corpus, template_from_record
from .proxy import ProxyServer
from .report import render_report
from .scanner import Granularity, ScanConfig, ScanError, run_scan

__all__ = ["main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ENVIRONMENT = 3

# shared secret for the relay control channel, when set
TOKEN_ENV = "XSSTAP_CONTROL_TOKEN"


def _endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    try:
        number = int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad port in {text!r}") from None
    if not 0 <= number <= 65535:
        raise argparse.ArgumentTypeError(f"port out of range in {text!r}")
    return host, number


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xsstap",
        description="stored-XSS scanner driven by database wire interception",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    proxy = sub.add_parser("proxy", help="relay database traffic for one target")
    proxy.add_argument("--listen", type=_endpoint, default=("127.0.0.1", 3306))
    proxy.add_argument("--upstream", type=_endpoint, required=True)
    proxy.add_argument("--control", type=_endpoint, default=("127.0.0.1", 9127))

    scan = sub.add_parser("scan", help="scan a request corpus through the relay")
    scan.add_argument("corpus", help="request corpus: .jsonl records or a .har capture")
    scan.add_argument("--target", type=_endpoint, required=True)
    scan.add_argument("--control", type=_endpoint, required=True)
    scan.add_argument(
        "--granularity",
        choices=[g.value for g in Granularity],
        default=Granularity.INDIVIDUAL_FETCH.value,
    )
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--timeout", type=float, default=None)
    scan.add_argument("--output", help="write the jsonl findings here")
    scan.add_argument("--config", help="JSON file with login/skip/timeout settings")
    scan.add_argument("--no-prune", action="store_true")
    scan.add_argument(
        "--skip-url", action="append", default=[], help="skip urls matching this regex"
    )
    return parser


def _load_scan_config(args: argparse.Namespace) -> ScanConfig:
    login = ()
    skip_urls = list(args.skip_url)
    timeout = 10.0
    reauth = frozenset({401, 403})
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise CorpusError("config must be a JSON object")
        login = tuple(
            template_from_record(record, default_id=f"login{i}")
            for i, record in enumerate(raw.get("login", []), start=1)
        )
        skip_urls.extend(raw.get("skip_urls", []))
        if "timeout" in raw:
            timeout = float(raw["timeout"])
        if "reauth_statuses" in raw:
            reauth = frozenset(int(s) for s in raw["reauth_statuses"])
    if args.timeout is not None:
        timeout = args.timeout
    return ScanConfig(
        target=args.target,
        control=args.control,
        granularity=Granularity(args.granularity),
        seed=args.seed,
        timeout=timeout,
        prune=not args.no_prune,
        login=login,
        reauth_statuses=reauth,
        skip_urls=tuple(skip_urls),
        control_token=os.environ.get(TOKEN_ENV),
    )


def _cmd_proxy(args: argparse.Namespace) -> int:
    try:
        server = ProxyServer(
            args.listen,
            args.upstream,
            args.control,
            control_token=os.environ.get(TOKEN_ENV),
        )
    except OSError as exc:
        print(f"error: cannot start relay: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    server.start()
    host, port = server.listen_address
    chost, cport = server.control_address
    # flush so wrappers piping stdout can block on the readiness banner
    print(f"relaying {host}:{port} -> {args.upstream[0]}:{args.upstream[1]}", flush=True)
    print(f"control channel on {chost}:{cport}", flush=True)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return EXIT_OK


def _cmd_scan(args: argparse.Namespace) -> int:
    try:
        templates = load_corpus(args.corpus)
    except OSError as exc:
        print(f"error: cannot read corpus: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CorpusError as exc:
        print(f"error: bad corpus: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        config = _load_scan_config(args)
    except (OSError, ValueError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        report = run_scan(templates, config)
    except ScanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    if args.output:
        Path(args.output).write_bytes(render_report(report, "jsonl"))
    sys.stdout.write(render_report(report, "text").decode("utf-8"))
    return EXIT_ENVIRONMENT if report.aborted else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING)
    args = _build_parser().parse_args(argv)
    if args.command == "proxy":
        return _cmd_proxy(args)
    return _cmd_scan(args)


if __name__ == "__main__":
    sys.exit(main())
