"""Graybox stored-XSS scanner driven by database wire-traffic interception.

The package is organized in three layers:

* ``wire``, ``intercept``, ``control``, ``proxy``: a MySQL-protocol
  man-in-the-middle relay that records which table cells an application
  fetches and can rewrite string-typed result cells in flight.
* ``payloads``, ``browser``, ``verifier``: trackable payload generation,
  recovery of (possibly sanitized) payload reflections from HTTP responses,
  browser-context analysis of the reflection point, and the sanitization
  verdict.
* ``httpmodel``, ``scanner``, ``report``, ``cli``: request-corpus replay,
  the scan loop that ties the proxy to the analyzers, and reporting.
"""

__version__ = "0.1.0"

from .browser import BrowserContext, SyntaxNode, SyntaxNodeKind, UriPosition, compute_contexts
from .control import ControlClient, ControlError, ControlServer
from .httpmodel import RequestTemplate, Response, load_corpus, replay
from .intercept import (
    ConnectionInterceptor,
    FetchEvent,
    InjectionSpec,
    ProxyMode,
    ProxyState,
)
from .payloads import Payload, canonical_payload, derive_pattern, find_matches, payload_stream
from .proxy import ProxyServer, run_proxy
from .report import render_report
from .scanner import (
    Finding,
    Granularity,
    InjectionPoint,
    PointKind,
    ScanConfig,
    ScanError,
    ScanReport,
    run_scan,
)
from .verifier import Outcome, Verdict, verify

__all__ = [
    "BrowserContext",
    "ConnectionInterceptor",
    "ControlClient",
    "ControlError",
    "ControlServer",
    "FetchEvent",
    "Finding",
    "Granularity",
    "InjectionPoint",
    "InjectionSpec",
    "Outcome",
    "Payload",
    "PointKind",
    "ProxyMode",
    "ProxyServer",
    "ProxyState",
    "RequestTemplate",
    "Response",
    "ScanConfig",
    "ScanError",
    "ScanReport",
    "SyntaxNode",
    "SyntaxNodeKind",
    "UriPosition",
    "Verdict",
    "canonical_payload",
    "compute_contexts",
    "derive_pattern",
    "find_matches",
    "load_corpus",
    "payload_stream",
    "render_report",
    "replay",
    "run_proxy",
    "run_scan",
    "verify",
    "__version__",
]
