"""Rendering of scan reports: machine-readable jsonl and a text summary.

The jsonl form is byte-deterministic for a given corpus and seed: one
finding per line, keys sorted, no timing information.  The text form is
for humans and includes the instrumentation counters.
"""

from __future__ import annotations

import base64
import json

from .browser import SyntaxNode
from .scanner import Finding, InjectionPoint, ScanReport
from .verifier import Outcome

__all__ = ["SEVERITY_PHRASES", "finding_to_wire", "render_report"]

SEVERITY_PHRASES = {
    Outcome.FLAW_ARBITRARY_JS: "permits arbitrary JavaScript execution",
    Outcome.FLAW_POSSIBLY_ARBITRARY_JS: "may permit arbitrary JavaScript execution",
    Outcome.FLAW_NO_JS_EXECUTION: (
        "permits content tampering but not JavaScript execution"
    ),
    Outcome.FLAW_MANUAL_ANALYSIS: "needs manual analysis (unmodeled context)",
}


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _point_to_wire(point: InjectionPoint) -> dict:
    wire: dict = {"kind": point.kind.value}
    if point.name is not None:
        wire["name"] = point.name
    if point.table is not None:
        wire["table"] = point.table
    if point.column is not None:
        wire["column"] = point.column
    if point.value is not None:
        wire["value_b64"] = _b64(point.value)
    return wire


def _node_to_wire(node: SyntaxNode) -> dict:
    wire: dict = {"kind": node.kind.value}
    if node.position is not None:
        wire["position"] = node.position.value
    if node.detail:
        wire["detail"] = node.detail
    return wire


def finding_to_wire(finding: Finding) -> dict:
    wire = {
        "request": finding.request_id,
        "point": _point_to_wire(finding.point),
        "payload_id": finding.payload_id,
        "payload_text": finding.payload.decode("ascii"),
        "matched_b64": _b64(finding.matched),
        "matched_text": finding.matched.decode("utf-8", "replace"),
        "chain": [_node_to_wire(node) for node in finding.chain],
        "verdict": finding.outcome.value,
        "status": finding.response_status,
    }
    if finding.failing_node is not None:
        wire["failing_node"] = finding.failing_node
    if finding.evidence is not None:
        wire["evidence_b64"] = _b64(finding.evidence)
    return wire


def _render_jsonl(report: ScanReport) -> bytes:
    lines = [
        json.dumps(finding_to_wire(f), sort_keys=True, separators=(",", ":"))
        for f in report.findings
    ]
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


def _chain_text(chain: tuple[SyntaxNode, ...]) -> str:
    parts = []
    for node in chain:
        text = node.kind.value
        if node.position is not None:
            text += "@" + node.position.value
        parts.append(text)
    return " > ".join(parts) if parts else "(no context)"


def _render_text(report: ScanReport) -> bytes:
    c = report.counters
    lines = [
        "stored XSS scan report",
        "======================",
        f"granularity: {report.granularity.value}   seed: {report.seed}",
        "corpus requests scanned: %d (skipped %d, failed %d)"
        % (c["templates_scanned"], c["templates_skipped"], c["templates_failed"]),
        "http requests sent: %d" % c["http_requests_sent"],
        "fetch events recorded: %d" % c["fetch_events_recorded"],
        "fetch groups pruned: %d" % c["groups_pruned"],
        "server errors on injection: %d   network errors: %d"
        % (c["server_errors"], c["network_errors"]),
        "correct sanitizations observed: %d" % report.correct_sanitizations,
        "flaws found: %d" % len(report.findings),
    ]
    for outcome, phrase in SEVERITY_PHRASES.items():
        lines.append("  %s: %d" % (phrase, report.flaw_counts[outcome.value]))
    lines.append("wall time: %.2fs" % report.wall_time_seconds)
    if report.aborted:
        lines.append("SCAN ABORTED EARLY: %s" % report.abort_reason)
    if report.findings:
        lines.extend(["", "findings", "--------"])
    for i, finding in enumerate(report.findings, start=1):
        lines.extend(
            [
                "[%d] request %s, %s" % (i, finding.request_id, finding.point.describe()),
                "    %s" % SEVERITY_PHRASES[finding.outcome],
                "    context: %s" % _chain_text(finding.chain),
                "    injected:  %s" % finding.payload.decode("ascii"),
                "    reflected: %s" % finding.matched.decode("utf-8", "replace"),
                "    status %d" % finding.response_status,
            ]
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def render_report(report: ScanReport, fmt: str = "text") -> bytes:
    """Render *report* as ``"jsonl"`` or ``"text"`` bytes."""
    if fmt == "jsonl":
        return _render_jsonl(report)
    if fmt == "text":
        return _render_text(report)
    raise ValueError(f"unknown report format {fmt!r}")
