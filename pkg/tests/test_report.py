"""Report rendering: jsonl wire format and the text summary."""

import base64
import json

import pytest

from xsstap.browser import SyntaxNode, SyntaxNodeKind, UriPosition
from xsstap.payloads import canonical_payload
from xsstap.report import SEVERITY_PHRASES, finding_to_wire, render_report
from xsstap.scanner import (
    Finding,
    Granularity,
    InjectionPoint,
    PointKind,
    ScanReport,
)
from xsstap.verifier import Outcome

PAYLOAD = canonical_payload().encode()
MATCHED = b"abcdef&lt;gh&quot;ij&#039;kl&amp;mn:op\\qr/stuv"

FINDING = Finding(
    request_id="front",
    point=InjectionPoint(
        PointKind.DB_FETCH_GROUP, table="sessions", column="topic", value=b"hello"
    ),
    payload_id="abcdefghijklmnopqrstuv",
    payload=PAYLOAD,
    matched=MATCHED,
    chain=(
        SyntaxNode(SyntaxNodeKind.HTML_ATTR_DOUBLE_QUOTED, detail="<a onclick>"),
        SyntaxNode(SyntaxNodeKind.JS_STRING_SINGLE),
    ),
    outcome=Outcome.FLAW_ARBITRARY_JS,
    failing_node=1,
    evidence=PAYLOAD,
    response_status=200,
)


def report_with(findings) -> ScanReport:
    report = ScanReport(granularity=Granularity.INDIVIDUAL_FETCH, seed=7)
    for finding in findings:
        report.findings.append(finding)
        report.flaw_counts[finding.outcome.value] += 1
    return report


class TestJsonl:
    def test_wire_record_content(self):
        assert finding_to_wire(FINDING) == {
            "request": "front",
            "point": {
                "kind": "db-fetch-group",
                "table": "sessions",
                "column": "topic",
                "value_b64": base64.b64encode(b"hello").decode(),
            },
            "payload_id": "abcdefghijklmnopqrstuv",
            "payload_text": PAYLOAD.decode("ascii"),
            "matched_b64": base64.b64encode(MATCHED).decode(),
            "matched_text": MATCHED.decode(),
            "chain": [
                {"kind": "html-attr-double-quoted", "detail": "<a onclick>"},
                {"kind": "js-string-single"},
            ],
            "verdict": "flaw-arbitrary-js",
            "status": 200,
            "failing_node": 1,
            "evidence_b64": base64.b64encode(PAYLOAD).decode(),
        }

    def test_uri_node_carries_position(self):
        finding = Finding(
            request_id="r",
            point=InjectionPoint(PointKind.QUERY_PARAM, name="q"),
            payload_id="x",
            payload=b"x",
            matched=b"x",
            chain=(SyntaxNode(SyntaxNodeKind.URI, position=UriPosition.BEGINNING),),
            outcome=Outcome.FLAW_NO_JS_EXECUTION,
            failing_node=0,
            evidence=None,
            response_status=200,
        )
        wire = finding_to_wire(finding)
        assert wire["chain"] == [{"kind": "uri", "position": "beginning"}]
        assert wire["point"] == {"kind": "query-param", "name": "q"}
        assert "evidence_b64" not in wire

    def test_one_compact_sorted_line_per_finding(self):
        rendered = render_report(report_with([FINDING, FINDING]), "jsonl")
        lines = rendered.decode().splitlines()
        assert len(lines) == 2
        parsed = json.loads(lines[0])
        assert lines[0] == json.dumps(parsed, sort_keys=True, separators=(",", ":"))

    def test_empty_report_renders_empty(self):
        assert render_report(report_with([]), "jsonl") == b""


class TestText:
    def test_summary_and_finding_blocks(self):
        report = report_with([FINDING])
        report.correct_sanitizations = 11
        report.counters["templates_scanned"] = 21
        report.counters["http_requests_sent"] = 44
        report.counters["groups_pruned"] = 1
        text = render_report(report, "text").decode()
        assert "granularity: individual   seed: 7" in text
        assert "corpus requests scanned: 21" in text
        assert "http requests sent: 44" in text
        assert "fetch groups pruned: 1" in text
        assert "correct sanitizations observed: 11" in text
        assert "permits arbitrary JavaScript execution: 1" in text
        assert "[1] request front, stored value sessions.topic=hello" in text
        assert "context: html-attr-double-quoted > js-string-single" in text
        assert "injected:  " + PAYLOAD.decode() in text
        assert "reflected: " + MATCHED.decode() in text

    def test_aborted_banner(self):
        report = report_with([])
        report.aborted = True
        report.abort_reason = "control channel failed: gone"
        text = render_report(report, "text").decode()
        assert "SCAN ABORTED EARLY: control channel failed: gone" in text

    def test_every_outcome_has_a_distinct_phrase(self):
        phrases = set(SEVERITY_PHRASES.values())
        assert len(phrases) == 4
        flawed = {o for o in Outcome if o is not Outcome.CORRECT_SANITIZATION}
        assert set(SEVERITY_PHRASES) == flawed

    def test_unknown_format_rejected(self):
        with pytest.raises(ValueError):
            render_report(report_with([]), "pdf")
