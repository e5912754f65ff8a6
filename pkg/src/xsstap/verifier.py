"""Sanitization verdicts for recovered payload reflections.

The walk replays what a browser would do to the reflected bytes: at each
node of the context chain it first asks whether the value can break out of
that node (the escape condition), and only if it cannot, applies the
node's decoding step and moves inward. Node kinds without a defined
condition are reported for manual analysis.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

from .browser import (
    ESCAPE_CHECKED_KINDS,
    BrowserContext,
    SyntaxNode,
    SyntaxNodeKind,
    UriPosition,
)
from .decoders import (
    css_decode,
    decode_entities,
    strip_css_escapes,
    strip_js_escapes,
    url_decode,
)

__all__ = [
    "Outcome",
    "Verdict",
    "classify_severity",
    "decode",
    "escape_condition",
    "verify",
]


class Outcome(Enum):
    CORRECT_SANITIZATION = "correct-sanitization"
    FLAW_ARBITRARY_JS = "flaw-arbitrary-js"
    FLAW_POSSIBLY_ARBITRARY_JS = "flaw-possibly-arbitrary-js"
    FLAW_NO_JS_EXECUTION = "flaw-no-js-execution"
    FLAW_MANUAL_ANALYSIS = "flaw-manual-analysis"


@dataclass(frozen=True)
class Verdict:
    """Result of verifying one reflection against its context chain.

    ``failing_node`` indexes the chain node where the walk stopped and is
    present exactly for non-correct outcomes. ``evidence`` is the working
    value at that node, after the decodes of all enclosing nodes.
    """

    outcome: Outcome
    failing_node: int | None = None
    evidence: bytes | None = None


def _has_unescaped_slash(v: bytes) -> bool:
    for i, byte in enumerate(v):
        if byte == 0x2F and (i == 0 or v[i - 1] != 0x5C):
            return True
    return False


def escape_condition(
    kind: SyntaxNodeKind, v: bytes, position: UriPosition | None = None
) -> bool:
    """Can *v* terminate or escape a node of this kind?"""
    if kind is SyntaxNodeKind.HTML_TEXT:
        return b"<" in v
    if kind is SyntaxNodeKind.HTML_ATTR_DOUBLE_QUOTED:
        return b'"' in v
    if kind is SyntaxNodeKind.HTML_ATTR_SINGLE_QUOTED:
        return b"'" in v
    if kind is SyntaxNodeKind.HTML_DATA:
        # closing a script/style element needs both characters; a
        # backslash-quoted slash cannot form the close sequence
        return b"<" in v and _has_unescaped_slash(v)
    if kind is SyntaxNodeKind.URI:
        if position is UriPosition.BEGINNING:
            return b":" in v
        return b"&" in v
    if kind is SyntaxNodeKind.JS_STRING_DOUBLE:
        stripped = strip_js_escapes(v)
        return b'"' in stripped or b"\\" in stripped
    if kind is SyntaxNodeKind.JS_STRING_SINGLE:
        stripped = strip_js_escapes(v)
        return b"'" in stripped or b"\\" in stripped
    if kind is SyntaxNodeKind.CSS_STRING_DOUBLE:
        stripped = strip_css_escapes(v)
        return b'"' in stripped or b"\\" in stripped
    if kind is SyntaxNodeKind.CSS_STRING_SINGLE:
        stripped = strip_css_escapes(v)
        return b"'" in stripped or b"\\" in stripped
    raise ValueError("no escape condition for %s" % kind)


def decode(kind: SyntaxNodeKind, v: bytes) -> bytes:
    """The decoding a browser applies before parsing the enclosed content."""
    if kind in (
        SyntaxNodeKind.HTML_ATTR_DOUBLE_QUOTED,
        SyntaxNodeKind.HTML_ATTR_SINGLE_QUOTED,
    ):
        return decode_entities(v)
    if kind is SyntaxNodeKind.URI:
        return url_decode(v)
    if kind in (SyntaxNodeKind.CSS_STRING_DOUBLE, SyntaxNodeKind.CSS_STRING_SINGLE):
        return css_decode(v)
    return v  # HTML text and data, JS strings: kept identical


def classify_severity(
    kind: SyntaxNodeKind, position: UriPosition | None, evidence: bytes
) -> Outcome:
    if kind is SyntaxNodeKind.URI and position is not UriPosition.BEGINNING:
        # escaping into the middle of a URL permits parameter tampering only
        return Outcome.FLAW_NO_JS_EXECUTION
    if kind is SyntaxNodeKind.JS_STRING_DOUBLE:
        if b'"' not in strip_js_escapes(evidence):
            return Outcome.FLAW_POSSIBLY_ARBITRARY_JS
    if kind is SyntaxNodeKind.JS_STRING_SINGLE:
        if b"'" not in strip_js_escapes(evidence):
            return Outcome.FLAW_POSSIBLY_ARBITRARY_JS
    return Outcome.FLAW_ARBITRARY_JS


def verify(
    matched_bytes: bytes, chain: Union[BrowserContext, Sequence[SyntaxNode]]
) -> Verdict:
    """Walk the chain outermost-first and classify the reflection."""
    nodes = chain.chain if isinstance(chain, BrowserContext) else tuple(chain)
    v = matched_bytes
    for i, node in enumerate(nodes):
        if node.kind not in ESCAPE_CHECKED_KINDS:
            return Verdict(Outcome.FLAW_MANUAL_ANALYSIS, failing_node=i, evidence=v)
        if escape_condition(node.kind, v, node.position):
            severity = classify_severity(node.kind, node.position, v)
            return Verdict(severity, failing_node=i, evidence=v)
        v = decode(node.kind, v)
    return Verdict(Outcome.CORRECT_SANITIZATION)
