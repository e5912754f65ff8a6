"""Syntax-node taxonomy shared by the browser model and the verifier."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class SyntaxNodeKind(Enum):
    HTML_TEXT = "html-text"
    HTML_ATTR_DOUBLE_QUOTED = "html-attr-double-quoted"
    HTML_ATTR_SINGLE_QUOTED = "html-attr-single-quoted"
    HTML_ATTR_UNQUOTED = "html-attr-unquoted"
    HTML_DATA = "html-data"
    URI = "uri"
    JS_STRING_DOUBLE = "js-string-double"
    JS_STRING_SINGLE = "js-string-single"
    CSS_STRING_DOUBLE = "css-string-double"
    CSS_STRING_SINGLE = "css-string-single"
    CSS_PROPERTY_VALUE = "css-property-value"
    CSS_URI = "css-uri"
    JS_OTHER = "js-other"
    HTML_OTHER = "html-other"
    CSS_OTHER = "css-other"
    URI_SCHEME = "uri-scheme"


# kinds with a defined escape condition and decoder; a placeholder landing
# in any other kind is reported for manual analysis
ESCAPE_CHECKED_KINDS = frozenset(
    {
        SyntaxNodeKind.HTML_TEXT,
        SyntaxNodeKind.HTML_ATTR_DOUBLE_QUOTED,
        SyntaxNodeKind.HTML_ATTR_SINGLE_QUOTED,
        SyntaxNodeKind.HTML_DATA,
        SyntaxNodeKind.URI,
        SyntaxNodeKind.JS_STRING_DOUBLE,
        SyntaxNodeKind.JS_STRING_SINGLE,
        SyntaxNodeKind.CSS_STRING_DOUBLE,
        SyntaxNodeKind.CSS_STRING_SINGLE,
    }
)


class UriPosition(Enum):
    BEGINNING = "beginning"
    ELSEWHERE = "elsewhere"


@dataclass(frozen=True)
class SyntaxNode:
    """One node in a context chain.

    ``position`` records where in the URI the placeholder sits and exists
    exactly for URI nodes. ``detail`` is a human-readable locus such as the
    element and attribute name; it never influences analysis.
    """

    kind: SyntaxNodeKind
    position: UriPosition | None = None
    detail: str = ""

    def __post_init__(self) -> None:
        has_position = self.position is not None
        if has_position != (self.kind is SyntaxNodeKind.URI):
            raise ValueError("position is set iff the node is a URI")


@dataclass(frozen=True)
class BrowserContext:
    """The chain of syntax nodes around one placeholder, outermost first."""

    chain: tuple[SyntaxNode, ...]
    placeholder: bytes
