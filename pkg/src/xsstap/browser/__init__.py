"""Browser model: computes the syntax-node chain around each placeholder.

A response body with placeholders substituted in is parsed the way a
browser would parse it, recursively descending from HTML into CSS, URIs,
and JavaScript. The result per placeholder is a BrowserContext: the
ordered chain of language-specific syntax nodes enclosing it, outermost
first.
"""

from .nodes import (
    ESCAPE_CHECKED_KINDS,
    BrowserContext,
    SyntaxNode,
    SyntaxNodeKind,
    UriPosition,
)
from .contexts import compute_contexts
from .htmlparse import Region, parse_html

__all__ = [
    "ESCAPE_CHECKED_KINDS",
    "BrowserContext",
    "Region",
    "SyntaxNode",
    "SyntaxNodeKind",
    "UriPosition",
    "compute_contexts",
    "parse_html",
]
