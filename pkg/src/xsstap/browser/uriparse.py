"""URI placement analysis with descent into javascript: payloads."""

from __future__ import annotations

from ..decoders import url_decode
from .jsparse import analyze_js
from .nodes import SyntaxNode, SyntaxNodeKind, UriPosition

__all__ = ["MAX_DEPTH", "analyze_uri"]

# legal chains never exceed four nodes; the cap only guards recovery loops
MAX_DEPTH = 8

_ASCII_WS = b" \t\n\r\f"
_SCHEME_BYTES = frozenset(
    b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789+-."
)


def analyze_uri(value: bytes, token: bytes, detail: str, depth: int) -> list[SyntaxNode]:
    trimmed = value.strip(_ASCII_WS)
    off = trimmed.find(token)
    if off == -1:  # trimming cannot remove the token; defensive only
        return [
            SyntaxNode(SyntaxNodeKind.URI, position=UriPosition.ELSEWHERE, detail=detail)
        ]
    colon = trimmed.find(b":")
    token_end = off + len(token)

    if off == 0:
        position = UriPosition.BEGINNING
    else:
        if colon >= token_end:
            # the token sits inside what reads as the scheme; completing a
            # dangerous scheme around it needs human judgement
            rest = trimmed[:off] + trimmed[token_end:colon]
            if all(b in _SCHEME_BYTES for b in rest):
                return [SyntaxNode(SyntaxNodeKind.URI_SCHEME, detail=detail)]
        position = UriPosition.ELSEWHERE

    node = SyntaxNode(SyntaxNodeKind.URI, position=position, detail=detail)
    children: list[SyntaxNode] = []
    if colon != -1 and off > colon and depth + 1 < MAX_DEPTH:
        if trimmed[:colon].lower() == b"javascript":
            remainder = url_decode(trimmed[colon + 1 :])
            children = analyze_js(remainder, token, detail + " javascript:")
    return [node] + children
