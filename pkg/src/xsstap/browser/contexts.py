"""Ties the per-language analyzers into whole-document context chains."""

from __future__ import annotations

import bisect
from typing import Sequence

from ..decoders import decode_entities
from .cssparse import analyze_css
from .htmlparse import Region, parse_html
from .jsparse import analyze_js
from .nodes import BrowserContext, SyntaxNode, SyntaxNodeKind
from .uriparse import analyze_uri

__all__ = ["URI_ATTRIBUTES", "compute_contexts"]

# attributes whose value a browser treats as a URL
URI_ATTRIBUTES = frozenset(
    {"href", "src", "action", "formaction", "data", "poster", "background"}
)


def compute_contexts(
    body: bytes, placeholders: Sequence[bytes]
) -> list[BrowserContext]:
    """One BrowserContext per placeholder occurrence in *body*."""
    regions = parse_html(body)
    starts = [r.start for r in regions]
    contexts: list[BrowserContext] = []
    for token in placeholders:
        search = 0
        while True:
            off = body.find(token, search)
            if off == -1:
                break
            chain = _chain_at(body, regions, starts, token, off)
            contexts.append(BrowserContext(chain=tuple(chain), placeholder=token))
            search = off + len(token)
    return contexts


def _region_at(regions: list[Region], starts: list[int], off: int) -> Region | None:
    idx = bisect.bisect_right(starts, off) - 1
    if idx >= 0 and regions[idx].start <= off < regions[idx].end:
        return regions[idx]
    return None


def _chain_at(
    body: bytes,
    regions: list[Region],
    starts: list[int],
    token: bytes,
    off: int,
) -> list[SyntaxNode]:
    region = _region_at(regions, starts, off)
    if region is None:
        # inside markup itself (tag or attribute names): nothing we can verify
        return [SyntaxNode(SyntaxNodeKind.HTML_OTHER, detail="markup")]
    if region.kind == "text":
        return [SyntaxNode(SyntaxNodeKind.HTML_TEXT, detail="text")]
    if region.kind in ("comment", "decl"):
        return [SyntaxNode(SyntaxNodeKind.HTML_OTHER, detail=region.kind)]
    if region.kind == "rawtext":
        content = body[region.start : region.end]
        head = SyntaxNode(SyntaxNodeKind.HTML_DATA, detail="<%s>" % region.element)
        if region.element == "script":
            return [head] + analyze_js(content, token, "<script>")
        return [head] + analyze_css(content, token, "stylesheet", "<style>", depth=1)

    quote_kinds = {
        '"': SyntaxNodeKind.HTML_ATTR_DOUBLE_QUOTED,
        "'": SyntaxNodeKind.HTML_ATTR_SINGLE_QUOTED,
        "": SyntaxNodeKind.HTML_ATTR_UNQUOTED,
    }
    detail = "<%s %s>" % (region.element, region.attr)
    head = SyntaxNode(quote_kinds[region.quote], detail=detail)
    value = decode_entities(body[region.start : region.end])
    name = region.attr
    if name.startswith("on") and len(name) > 2:
        return [head] + analyze_js(value, token, detail)
    if name == "style":
        return [head] + analyze_css(value, token, "declarations", detail, depth=1)
    if name in URI_ATTRIBUTES:
        return [head] + analyze_uri(value, token, detail, depth=1)
    return [head]
