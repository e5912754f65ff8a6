"""CSS scanner: strings, url() arguments, declaration values.

Two entry modes: ``stylesheet`` for style element bodies (rules with
selectors and braces) and ``declarations`` for style attributes (already
inside a virtual declaration block). Strings that form a url() argument
descend into URI analysis; everything else is a leaf.
"""

from __future__ import annotations

from ..decoders import css_decode
from .nodes import SyntaxNode, SyntaxNodeKind
from .uriparse import MAX_DEPTH, analyze_uri

__all__ = ["analyze_css"]


def analyze_css(
    content: bytes, token: bytes, mode: str, detail: str, depth: int
) -> list[SyntaxNode]:
    off = content.find(token)
    if off == -1:
        return [SyntaxNode(SyntaxNodeKind.CSS_OTHER, detail=detail)]
    s = content.decode("latin-1")
    n = len(s)

    brace = 1 if mode == "declarations" else 0
    in_value = False
    in_url = False
    in_comment = False
    quote = ""
    string_start = -1
    string_in_url = False

    verdict: tuple | None = None
    string_end = -1

    i = 0
    while i < n:
        if verdict is None and i >= off:
            if in_comment:
                verdict = ("other",)
            elif quote:
                verdict = ("string", quote, string_start, string_in_url)
            elif in_url:
                verdict = ("url",)
            elif brace > 0 and in_value:
                verdict = ("value",)
            else:
                verdict = ("other",)
            if verdict[0] != "string":
                break
        c = s[i]
        if in_comment:
            if s.startswith("*/", i):
                in_comment = False
                i += 2
            else:
                i += 1
            continue
        if quote:
            if c == "\\":
                i += 2
                continue
            if c == quote or c == "\n":  # newline: unterminated, recover
                if verdict is not None:
                    string_end = i
                    break
                quote = ""
            i += 1
            continue
        if s.startswith("/*", i):
            in_comment = True
            i += 2
            continue
        if c in "\"'":
            quote = c
            string_start = i + 1
            string_in_url = in_url
        elif c == "{":
            brace += 1
            in_value = False
        elif c == "}":
            brace = max(brace - 1, 0)
            in_value = False
        elif c == ";":
            in_value = False
            in_url = False
        elif c == ":" and brace > 0:
            in_value = True
        elif c == "(":
            # the url token permits no space before its parenthesis
            ident = s[max(0, i - 3) : i].lower()
            prev = s[i - 4] if i >= 4 else ""
            if ident == "url" and not (prev.isalnum() or prev in "-_"):
                in_url = True
        elif c == ")":
            in_url = False
        i += 1

    if verdict is None:
        verdict = ("other",)

    if verdict[0] == "string":
        _, q, content_start, was_url = verdict
        if string_end == -1:
            string_end = n
        kind = (
            SyntaxNodeKind.CSS_STRING_DOUBLE
            if q == '"'
            else SyntaxNodeKind.CSS_STRING_SINGLE
        )
        node = SyntaxNode(kind, detail=detail)
        children: list[SyntaxNode] = []
        if was_url and depth + 1 < MAX_DEPTH:
            inner = css_decode(content[content_start:string_end])
            children = analyze_uri(inner, token, detail + " url()", depth + 1)
        return [node] + children
    if verdict[0] == "url":
        return [SyntaxNode(SyntaxNodeKind.CSS_URI, detail=detail)]
    if verdict[0] == "value":
        return [SyntaxNode(SyntaxNodeKind.CSS_PROPERTY_VALUE, detail=detail)]
    return [SyntaxNode(SyntaxNodeKind.CSS_OTHER, detail=detail)]
