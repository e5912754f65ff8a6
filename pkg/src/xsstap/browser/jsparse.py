"""JavaScript lexer, reduced to what the model needs: string literals.

String literals are leaves of the context chain, so the only question is
whether the token sits inside a single-quoted string, a double-quoted
string, or anything else. Template literals, comments, regex literals, and
plain code all map to the catch-all kind.
"""

from __future__ import annotations

from .nodes import SyntaxNode, SyntaxNodeKind

__all__ = ["analyze_js"]


def analyze_js(content: bytes, token: bytes, detail: str) -> list[SyntaxNode]:
    off = content.find(token)
    if off == -1:
        return [SyntaxNode(SyntaxNodeKind.JS_OTHER, detail=detail)]
    s = content.decode("latin-1")
    state = "code"
    i = 0
    while i < off:
        c = s[i]
        if state == "code":
            if c == "'":
                state = "sq"
            elif c == '"':
                state = "dq"
            elif c == "`":
                state = "template"
            elif c == "/" and i + 1 < len(s):
                if s[i + 1] == "/":
                    state = "line-comment"
                    i += 1
                elif s[i + 1] == "*":
                    state = "block-comment"
                    i += 1
        elif state in ("sq", "dq", "template"):
            if c == "\\":
                i += 1  # whatever follows is quoted
            elif state == "sq" and c == "'":
                state = "code"
            elif state == "dq" and c == '"':
                state = "code"
            elif state == "template" and c == "`":
                state = "code"
            elif state != "template" and c == "\n":
                state = "code"  # unterminated string: recover at the newline
        elif state == "line-comment":
            if c == "\n":
                state = "code"
        else:  # block comment
            if c == "*" and i + 1 < len(s) and s[i + 1] == "/":
                state = "code"
                i += 1
        i += 1

    if state == "sq":
        kind = SyntaxNodeKind.JS_STRING_SINGLE
    elif state == "dq":
        kind = SyntaxNodeKind.JS_STRING_DOUBLE
    else:
        kind = SyntaxNodeKind.JS_OTHER
    return [SyntaxNode(kind, detail=detail)]
