"""Quoting-aware HTML tokenizer.

Only the places tainted data can land need byte-accurate spans: text runs,
attribute values (with their quoting style), script/style bodies, comments,
and declarations. Tag structure beyond that is not modeled. Recovery is
total: any byte string yields a region list, never an error.

Offsets are byte offsets; the scan runs over a latin-1 view so positions
line up with the original bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = ["Region", "parse_html"]

_WS = " \t\n\r\f"

# script and style bodies are the only raw-text elements we analyze further
_RAWTEXT_CLOSE = {
    "script": re.compile(r"</script(?=[ \t\n\r\f/>]|$)", re.I),
    "style": re.compile(r"</style(?=[ \t\n\r\f/>]|$)", re.I),
}


@dataclass(frozen=True)
class Region:
    """A byte span of one syntactic role in the document."""

    kind: str  # "text" | "attr" | "rawtext" | "comment" | "decl"
    start: int
    end: int
    element: str = ""
    attr: str = ""
    quote: str = ""  # '"', "'", or "" for unquoted attribute values


def _is_ascii_alpha(c: str) -> bool:
    return "a" <= c <= "z" or "A" <= c <= "Z"


def parse_html(body: bytes) -> list[Region]:
    s = body.decode("latin-1")
    n = len(s)
    regions: list[Region] = []
    i = 0
    text_start = 0

    def flush_text(upto: int) -> None:
        if upto > text_start:
            regions.append(Region("text", text_start, upto))

    while i < n:
        if s[i] != "<":
            i += 1
            continue
        nxt = s[i + 1] if i + 1 < n else ""
        if s.startswith("<!--", i):
            flush_text(i)
            close = s.find("-->", i + 4)
            end = close if close != -1 else n
            regions.append(Region("comment", i + 4, end))
            i = end + 3 if close != -1 else n
            text_start = i
            continue
        if nxt in ("!", "?"):
            flush_text(i)
            close = s.find(">", i)
            end = close + 1 if close != -1 else n
            regions.append(Region("decl", i, end))
            i = end
            text_start = i
            continue
        if nxt == "/" or _is_ascii_alpha(nxt):
            flush_text(i)
            i, element, is_end, self_closing = _scan_tag(s, i, regions)
            if not is_end and not self_closing and element in _RAWTEXT_CLOSE:
                m = _RAWTEXT_CLOSE[element].search(s, i)
                body_end = m.start() if m else n
                regions.append(Region("rawtext", i, body_end, element=element))
                i = body_end  # the close tag is scanned as a normal tag next
            text_start = i
            continue
        i += 1  # lone '<' stays text

    flush_text(n)
    return regions


def _scan_tag(
    s: str, i: int, regions: list[Region]
) -> tuple[int, str, bool, bool]:
    """Scan one tag from its ``<``; emits attribute-value regions.

    Returns (index after the tag, element name, is_end_tag, self_closing).
    Unterminated tags consume the rest of the input.
    """
    n = len(s)
    j = i + 1
    is_end = s[j] == "/"
    if is_end:
        j += 1
    name_start = j
    while j < n and s[j] not in _WS and s[j] not in "/>":
        j += 1
    element = s[name_start:j].lower()

    while j < n:
        while j < n and (s[j] in _WS or s[j] == "/"):
            if s[j] == "/" and j + 1 < n and s[j + 1] == ">":
                return j + 2, element, is_end, True
            j += 1
        if j >= n:
            break
        if s[j] == ">":
            return j + 1, element, is_end, False
        attr_start = j
        while j < n and s[j] not in _WS and s[j] not in "=/>":
            j += 1
        attr = s[attr_start:j].lower()
        while j < n and s[j] in _WS:
            j += 1
        if j < n and s[j] == "=":
            j += 1
            while j < n and s[j] in _WS:
                j += 1
            if j < n and s[j] in "\"'":
                quote = s[j]
                value_start = j + 1
                value_end = s.find(quote, value_start)
                if value_end == -1:
                    value_end = n
                    j = n
                else:
                    j = value_end + 1
                regions.append(
                    Region("attr", value_start, value_end, element, attr, quote)
                )
            else:
                value_start = j
                while j < n and s[j] not in _WS and s[j] != ">":
                    j += 1
                regions.append(Region("attr", value_start, j, element, attr, ""))
    return n, element, is_end, False
