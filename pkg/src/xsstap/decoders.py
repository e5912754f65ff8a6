"""Byte-level decoders mirroring the decoding steps browsers apply.

All functions take and return bytes. Malformed escape sequences pass
through unchanged; decoding never raises. Every decoder is non-expanding
on realistic sanitizer output, which the verifier relies on.
"""

from __future__ import annotations

import html
import re
import urllib.parse

__all__ = [
    "css_decode",
    "decode_entities",
    "strip_css_escapes",
    "strip_js_escapes",
    "url_decode",
]


def decode_entities(data: bytes) -> bytes:
    """HTML character reference decoding (named, decimal, hex)."""
    # surrogateescape keeps non-UTF-8 bytes intact through the str round trip
    text = data.decode("utf-8", "surrogateescape")
    return html.unescape(text).encode("utf-8", "surrogateescape")


def url_decode(data: bytes) -> bytes:
    """Percent decoding. Plus signs are left alone (no form semantics)."""
    return urllib.parse.unquote_to_bytes(data)


_CSS_ESCAPE = re.compile(
    rb"\\([0-9A-Fa-f]{1,6})[ \t\n\r\f]?|\\(\r\n|[\n\r\f])|\\(.)", re.DOTALL
)


def _css_unescape_one(match: re.Match[bytes]) -> bytes:
    hex_digits, newline, literal = match.groups()
    if hex_digits is not None:
        cp = int(hex_digits, 16)
        if cp == 0:
            return b"\x00"
        if cp > 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
            return match.group(0)
        return chr(cp).encode("utf-8")
    if newline is not None:
        return b""  # escaped newline inside a string: line continuation
    return literal


def css_decode(data: bytes) -> bytes:
    """CSS escape decoding: hex escapes, line continuations, identity."""
    return _CSS_ESCAPE.sub(_css_unescape_one, data)


_JS_ESCAPE = re.compile(rb"\\.", re.DOTALL)


def strip_js_escapes(data: bytes) -> bytes:
    """Remove every backslash-plus-character pair.

    Anything a backslash quotes cannot terminate a JS string literal, so
    escape checks run on what remains. A lone trailing backslash stays:
    it will quote whichever byte follows the value, which is a flaw signal.
    """
    return _JS_ESCAPE.sub(b"", data)


_CSS_STRIP = re.compile(rb"\\[0-9A-Fa-f]{1,6}[ \t\n\r\f]?|\\.", re.DOTALL)


def strip_css_escapes(data: bytes) -> bytes:
    """Remove CSS escape sequences; a lone trailing backslash stays."""
    return _CSS_STRIP.sub(b"", data)
