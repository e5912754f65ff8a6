"""Output encoders used by the demo application.

Each function takes raw bytes and returns the encoded form a typical web
application would emit for one output context.  The deliberately weak ones
(``backslash_quote`` everywhere, ``encode_entities`` inside URLs or event
handlers) are the point of the demo: they look plausible and survive casual
testing while remaining exploitable.
"""

from __future__ import annotations

_ALNUM = frozenset(b"0123456789" b"abcdefghijklmnopqrstuvwxyz" b"ABCDEFGHIJKLMNOPQRSTUVWXYZ")

# Unreserved characters per RFC 3986; everything else gets percent-encoded.
_URL_SAFE = _ALNUM | frozenset(b"-._~")


def encode_entities(value: bytes) -> bytes:
    """HTML-entity encode in the style of htmlspecialchars(ENT_QUOTES)."""
    value = value.replace(b"&", b"&amp;")
    value = value.replace(b"<", b"&lt;")
    value = value.replace(b">", b"&gt;")
    value = value.replace(b'"', b"&quot;")
    value = value.replace(b"'", b"&#039;")
    return value


def encode_url(value: bytes) -> bytes:
    """Percent-encode every byte outside the RFC 3986 unreserved set."""
    out = bytearray()
    for byte in value:
        if byte in _URL_SAFE:
            out.append(byte)
        else:
            out += b"%%%02X" % byte
    return bytes(out)


def backslash_quote(value: bytes) -> bytes:
    """Prefix quotes and backslashes with a backslash, addslashes-style."""
    out = bytearray()
    for byte in value:
        if byte in b"'\"\\":
            out.append(0x5C)
            out.append(byte)
        elif byte == 0:
            out += b"\\0"
        else:
            out.append(byte)
    return bytes(out)


def encode_js_hex(value: bytes) -> bytes:
    """Encode non-alphanumerics as JavaScript \\xHH escapes."""
    out = bytearray()
    for byte in value:
        if byte in _ALNUM:
            out.append(byte)
        else:
            out += b"\\x%02x" % byte
    return bytes(out)


def encode_css_hex(value: bytes) -> bytes:
    """Encode non-alphanumerics as CSS hex escapes with a closing space."""
    out = bytearray()
    for byte in value:
        if byte in _ALNUM:
            out.append(byte)
        else:
            out += b"\\%X " % byte
    return bytes(out)


def sql_quote(value: bytes) -> bytes:
    """Return a single-quoted SQL literal for *value*."""
    return b"'" + backslash_quote(value) + b"'"


def intval(value: str | bytes) -> int:
    """Parse a leading integer the way PHP's intval does; default 0."""
    if isinstance(value, bytes):
        value = value.decode("utf-8", "replace")
    value = value.strip()
    sign = 1
    if value[:1] in {"+", "-"}:
        sign = -1 if value[0] == "-" else 1
        value = value[1:]
    digits = ""
    for ch in value:
        if not ch.isdigit():
            break
        digits += ch
    return sign * int(digits) if digits else 0
