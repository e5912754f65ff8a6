"""Decoding and escape-stripping primitives."""

import pytest
from hypothesis import given, strategies as st

from xsstap.decoders import (
    css_decode,
    decode_entities,
    strip_css_escapes,
    strip_js_escapes,
    url_decode,
)


# --- HTML entities ----------------------------------------------------------


@pytest.mark.parametrize(
    "encoded,decoded",
    [
        (b"&#039;", b"'"),
        (b"&lt;", b"<"),
        (b"&gt;", b">"),
        (b"&quot;", b'"'),
        (b"&apos;", b"'"),
        (b"&amp;mn", b"&mn"),
        (b"&#x3C;", b"<"),
        (b"&#60;", b"<"),
        (b"no entities here", b"no entities here"),
        (b"&bogus;", b"&bogus;"),
        (b"mix &lt;a&gt; &quot;q&quot;", b'mix <a> "q"'),
    ],
)
def test_entity_decode_golden(encoded, decoded):
    assert decode_entities(encoded) == decoded


def test_entity_decode_keeps_non_utf8_bytes():
    assert decode_entities(b"\xff&lt;\xfe") == b"\xff<\xfe"


sanitizer_fragments = st.sampled_from(
    [
        b"a", b"z", b"qq",
        b"&amp;", b"&lt;", b"&gt;", b"&quot;", b"&#039;", b"&apos;", b"&#x3C;",
        b"<", b'"', b"'", b"&", b":", b"\\", b"/", b"%26", b" ",
    ]
)


@given(st.lists(sanitizer_fragments, max_size=30))
def test_entity_decode_never_expands_sanitizer_output(fragments):
    data = b"".join(fragments)
    assert len(decode_entities(data)) <= len(data)


# --- URL decoding -----------------------------------------------------------


@pytest.mark.parametrize(
    "encoded,decoded",
    [
        (b"%3A", b":"),
        (b"%3a", b":"),
        (b"%26", b"&"),
        (b"a%20b", b"a b"),
        (b"%zz", b"%zz"),
        (b"%3", b"%3"),
        (b"100%", b"100%"),
        (b"a+b", b"a+b"),  # plus is not decoded outside form data
    ],
)
def test_url_decode_golden(encoded, decoded):
    assert url_decode(encoded) == decoded


@given(st.binary(max_size=200))
def test_url_decode_never_expands(data):
    assert len(url_decode(data)) <= len(data)


# --- CSS decoding -----------------------------------------------------------


@pytest.mark.parametrize(
    "encoded,decoded",
    [
        (b"\\22", b'"'),
        (b"\\22 x", b'"x'),
        (b"\\022", b'"'),
        (b"\\000022", b'"'),
        (b"\\000022x", b'"x'),
        (b"\\27", b"'"),
        (b"\\<", b"<"),
        (b"\\0", b"\x00"),
        (b"\\110000", b"\\110000"),  # beyond the last codepoint: untouched
        (b"\\D800", b"\\D800"),  # surrogate: untouched
        (b"\\\n", b""),  # string line continuation
        (b"plain", b"plain"),
        (b"trailing\\", b"trailing\\"),
    ],
)
def test_css_decode_golden(encoded, decoded):
    assert css_decode(encoded) == decoded


def test_css_decode_matches_reference_for_all_byte_codepoints():
    # hex escape of every codepoint below 256 decodes to that character
    for cp in range(256):
        assert css_decode(b"\\%X " % cp) == chr(cp).encode("utf-8")
        assert css_decode(b"\\%x " % cp) == chr(cp).encode("utf-8")


@given(st.binary(max_size=200))
def test_css_decode_never_expands(data):
    assert len(css_decode(data)) <= len(data)


# --- escape stripping -------------------------------------------------------


@pytest.mark.parametrize(
    "raw,stripped",
    [
        (b"op\\qr", b"opr"),
        (b"a\\'b", b"ab"),
        (b"\\\\'", b"'"),
        (b"ab\\", b"ab\\"),
        (b"\\n\\t", b""),
        (b"\\\nx", b"x"),
        (b"clean", b"clean"),
    ],
)
def test_strip_js_escapes_golden(raw, stripped):
    assert strip_js_escapes(raw) == stripped


@pytest.mark.parametrize(
    "raw,stripped",
    [
        (b"\\22 x", b"x"),
        (b"\\22x", b"x"),
        (b"\\'", b""),
        (b"\\abcdef0", b"0"),  # six hex digits max, then a literal
        (b"ab\\", b"ab\\"),
        (b"\\ ", b""),
        (b"clean", b"clean"),
    ],
)
def test_strip_css_escapes_golden(raw, stripped):
    assert strip_css_escapes(raw) == stripped


@given(st.binary(max_size=200))
def test_stripping_never_expands_and_consumes_pairs(data):
    for strip in (strip_js_escapes, strip_css_escapes):
        out = strip(data)
        assert len(out) <= len(data)
        # a backslash can only survive as the very last byte
        assert b"\\" not in out[:-1]
