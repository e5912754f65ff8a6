"""Browser-context computation: parsing, routing, and chain shapes."""

from html.parser import HTMLParser

import pytest

from xsstap.browser import (
    BrowserContext,
    SyntaxNodeKind as K,
    UriPosition,
    compute_contexts,
    parse_html,
)
from xsstap.browser.cssparse import analyze_css
from xsstap.browser.jsparse import analyze_js
from xsstap.browser.uriparse import analyze_uri

T = b"phzqworta"


def one_context(template: bytes) -> BrowserContext:
    body = template.replace(b"[PH]", T)
    contexts = compute_contexts(body, [T])
    assert len(contexts) == 1
    return contexts[0]


def kinds(ctx: BrowserContext) -> list[K]:
    return [node.kind for node in ctx.chain]


# --- reference inputs: each maps to one exact chain -------------------------


def test_style_attribute_value_chain():
    ctx = one_context(b'<p style="content:[PH];">')
    assert kinds(ctx) == [K.HTML_ATTR_DOUBLE_QUOTED, K.CSS_PROPERTY_VALUE]


def test_plain_text_chain():
    ctx = one_context(b"<b>[PH]</b>")
    assert kinds(ctx) == [K.HTML_TEXT]


def test_unquoted_attribute_chain():
    ctx = one_context(b"<input value=[PH]>")
    assert kinds(ctx) == [K.HTML_ATTR_UNQUOTED]


def test_javascript_url_chain():
    ctx = one_context(b"<a href='javascript:call(\"[PH]\");'>")
    assert kinds(ctx) == [K.HTML_ATTR_SINGLE_QUOTED, K.URI, K.JS_STRING_DOUBLE]
    assert ctx.chain[1].position is UriPosition.ELSEWHERE


def test_event_handler_chain():
    ctx = one_context(b'<div onclick="populateTopic(&#039;[PH]&#039;)">x</div>')
    assert kinds(ctx) == [K.HTML_ATTR_DOUBLE_QUOTED, K.JS_STRING_SINGLE]


# --- HTML tokenizer ----------------------------------------------------------


def region_map(body: bytes):
    return [(r.kind, body[r.start : r.end], r.element, r.attr, r.quote) for r in parse_html(body)]


def test_parse_html_attribute_quoting_styles():
    body = b"<p a=\"dq\" b='sq' c=unq d>text</p>"
    regions = region_map(body)
    assert ("attr", b"dq", "p", "a", '"') in regions
    assert ("attr", b"sq", "p", "b", "'") in regions
    assert ("attr", b"unq", "p", "c", "") in regions
    assert ("text", b"text", "", "", "") in regions
    assert not any(r[3] == "d" for r in regions)  # valueless attr: no region


def test_parse_html_comment_and_doctype():
    body = b"<!doctype html><!-- note -->rest"
    regions = region_map(body)
    assert regions[0][0] == "decl"
    assert ("comment", b" note ", "", "", "") in regions
    assert ("text", b"rest", "", "", "") in regions


def test_parse_html_lone_angle_bracket_is_text():
    regions = region_map(b"a < b > c")
    assert [r[0] for r in regions] == ["text"]
    assert regions[0][1] == b"a < b > c"


def test_parse_html_script_rawtext():
    body = b"<script>var a = '</scriptx';</script>after"
    regions = region_map(body)
    raw = [r for r in regions if r[0] == "rawtext"]
    assert raw == [("rawtext", b"var a = '</scriptx';", "script", "", "")]
    assert ("text", b"after", "", "", "") in regions


def test_parse_html_rawtext_close_is_case_insensitive():
    regions = region_map(b"<SCRIPT>x</ScRiPt >tail")
    raw = [r for r in regions if r[0] == "rawtext"]
    assert raw == [("rawtext", b"x", "script", "", "")]


def test_parse_html_style_rawtext():
    regions = region_map(b"<style>p{}</style>")
    assert ("rawtext", b"p{}", "style", "", "") in regions


def test_parse_html_survives_unterminated_constructs():
    for body in (b"<p title=\"unclosed>text", b"<!-- oops", b"<a href=", b"<", b"</"):
        parse_html(body)  # must not raise
    regions = region_map(b"<p title=\"unclosed>text")
    assert ("attr", b"unclosed>text", "p", "title", '"') in regions


def test_parse_html_gt_inside_quoted_value():
    regions = region_map(b'<p title="a>b">t</p>')
    assert ("attr", b"a>b", "p", "title", '"') in regions
    assert ("text", b"t", "", "", "") in regions


def test_script_bodies_agree_with_stdlib_parser():
    # independent oracle: the stdlib tokenizer's script-data extraction
    class Grabber(HTMLParser):
        def __init__(self):
            super().__init__(convert_charrefs=False)
            self.open = False
            self.bodies = []

        def handle_starttag(self, tag, attrs):
            if tag == "script":
                self.open = True
                self.bodies.append("")

        def handle_endtag(self, tag):
            if tag == "script":
                self.open = False

        def handle_data(self, data):
            if self.open:
                self.bodies[-1] += data

    docs = [
        b"<html><body><script>var x = 1 < 2;</script></body></html>",
        b'<script type="text/javascript">if (a && b) { go("x"); }</script>',
        b"<p>one</p><script>first()</script><p>two</p><script>second()</script>",
    ]
    for doc in docs:
        grabber = Grabber()
        grabber.feed(doc.decode("latin-1"))
        mine = [
            doc[r.start : r.end].decode("latin-1")
            for r in parse_html(doc)
            if r.kind == "rawtext" and r.element == "script"
        ]
        assert mine == grabber.bodies


# --- JavaScript analyzer -----------------------------------------------------


@pytest.mark.parametrize(
    "content,kind",
    [
        (b"var a = '" + T + b"';", K.JS_STRING_SINGLE),
        (b'var a = "' + T + b'";', K.JS_STRING_DOUBLE),
        (b"var a = `" + T + b"`;", K.JS_OTHER),
        (b"// " + T + b"\ncode();", K.JS_OTHER),
        (b"/* " + T + b" */", K.JS_OTHER),
        (b"call(" + T + b");", K.JS_OTHER),
        (b"var a = 'it\\'s " + T + b"';", K.JS_STRING_SINGLE),
        (b"var a = 'open\n" + T + b"';", K.JS_OTHER),  # newline ends the string
        (b"var a = 'done'; " + T, K.JS_OTHER),
        (b"a = 1 // c\nb = '" + T + b"'", K.JS_STRING_SINGLE),
    ],
)
def test_js_token_state(content, kind):
    nodes = analyze_js(content, T, "t")
    assert [n.kind for n in nodes] == [kind]


# --- CSS analyzer ------------------------------------------------------------


@pytest.mark.parametrize(
    "content,mode,expected",
    [
        (b"color:red;content:'" + T + b"'", "declarations", [K.CSS_STRING_SINGLE]),
        (b'content:"' + T + b'"', "declarations", [K.CSS_STRING_DOUBLE]),
        (b"color: " + T, "declarations", [K.CSS_PROPERTY_VALUE]),
        (b"p { color: " + T + b" }", "stylesheet", [K.CSS_PROPERTY_VALUE]),
        (b"p { background: url(" + T + b") }", "stylesheet", [K.CSS_URI]),
        (b"p { background: kurl(" + T + b") }", "stylesheet", [K.CSS_PROPERTY_VALUE]),
        (b"/* " + T + b" */ p {}", "stylesheet", [K.CSS_OTHER]),
        (T + b" { color: red }", "stylesheet", [K.CSS_OTHER]),
        (b"p { " + T + b": red }", "stylesheet", [K.CSS_OTHER]),
        (b"p::after { content: 'a\\'b " + T + b"' }", "stylesheet", [K.CSS_STRING_SINGLE]),
    ],
)
def test_css_token_state(content, mode, expected):
    nodes = analyze_css(content, T, mode, "t", depth=1)
    assert [n.kind for n in nodes] == expected


def test_css_url_string_descends_to_uri():
    nodes = analyze_css(b"p { background: url('" + T + b"') }", T, "stylesheet", "t", 1)
    assert [n.kind for n in nodes] == [K.CSS_STRING_SINGLE, K.URI]
    assert nodes[1].position is UriPosition.BEGINNING
    nodes = analyze_css(b'p { background: url("x ' + T + b'") }', T, "stylesheet", "t", 1)
    assert [n.kind for n in nodes] == [K.CSS_STRING_DOUBLE, K.URI]
    assert nodes[1].position is UriPosition.ELSEWHERE


def test_style_element_url_chain():
    ctx = one_context(b"<style>p { background: url('[PH]') }</style>")
    assert kinds(ctx) == [K.HTML_DATA, K.CSS_STRING_SINGLE, K.URI]


def test_script_element_chain():
    ctx = one_context(b"<script>var a = '[PH]';</script>")
    assert kinds(ctx) == [K.HTML_DATA, K.JS_STRING_SINGLE]


# --- URI analyzer ------------------------------------------------------------


def test_uri_beginning_vs_elsewhere():
    ctx = one_context(b'<a href="[PH]/page">')
    assert kinds(ctx) == [K.HTML_ATTR_DOUBLE_QUOTED, K.URI]
    assert ctx.chain[1].position is UriPosition.BEGINNING

    ctx = one_context(b'<a href="/user?id=[PH]">')
    assert ctx.chain[1].position is UriPosition.ELSEWHERE

    ctx = one_context(b'<a href="https://host/[PH]">')
    assert ctx.chain[1].position is UriPosition.ELSEWHERE


def test_uri_leading_whitespace_still_beginning():
    ctx = one_context(b'<a href="  [PH]">')
    assert ctx.chain[1].position is UriPosition.BEGINNING


def test_uri_scheme_completion_needs_manual_analysis():
    ctx = one_context(b'<a href="jav[PH]:alert(1)">')
    assert kinds(ctx) == [K.HTML_ATTR_DOUBLE_QUOTED, K.URI_SCHEME]


def test_uri_with_path_colon_is_not_scheme():
    ctx = one_context(b'<a href="/a b/[PH]x:y">')
    assert kinds(ctx) == [K.HTML_ATTR_DOUBLE_QUOTED, K.URI]
    assert ctx.chain[1].position is UriPosition.ELSEWHERE


def test_percent_encoded_javascript_url_descends():
    ctx = one_context(b"<a href='javascript:call(%22[PH]%22)'>")
    assert kinds(ctx) == [K.HTML_ATTR_SINGLE_QUOTED, K.URI, K.JS_STRING_DOUBLE]


def test_non_javascript_scheme_is_leaf():
    ctx = one_context(b'<a href="mailto:[PH]">')
    assert kinds(ctx) == [K.HTML_ATTR_DOUBLE_QUOTED, K.URI]


def test_uri_analysis_direct_no_colon():
    nodes = analyze_uri(b"relative/" + T, T, "t", 1)
    assert [n.kind for n in nodes] == [K.URI]
    assert nodes[0].position is UriPosition.ELSEWHERE


# --- attribute routing -------------------------------------------------------


def test_attribute_routing():
    assert kinds(one_context(b'<img onmouseover="f(\'[PH]\')">')) == [
        K.HTML_ATTR_DOUBLE_QUOTED,
        K.JS_STRING_SINGLE,
    ]
    assert kinds(one_context(b'<img src="[PH]">'))[1] == K.URI
    assert kinds(one_context(b'<form action="/go/[PH]">'))[1] == K.URI
    # data-x is not a URL attribute, and a bare "on" attribute is not an event
    assert kinds(one_context(b'<div data-x="[PH]">')) == [K.HTML_ATTR_DOUBLE_QUOTED]
    assert kinds(one_context(b'<div on="[PH]">')) == [K.HTML_ATTR_DOUBLE_QUOTED]


def test_placeholder_in_markup_is_other():
    assert kinds(one_context(b'<[PH] attr="x">y')) == [K.HTML_OTHER]
    assert kinds(one_context(b"<!-- [PH] -->")) == [K.HTML_OTHER]
    assert kinds(one_context(b"<!doctype [PH]>")) == [K.HTML_OTHER]


# --- whole-document properties ----------------------------------------------

HTML_FAMILY = {
    K.HTML_TEXT,
    K.HTML_ATTR_DOUBLE_QUOTED,
    K.HTML_ATTR_SINGLE_QUOTED,
    K.HTML_ATTR_UNQUOTED,
    K.HTML_DATA,
    K.HTML_OTHER,
}

_ATTR_CHILDREN = {
    K.JS_STRING_SINGLE,
    K.JS_STRING_DOUBLE,
    K.JS_OTHER,
    K.CSS_STRING_SINGLE,
    K.CSS_STRING_DOUBLE,
    K.CSS_PROPERTY_VALUE,
    K.CSS_URI,
    K.CSS_OTHER,
    K.URI,
    K.URI_SCHEME,
}

LEGAL_CHILDREN = {
    K.HTML_ATTR_DOUBLE_QUOTED: _ATTR_CHILDREN,
    K.HTML_ATTR_SINGLE_QUOTED: _ATTR_CHILDREN,
    K.HTML_ATTR_UNQUOTED: _ATTR_CHILDREN,
    K.HTML_DATA: _ATTR_CHILDREN - {K.URI, K.URI_SCHEME},
    K.URI: {K.JS_STRING_SINGLE, K.JS_STRING_DOUBLE, K.JS_OTHER},
    K.CSS_STRING_SINGLE: {K.URI, K.URI_SCHEME},
    K.CSS_STRING_DOUBLE: {K.URI, K.URI_SCHEME},
}

CORPUS = [
    b"<html><body><p>[PH]</p><p>[PH] again</p></body></html>",
    b'<a href="x" title="[PH]">go</a><script>var q="[PH]";</script>',
    b"<style>p{content:'[PH]'}</style><div style=\"width:[PH]px\">t</div>",
    b'<a href="javascript:f(\'[PH]\')">j</a>',
    b"<!-- [PH] --><input value=[PH]><input value='[PH]'>",
    b"<p [PH]>attr name</p>",
    b"[PH] outside any markup",
    b"<script>/* [PH] */</script><b>bold [PH]</b>",
    b'<img src="/i/[PH].png" onerror="log(\\"[PH]\\")">',
    b"<p title='broken [PH]",
    b"<style>@media x { p { background:url([PH]) } }</style>",
]


@pytest.mark.parametrize("template", CORPUS)
def test_conservation_and_chain_legality(template):
    body = template.replace(b"[PH]", T)
    contexts = compute_contexts(body, [T])
    assert len(contexts) == body.count(T)  # one context per occurrence
    for ctx in contexts:
        chain = ctx.chain
        assert 1 <= len(chain) <= 8
        assert chain[0].kind in HTML_FAMILY
        for parent, child in zip(chain, chain[1:]):
            assert child.kind in LEGAL_CHILDREN.get(parent.kind, set()), (
                template,
                [n.kind for n in chain],
            )
        for node in chain:
            assert (node.position is not None) == (node.kind is K.URI)


def test_multiple_distinct_placeholders():
    t2 = b"phzqwortb"
    body = b"<p>" + T + b"</p><a href='" + t2 + b"'>x</a>"
    contexts = compute_contexts(body, [T, t2])
    by_token = {ctx.placeholder: ctx for ctx in contexts}
    assert kinds(by_token[T]) == [K.HTML_TEXT]
    assert kinds(by_token[t2]) == [K.HTML_ATTR_SINGLE_QUOTED, K.URI]
