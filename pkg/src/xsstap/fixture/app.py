"""Single-threaded demo forum used as the scan target in tests.

Every page renders stored database values into one specific markup
position, split into endpoint pairs: a weakly sanitized variant and a
correctly sanitized twin.  The root page is the guided example: it reads
the visitor's session row and quotes the topic into an inline event
handler.  All markup is deterministic; the only variable parts are the
stored values themselves.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from http.cookies import SimpleCookie
from http.server import BaseHTTPRequestHandler, HTTPServer
from typing import Callable, Optional
from urllib.parse import urlsplit

from ..dbclient import Connection, DbError
from .sanitize import backslash_quote, encode_css_hex, encode_entities, encode_js_hex, encode_url, intval

Encoder = Callable[[bytes], bytes]


@dataclass(frozen=True)
class _Sink:
    """One stored value rendered through one encoder into one template."""

    table: str
    encode: Optional[Encoder]
    template: bytes  # bytes %-template with a single %s slot


# Endpoint catalog.  The *-vuln half uses an encoder that fails in that
# markup position; the *-correct half uses one that holds there.
ROUTES: dict[str, _Sink] = {
    "/htmltext-unsanitized": _Sink("htmltext_unsanitized", None, b"<p>%s</p>"),
    "/htmltext-correct": _Sink("htmltext_correct", encode_entities, b"<p>%s</p>"),
    "/attr-double-vuln": _Sink(
        "attr_double_vuln", backslash_quote, b'<input type="text" name="q" value="%s">'
    ),
    "/attr-double-correct": _Sink(
        "attr_double_correct", encode_entities, b'<input type="text" name="q" value="%s">'
    ),
    "/attr-single-vuln": _Sink(
        "attr_single_vuln", backslash_quote, b"<input type='text' name='q' value='%s'>"
    ),
    "/attr-single-correct": _Sink(
        "attr_single_correct", encode_entities, b"<input type='text' name='q' value='%s'>"
    ),
    "/htmldata-vuln": _Sink("htmldata_vuln", backslash_quote, b"<script>// caption: %s\n</script>"),
    "/htmldata-correct": _Sink(
        "htmldata_correct", encode_entities, b'<script>var caption = "%s";</script>'
    ),
    "/js-double-vuln": _Sink(
        "js_double_vuln", encode_entities, b"<div onmouseover='showName(\"%s\")'>hover for name</div>"
    ),
    "/js-double-correct": _Sink(
        "js_double_correct", encode_js_hex, b'<script>var userName = "%s";</script>'
    ),
    "/js-single-correct": _Sink(
        "js_single_correct", encode_js_hex, b"<script>var hint = '%s';</script>"
    ),
    "/css-double-vuln": _Sink(
        "css_double_vuln", encode_entities, b"<span style='content: \"%s\"'>badge</span>"
    ),
    "/css-double-correct": _Sink(
        "css_double_correct", encode_css_hex, b'<style>p.banner::before { content: "%s"; }</style>'
    ),
    "/css-single-vuln": _Sink(
        "css_single_vuln", encode_entities, b"<div style=\"font-family: '%s'\">list</div>"
    ),
    "/css-single-correct": _Sink(
        "css_single_correct", encode_css_hex, b"<style>blockquote { font-family: '%s'; }</style>"
    ),
    "/uri-begin-vuln": _Sink("uri_begin_vuln", encode_entities, b'<a href="%s">open guide</a>'),
    "/uri-begin-correct": _Sink("uri_begin_correct", encode_url, b'<a href="%s">open guide</a>'),
    "/uri-else-vuln": _Sink(
        "uri_else_vuln", encode_entities, b'<a href="/go?next=%s">continue</a>'
    ),
    "/uri-else-correct": _Sink(
        "uri_else_correct", encode_url, b'<a href="/go?next=%s">continue</a>'
    ),
}


def _page(title: bytes, body: bytes) -> bytes:
    return (
        b"<!doctype html>\n<html>\n<head><title>"
        + title
        + b"</title></head>\n<body>\n<h1>"
        + title
        + b"</h1>\n"
        + body
        + b"\n</body>\n</html>\n"
    )


class _Handler(BaseHTTPRequestHandler):
    # HTTP/1.0 closes the socket per response, so the single-threaded
    # server can never be wedged by an idle keep-alive client.
    protocol_version = "HTTP/1.0"

    def log_message(self, format: str, *args) -> None:  # noqa: A002
        pass

    def _reply(self, status: int, body: bytes, headers: Optional[list[tuple[str, str]]] = None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", "text/html; charset=utf-8")
        self.send_header("Content-Length", str(len(body)))
        for name, value in headers or []:
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _db(self) -> Connection:
        host, port = self.server.db_address
        return Connection(host, port, timeout=self.server.db_timeout)

    def _session_id(self) -> int:
        jar = SimpleCookie(self.headers.get("Cookie", ""))
        morsel = jar.get("SESSIONID")
        return intval(morsel.value) if morsel is not None else 0

    def do_GET(self) -> None:
        path = urlsplit(self.path).path
        try:
            if path == "/":
                self._front_page()
            elif path == "/pair":
                self._pair_page()
            elif path == "/login":
                self._reply(
                    200,
                    _page(
                        b"Sign in",
                        b'<form method="post" action="/login">'
                        b'<input name="user"><input name="pass" type="password">'
                        b'<input type="submit" value="Sign in"></form>',
                    ),
                )
            elif path in ROUTES:
                self._sink_page(path, ROUTES[path])
            else:
                self._reply(404, _page(b"Not found", b"<p>no such page</p>"))
        except (DbError, OSError):
            self._reply(500, _page(b"Error", b"<p>database unavailable</p>"))

    def do_POST(self) -> None:
        path = urlsplit(self.path).path
        if path == "/login":
            length = int(self.headers.get("Content-Length", "0") or "0")
            if length:
                self.rfile.read(length)
            # Demo login: any credentials get session 1.
            self._reply(
                302,
                b"",
                headers=[("Location", "/"), ("Set-Cookie", "SESSIONID=1; Path=/")],
            )
        else:
            self._reply(404, _page(b"Not found", b"<p>no such page</p>"))

    def _front_page(self) -> None:
        session_id = self._session_id()
        with self._db() as db:
            rs = db.query(b"SELECT topic FROM sessions WHERE id = %d" % session_id)
            topic = (rs.rows[0][0] or b"") if rs.rows else b""
            rs = db.query(b"SELECT value FROM settings WHERE name = 'theme'")
            theme = rs.rows[0][0] if rs.rows else None
        del theme  # fetched for a future style switcher; page style is fixed
        body = (
            b"<p id=\"topic-box\">pick a topic</p>\n"
            b"<a href=\"#\" onclick=\"populateTopic('"
            + encode_entities(topic)
            + b"')\">resume current topic</a>\n"
            b"<script>function populateTopic(topic) "
            b"{ document.getElementById('topic-box').textContent = topic; }</script>"
        )
        self._reply(200, _page(b"Forum", body))

    def _pair_page(self) -> None:
        with self._db() as db:
            rs = db.query(b"SELECT title, label FROM pair WHERE id = 1")
        if not rs.rows:
            self._reply(200, _page(b"Pair", b"<p>nothing stored</p>"))
            return
        title, label = rs.rows[0][0] or b"", rs.rows[0][1] or b""
        if title == label:
            body = b"<p>duplicate entry suppressed</p>"
        else:
            # Label skips encoding whenever it differs from the title.
            body = b"<p>" + encode_entities(title) + b"</p>\n<p>" + label + b"</p>"
        self._reply(200, _page(b"Pair", body))

    def _sink_page(self, path: str, sink: _Sink) -> None:
        with self._db() as db:
            rs = db.query(b"SELECT value FROM %s WHERE id = 1" % sink.table.encode())
        value = (rs.rows[0][0] or b"") if rs.rows else b""
        if sink.encode is not None:
            value = sink.encode(value)
        title = path.strip("/").encode()
        self._reply(200, _page(title, sink.template % value))


class DemoApp:
    """Owns the HTTP server thread for the demo application."""

    def __init__(
        self,
        db_address: tuple[str, int],
        listen: tuple[str, int] = ("127.0.0.1", 0),
        db_timeout: float = 10.0,
    ) -> None:
        self._server = HTTPServer(listen, _Handler)
        self._server.db_address = db_address
        self._server.db_timeout = db_timeout
        self._thread: Optional[threading.Thread] = None

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="demo-app", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "DemoApp":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()
