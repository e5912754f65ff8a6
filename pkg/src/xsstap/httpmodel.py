"""HTTP request templates: corpus loading, mutation, and replay.

A template is a captured request held verbatim: the URL and body keep the
exact bytes of the capture, and parameters are only located, never
re-encoded, so an unmutated template replays byte-for-byte.  Mutating a
parameter splices the encoded payload into the raw string and leaves every
other byte alone.
"""

from __future__ import annotations

import base64
import json
import socket
from dataclasses import dataclass, replace
from http.client import HTTPException, HTTPResponse
from pathlib import Path
from typing import Iterable, Optional
from urllib.parse import parse_qsl, quote_from_bytes, unquote_plus, urlsplit

__all__ = [
    "CorpusError",
    "RequestTemplate",
    "Response",
    "load_corpus",
    "mutate_body_param",
    "mutate_cookie",
    "mutate_header",
    "mutate_query_param",
    "replay",
    "template_from_record",
    "serialize_request",
]

# headers the replay engine owns; captures may carry stale copies
_MANAGED_HEADERS = frozenset({"content-length", "accept-encoding", "connection"})


class CorpusError(ValueError):
    """A corpus file could not be understood."""


@dataclass(frozen=True)
class Response:
    status: int
    reason: str
    headers: tuple[tuple[str, str], ...]
    body: bytes

    def header(self, name: str) -> Optional[str]:
        wanted = name.lower()
        for key, value in self.headers:
            if key.lower() == wanted:
                return value
        return None


@dataclass(frozen=True)
class RequestTemplate:
    """One replayable request; url and body hold the captured bytes."""

    id: str
    method: str
    url: str
    headers: tuple[tuple[str, str], ...] = ()
    body: Optional[bytes] = None

    def header(self, name: str) -> Optional[str]:
        wanted = name.lower()
        for key, value in self.headers:
            if key.lower() == wanted:
                return value
        return None

    def query_params(self) -> list[tuple[str, str]]:
        query = urlsplit(self.url).query
        return parse_qsl(query, keep_blank_values=True)

    def body_params(self) -> list[tuple[str, str]]:
        """Decoded form fields, or [] when the body is not a form."""
        if self.body is None:
            return []
        ctype = (self.header("Content-Type") or "").split(";")[0].strip().lower()
        if ctype != "application/x-www-form-urlencoded":
            return []
        return parse_qsl(self.body.decode("latin-1"), keep_blank_values=True)

    def cookie_params(self) -> list[tuple[str, str]]:
        header = self.header("Cookie")
        if header is None:
            return []
        out = []
        for crumb in header.split(";"):
            name, sep, value = crumb.strip().partition("=")
            if sep:
                out.append((name, value))
        return out


def _encode_payload(payload: bytes) -> str:
    return quote_from_bytes(payload, safe=b"")


def mutate_query_param(
    template: RequestTemplate, name: str, payload: bytes
) -> RequestTemplate:
    """Replace the first query parameter called *name* with the payload."""
    path, sep, query = template.url.partition("?")
    if not sep:
        raise ValueError(f"template {template.id} has no query string")
    pairs = query.split("&")
    for i, pair in enumerate(pairs):
        raw_name = pair.split("=", 1)[0]
        if unquote_plus(raw_name) == name:
            pairs[i] = raw_name + "=" + _encode_payload(payload)
            return replace(template, url=path + "?" + "&".join(pairs))
    raise ValueError(f"template {template.id} has no query parameter {name!r}")


def mutate_body_param(
    template: RequestTemplate, name: str, payload: bytes
) -> RequestTemplate:
    """Replace the first form field called *name* with the payload."""
    if template.body is None:
        raise ValueError(f"template {template.id} has no body")
    pairs = template.body.split(b"&")
    for i, pair in enumerate(pairs):
        raw_name = pair.split(b"=", 1)[0]
        if unquote_plus(raw_name.decode("latin-1")) == name:
            pairs[i] = raw_name + b"=" + _encode_payload(payload).encode("ascii")
            return replace(template, body=b"&".join(pairs))
    raise ValueError(f"template {template.id} has no form field {name!r}")


def mutate_cookie(
    template: RequestTemplate, name: str, payload: bytes
) -> RequestTemplate:
    """Replace the value of cookie *name*, percent-encoding the payload."""
    headers = list(template.headers)
    for h, (key, value) in enumerate(headers):
        if key.lower() != "cookie":
            continue
        crumbs = value.split(";")
        for i, crumb in enumerate(crumbs):
            lead = crumb[: len(crumb) - len(crumb.lstrip())]
            crumb_name, sep, _ = crumb.strip().partition("=")
            if sep and crumb_name == name:
                crumbs[i] = lead + crumb_name + "=" + _encode_payload(payload)
                headers[h] = (key, ";".join(crumbs))
                return replace(template, headers=tuple(headers))
    raise ValueError(f"template {template.id} has no cookie {name!r}")


def mutate_header(
    template: RequestTemplate, name: str, payload: bytes
) -> RequestTemplate:
    """Replace the first header called *name* with the raw payload."""
    headers = list(template.headers)
    wanted = name.lower()
    for i, (key, _) in enumerate(headers):
        if key.lower() == wanted:
            headers[i] = (key, payload.decode("latin-1"))
            return replace(template, headers=tuple(headers))
    raise ValueError(f"template {template.id} has no header {name!r}")


def _merge_cookies(
    headers: list[tuple[str, str]], overrides: dict[str, str]
) -> list[tuple[str, str]]:
    """Apply session cookie values on top of the template's Cookie header."""
    pending = dict(overrides)
    out: list[tuple[str, str]] = []
    merged = False
    for key, value in headers:
        if key.lower() == "cookie" and not merged:
            merged = True
            crumbs = []
            for crumb in value.split(";"):
                name, sep, _ = crumb.strip().partition("=")
                if sep and name in pending:
                    crumbs.append(name + "=" + pending.pop(name))
                else:
                    crumbs.append(crumb.strip())
            crumbs.extend(name + "=" + pending.pop(name) for name in sorted(pending))
            out.append((key, "; ".join(crumbs)))
        else:
            out.append((key, value))
    if not merged and pending:
        out.append(("Cookie", "; ".join(n + "=" + pending[n] for n in sorted(pending))))
    return out


def serialize_request(
    template: RequestTemplate,
    host: str,
    cookie_overrides: Optional[dict[str, str]] = None,
) -> bytes:
    """Render the exact byte stream the template is sent as."""
    headers = list(template.headers)
    if cookie_overrides:
        headers = _merge_cookies(headers, cookie_overrides)
    present = {key.lower() for key, _ in headers}
    lines = ["%s %s HTTP/1.1" % (template.method, template.url or "/")]
    if "host" not in present:
        lines.append("Host: " + host)
    lines.extend("%s: %s" % (key, value) for key, value in headers)
    if template.body is not None and "content-length" not in present:
        lines.append("Content-Length: %d" % len(template.body))
    if "connection" not in present:
        lines.append("Connection: close")
    head = "\r\n".join(lines).encode("latin-1") + b"\r\n\r\n"
    return head + (template.body or b"")


def replay(
    template: RequestTemplate,
    target: tuple[str, int],
    timeout: float = 10.0,
    cookie_overrides: Optional[dict[str, str]] = None,
) -> Response:
    """Send the template to *target* and read the full response."""
    host, port = target
    host_header = host if port == 80 else "%s:%d" % (host, port)
    sock = socket.create_connection(target, timeout=timeout)
    try:
        sock.sendall(serialize_request(template, host_header, cookie_overrides))
        parser = HTTPResponse(sock, method=template.method)
        parser.begin()
        body = parser.read()
        headers = tuple((k, v) for k, v in parser.getheaders())
        return Response(parser.status, parser.reason, headers, body)
    finally:
        sock.close()


NETWORK_ERRORS = (OSError, HTTPException)


def template_from_record(record: object, default_id: str) -> RequestTemplate:
    if not isinstance(record, dict):
        raise CorpusError("request record must be a JSON object")
    url = record.get("url")
    if not isinstance(url, str) or not url:
        raise CorpusError("request record needs a non-empty url string")
    headers: list[tuple[str, str]] = []
    raw_headers = record.get("headers", [])
    if isinstance(raw_headers, dict):
        raw_headers = list(raw_headers.items())
    if not isinstance(raw_headers, list):
        raise CorpusError("headers must be a list of [name, value] pairs")
    for item in raw_headers:
        if isinstance(item, (list, tuple)) and len(item) == 2:
            headers.append((str(item[0]), str(item[1])))
        else:
            raise CorpusError("headers must be a list of [name, value] pairs")
    if url.startswith(("http://", "https://")):
        parts = urlsplit(url)
        if parts.hostname and not any(k.lower() == "host" for k, _ in headers):
            headers.insert(0, ("Host", parts.netloc))
        url = (parts.path or "/") + (("?" + parts.query) if parts.query else "")
    body: Optional[bytes] = None
    if record.get("body_b64") is not None:
        try:
            body = base64.b64decode(record["body_b64"], validate=True)
        except (TypeError, ValueError) as exc:
            raise CorpusError(f"bad body_b64: {exc}") from exc
    elif record.get("body") is not None:
        if not isinstance(record["body"], str):
            raise CorpusError("body must be a string (use body_b64 for binary)")
        body = record["body"].encode("utf-8")
    return RequestTemplate(
        id=str(record.get("id", default_id)),
        method=str(record.get("method", "GET")).upper(),
        url=url,
        headers=tuple(headers),
        body=body,
    )


def _load_jsonl(text: str) -> list[RequestTemplate]:
    templates = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise CorpusError(f"line {line_no}: {exc}") from exc
        try:
            templates.append(template_from_record(record, default_id=f"r{line_no}"))
        except CorpusError as exc:
            raise CorpusError(f"line {line_no}: {exc}") from exc
    return templates


def _load_har(text: str) -> list[RequestTemplate]:
    try:
        data = json.loads(text)
        entries = data["log"]["entries"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorpusError(f"not a HAR file: {exc}") from exc
    templates = []
    for i, entry in enumerate(entries, start=1):
        try:
            request = entry["request"]
            record = {
                "id": f"har{i}",
                "method": request.get("method", "GET"),
                "url": request["url"],
                "headers": [
                    [h["name"], h["value"]]
                    for h in request.get("headers", [])
                    if h["name"].lower() not in _MANAGED_HEADERS
                ],
            }
            post = request.get("postData")
            if post is not None and post.get("text") is not None:
                record["body"] = post["text"]
            templates.append(template_from_record(record, default_id=f"har{i}"))
        except (KeyError, TypeError) as exc:
            raise CorpusError(f"entry {i}: malformed request: {exc}") from exc
    return templates


def load_corpus(path: str | Path) -> list[RequestTemplate]:
    """Read request templates from a .jsonl corpus or a .har capture."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".har":
        return _load_har(text)
    return _load_jsonl(text)
