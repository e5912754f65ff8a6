"""Line-delimited JSON control channel for the relay.

One request object per line, one response object per line. Responses carry
``{"ok": true, ...}`` on success and ``{"ok": false, "error": ...}`` on
failure. Fields holding arbitrary bytes (cell values, payloads) travel
base64-encoded; names and modes are plain JSON strings.
"""

from __future__ import annotations

import base64
import json
import socket
import socketserver
import threading
from typing import Any

from .intercept import FetchEvent, InjectionSpec, ProxyMode, ProxyState

__all__ = [
    "ControlClient",
    "ControlError",
    "ControlServer",
    "handle_command",
]


class ControlError(RuntimeError):
    """The control peer rejected a command."""


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: Any) -> bytes:
    if not isinstance(text, str):
        raise ValueError("expected a base64 string")
    return base64.b64decode(text.encode("ascii"), validate=True)


def event_to_wire(event: FetchEvent) -> dict:
    return {
        "table": event.table,
        "column": event.column,
        "value": _b64(event.value),
        "ordinal": event.ordinal,
    }


def event_from_wire(obj: dict) -> FetchEvent:
    return FetchEvent(
        table=obj["table"],
        column=obj["column"],
        value=_unb64(obj["value"]),
        ordinal=int(obj["ordinal"]),
    )


def spec_to_wire(spec: InjectionSpec) -> dict:
    return {
        "table": spec.table,
        "column": spec.column,
        "value": None if spec.value is None else _b64(spec.value),
        "payload": _b64(spec.payload),
    }


def spec_from_wire(obj: dict) -> InjectionSpec:
    if not isinstance(obj, dict):
        raise ValueError("spec must be an object")
    table = obj.get("table")
    column = obj.get("column")
    if table is not None and not isinstance(table, str):
        raise ValueError("table must be a string or null")
    if column is not None and not isinstance(column, str):
        raise ValueError("column must be a string or null")
    raw_value = obj.get("value")
    value = None if raw_value is None else _unb64(raw_value)
    return InjectionSpec(
        table=table,
        column=column,
        value=value,
        payload=_unb64(obj.get("payload", "")),
    )


def handle_command(state: ProxyState, request: Any) -> dict:
    """Apply one decoded control request to the shared state."""
    if not isinstance(request, dict):
        return {"ok": False, "error": "request must be a JSON object"}
    cmd = request.get("cmd")
    try:
        if cmd == "set_mode":
            state.set_mode(ProxyMode(request.get("mode")))
            return {"ok": True}
        if cmd == "clear":
            state.clear()
            return {"ok": True}
        if cmd == "set_specs":
            specs = request.get("specs")
            if not isinstance(specs, list):
                raise ValueError("specs must be a list")
            state.set_specs([spec_from_wire(s) for s in specs])
            return {"ok": True}
        if cmd == "get_events":
            return {
                "ok": True,
                "events": [event_to_wire(e) for e in state.events()],
            }
    except (ValueError, KeyError, TypeError) as exc:
        return {"ok": False, "error": str(exc) or exc.__class__.__name__}
    return {"ok": False, "error": f"unknown command {cmd!r}"}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        for line in self.rfile:
            line = line.strip()
            if not line:
                continue
            try:
                request = json.loads(line)
            except ValueError:
                response = {"ok": False, "error": "malformed JSON"}
            else:
                token = self.server.token
                if token is not None and (
                    not isinstance(request, dict) or request.get("token") != token
                ):
                    response = {"ok": False, "error": "bad or missing token"}
                else:
                    response = handle_command(self.server.state, request)
            self.wfile.write(json.dumps(response).encode() + b"\n")
            self.wfile.flush()


class ControlServer(socketserver.ThreadingTCPServer):
    """Serves the command channel for one shared ``ProxyState``.

    When *token* is set, every request must carry the same value in its
    ``token`` field; this is a shared-secret check, not a cryptographic
    protocol.
    """

    allow_reuse_address = True
    daemon_threads = True

    def __init__(
        self,
        address: tuple[str, int],
        state: ProxyState,
        token: str | None = None,
    ) -> None:
        super().__init__(address, _Handler)
        self.state = state
        self.token = token
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> None:
        self._thread = threading.Thread(
            target=self.serve_forever, name="control-server", daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)


class ControlClient:
    """Blocking client for the command channel."""

    def __init__(
        self,
        host: str,
        port: int,
        timeout: float = 10.0,
        token: str | None = None,
    ) -> None:
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._file = self._sock.makefile("rwb")
        self._token = token

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "ControlClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _call(self, request: dict) -> dict:
        if self._token is not None:
            request = dict(request, token=self._token)
        self._file.write(json.dumps(request).encode() + b"\n")
        self._file.flush()
        line = self._file.readline()
        if not line:
            raise ControlError("control channel closed")
        response = json.loads(line)
        if not response.get("ok"):
            raise ControlError(response.get("error", "command failed"))
        return response

    def set_mode(self, mode: ProxyMode | str) -> None:
        value = mode.value if isinstance(mode, ProxyMode) else mode
        self._call({"cmd": "set_mode", "mode": value})

    def clear(self) -> None:
        self._call({"cmd": "clear"})

    def set_specs(self, specs: list[InjectionSpec]) -> None:
        self._call({"cmd": "set_specs", "specs": [spec_to_wire(s) for s in specs]})

    def get_events(self) -> list[FetchEvent]:
        response = self._call({"cmd": "get_events"})
        return [event_from_wire(e) for e in response["events"]]
