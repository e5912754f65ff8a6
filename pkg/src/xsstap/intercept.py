"""Protocol-aware interception, independent of any socket plumbing.

``ConnectionInterceptor`` is a pure state machine: bytes from the client go
in through :meth:`from_client`, bytes from the server through
:meth:`from_server`, and each call returns the bytes to forward to the
other side. That shape makes the whole relay testable offline against
captured traces.

Interception is deliberately conservative. Only text-protocol query result
sets are parsed; everything else (authentication exchanges, prepared
statements, file transfers) is relayed untouched. Any parse failure drops
back to plain forwarding rather than corrupting traffic.
"""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from . import wire
from .wire import (
    Command,
    Message,
    MessageAssembler,
    PacketAssembler,
    RELAY_CLEARED_CAPABILITIES,
    STRING_FAMILY_TYPES,
    WireError,
)

__all__ = [
    "ConnectionInterceptor",
    "FetchEvent",
    "InjectionSpec",
    "ProxyMode",
    "ProxyState",
    "ResultSetColumnMeta",
    "classify_column",
]


class ProxyMode(Enum):
    PASSTHROUGH = "passthrough"
    RECORDING = "recording"
    INJECTING = "injecting"


@dataclass(frozen=True)
class FetchEvent:
    """One string-typed cell the application fetched."""

    table: str | None
    column: str
    value: bytes
    ordinal: int


@dataclass(frozen=True)
class InjectionSpec:
    """Which fetched cells to replace; absent fields match anything."""

    table: str | None = None
    column: str | None = None
    value: bytes | None = None
    payload: bytes = b""

    def matches(self, table: str | None, column: str, value: bytes) -> bool:
        if self.table is not None and self.table != table:
            return False
        if self.column is not None and self.column != column:
            return False
        if self.value is not None and self.value != value:
            return False
        return True


@dataclass(frozen=True)
class ResultSetColumnMeta:
    column_name: str
    table_name: str | None
    type_code: int
    is_string_family: bool


def classify_column(packet_payload: bytes) -> ResultSetColumnMeta:
    """Extract routing metadata from a column-definition payload.

    Malformed payloads yield a non-string column: we never rewrite what we
    could not classify.
    """
    try:
        col = wire.parse_column_definition(packet_payload)
    except WireError:
        return ResultSetColumnMeta("", None, -1, False)
    name = (col.org_name or col.name).decode("utf-8", "replace")
    table_bytes = col.org_table or col.table
    table = table_bytes.decode("utf-8", "replace") if table_bytes else None
    return ResultSetColumnMeta(
        column_name=name,
        table_name=table,
        type_code=col.type_code,
        is_string_family=col.type_code in STRING_FAMILY_TYPES,
    )


class ProxyState:
    """Mode, injection specs, and the global ordered event log.

    Shared by every relay connection and the control plane; all access is
    serialized so observers see one totally ordered event stream.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._mode = ProxyMode.PASSTHROUGH
        self._specs: tuple[InjectionSpec, ...] = ()
        self._events: list[FetchEvent] = []
        self._ordinal = 0
        self.diagnostics: Counter[str] = Counter()

    def set_mode(self, mode: ProxyMode) -> None:
        with self._lock:
            self._mode = mode

    def set_specs(self, specs: Iterable[InjectionSpec]) -> None:
        with self._lock:
            self._specs = tuple(specs)

    def clear(self) -> None:
        """Reset the observation window: events, ordinals, and specs."""
        with self._lock:
            self._events.clear()
            self._ordinal = 0
            self._specs = ()

    def snapshot(self) -> tuple[ProxyMode, tuple[InjectionSpec, ...]]:
        """Mode and specs as one atomic read; taken once per result set."""
        with self._lock:
            return self._mode, self._specs

    def record(self, table: str | None, column: str, value: bytes) -> FetchEvent:
        with self._lock:
            event = FetchEvent(table, column, value, self._ordinal)
            self._ordinal += 1
            self._events.append(event)
            return event

    def events(self) -> list[FetchEvent]:
        with self._lock:
            return list(self._events)

    def note(self, key: str) -> None:
        with self._lock:
            self.diagnostics[key] += 1


# response-parsing stages for one COM_QUERY
_HEADER = "header"
_COLUMNS = "columns"
_COLUMNS_EOF = "columns-eof"
_ROWS = "rows"
_DONE = "done"


class _QueryResponse:
    """Tracks one COM_QUERY response stream and rewrites rows in flight."""

    def __init__(self, state: ProxyState) -> None:
        self._ps = state
        self._stage = _HEADER
        self._expected_columns = 0
        self._columns: list[ResultSetColumnMeta] = []
        self._mode = ProxyMode.PASSTHROUGH
        self._specs: tuple[InjectionSpec, ...] = ()
        # net change in packet count from rewrites; later packets in the
        # same response get their sequence numbers shifted by this much
        self._seq_delta = 0

    @property
    def done(self) -> bool:
        return self._stage == _DONE

    def _forward(self, msg: Message) -> bytes:
        if self._seq_delta == 0:
            return b"".join(msg.packets)
        return b"".join(
            wire.with_sequence(p, wire.packet_sequence(p) + self._seq_delta)
            for p in msg.packets
        )

    def on_message(self, msg: Message) -> bytes:
        if self._stage == _HEADER:
            return self._on_header(msg)
        if self._stage == _COLUMNS:
            self._columns.append(classify_column(msg.payload))
            if len(self._columns) == self._expected_columns:
                self._stage = _COLUMNS_EOF
            return self._forward(msg)
        if self._stage == _COLUMNS_EOF:
            if wire.is_eof_packet(msg.payload):
                self._stage = _ROWS
            else:
                self._ps.note("unexpected-column-terminator")
                self._stage = _DONE
            return self._forward(msg)
        if self._stage == _ROWS:
            return self._on_row(msg)
        return self._forward(msg)  # done: nothing left to interpret

    def _on_header(self, msg: Message) -> bytes:
        payload = msg.payload
        if wire.is_ok_header(payload):
            try:
                more = wire.ok_status_flags(payload) & wire.SERVER_MORE_RESULTS_EXISTS
            except WireError:
                more = 0
            self._stage = _HEADER if more else _DONE
            return self._forward(msg)
        if wire.is_err_packet(payload):
            self._stage = _DONE
            return self._forward(msg)
        if payload[:1] == b"\xfb":
            # server requests a local file; the client streams it next and
            # the server answers with OK/ERR, so stay on the header stage
            return self._forward(msg)
        try:
            count, pos = wire.read_lenenc_int(payload, 0)
            if pos != len(payload) or count == 0:
                raise WireError("odd column count packet")
        except WireError:
            self._ps.note("unparsed-response-header")
            self._stage = _DONE
            return self._forward(msg)
        self._expected_columns = count
        self._columns = []
        # one atomic snapshot per result set: a mode flip mid-set never
        # splits that set's rows across behaviors
        self._mode, self._specs = self._ps.snapshot()
        self._stage = _COLUMNS
        return self._forward(msg)

    def _on_row(self, msg: Message) -> bytes:
        payload = msg.payload
        if wire.is_eof_packet(payload):
            if wire.eof_status_flags(payload) & wire.SERVER_MORE_RESULTS_EXISTS:
                self._stage = _HEADER  # another result set follows
            else:
                self._stage = _DONE
            return self._forward(msg)
        if wire.is_err_packet(payload):
            self._stage = _DONE
            return self._forward(msg)
        if self._mode is ProxyMode.PASSTHROUGH:
            return self._forward(msg)
        try:
            cells = wire.parse_text_row(payload, len(self._columns))
        except WireError:
            self._ps.note("unparsed-row")
            return self._forward(msg)
        if self._mode is ProxyMode.RECORDING:
            for meta, cell in zip(self._columns, cells):
                if meta.is_string_family and cell is not None:
                    self._ps.record(meta.table_name, meta.column_name, cell)
            return self._forward(msg)
        # injecting: first matching spec wins, per cell
        changed = False
        for i, (meta, cell) in enumerate(zip(self._columns, cells)):
            if not meta.is_string_family or cell is None:
                continue
            for spec in self._specs:
                if spec.matches(meta.table_name, meta.column_name, cell):
                    cells[i] = spec.payload
                    changed = True
                    break
        if not changed:
            return self._forward(msg)
        new_payload = wire.encode_text_row(cells)
        out, _ = wire.frame_message(new_payload, msg.first_seq + self._seq_delta)
        new_count = sum(1 for _ in wire.split_payload(new_payload))
        self._seq_delta += new_count - len(msg.packets)
        return out


_PHASE_HANDSHAKE = "handshake"
_PHASE_AUTH = "auth"
_PHASE_COMMAND = "command"


class ConnectionInterceptor:
    """Relay logic for one client connection, as a pure byte transducer."""

    def __init__(self, state: ProxyState) -> None:
        self._state = state
        self._client_packets = PacketAssembler()
        self._server_packets = PacketAssembler()
        self._response_messages = MessageAssembler()
        self._phase = _PHASE_HANDSHAKE
        self._opaque = False
        self._auth_patched = False
        self._response: _QueryResponse | None = None

    def _go_opaque(self, reason: str) -> None:
        self._state.note(reason)
        self._opaque = True

    # -- client -> server ---------------------------------------------------

    def from_client(self, data: bytes) -> bytes:
        if self._opaque:
            return data
        out = bytearray()
        self._client_packets.feed(data)
        for packet in self._client_packets.packets():
            if self._opaque:
                out += packet
                continue
            out += self._client_packet(packet)
        if self._opaque:
            out += self._client_packets.drain()
        return bytes(out)

    def _client_packet(self, packet: bytes) -> bytes:
        payload = packet[wire.HEADER_LEN :]
        if self._phase != _PHASE_COMMAND:
            if self._auth_patched:
                return packet  # follow-up auth data, relayed untouched
            if len(payload) == wire.MAX_PACKET:
                self._go_opaque("oversized-auth-message")
                return packet
            if wire.is_ssl_request(payload):
                # we strip the TLS capability; a client that insists on TLS
                # anyway gets an uninspected tunnel rather than a broken one
                self._go_opaque("ssl-requested")
                return packet
            try:
                patched = wire.clear_client_capabilities(
                    payload, RELAY_CLEARED_CAPABILITIES
                )
            except WireError:
                self._state.note("unparsed-client-auth")
                return packet
            self._auth_patched = True
            framed, _ = wire.frame_message(patched, wire.packet_sequence(packet))
            return framed
        # command phase: a sequence-0 packet begins a new client command
        if wire.packet_sequence(packet) == 0 and payload:
            command = payload[0]
            if command == Command.QUERY:
                self._response = _QueryResponse(self._state)
            else:
                if command == Command.STMT_EXECUTE:
                    self._state.note("stmt-execute-passthrough")
                self._response = None
        return packet

    # -- server -> client ---------------------------------------------------

    def from_server(self, data: bytes) -> bytes:
        if self._opaque:
            return data
        out = bytearray()
        self._server_packets.feed(data)
        for packet in self._server_packets.packets():
            if self._opaque:
                out += packet
                continue
            out += self._server_packet(packet)
        if self._opaque:
            out += self._server_packets.drain()
        return bytes(out)

    def _server_packet(self, packet: bytes) -> bytes:
        payload = packet[wire.HEADER_LEN :]
        if self._phase == _PHASE_HANDSHAKE:
            if len(payload) == wire.MAX_PACKET:
                self._go_opaque("oversized-handshake")
                return packet
            try:
                patched = wire.clear_server_capabilities(
                    payload, RELAY_CLEARED_CAPABILITIES
                )
            except WireError:
                self._state.note("unparsed-server-handshake")
                return packet
            self._phase = _PHASE_AUTH
            framed, _ = wire.frame_message(patched, wire.packet_sequence(packet))
            return framed
        if self._phase == _PHASE_AUTH:
            if wire.is_ok_header(payload):
                self._phase = _PHASE_COMMAND
            return packet
        if self._response is None:
            return packet
        # only query responses are assembled into logical messages; a row
        # spanning several packets must be rewritten as one unit
        message = self._response_messages.add(packet)
        if message is None:
            return b""
        return self._response.on_message(message)
