"""Minimal MySQL text-protocol client.

Speaks protocol 4.1 with ``mysql_native_password`` authentication and the
plain text query path: exactly the dialect the relay guarantees by
stripping TLS/compression capabilities during the handshake. Sequence
numbers are validated strictly, so a stream that was rewritten in flight
must still be perfectly framed for this client to accept it.
"""

from __future__ import annotations

import hashlib
import socket
from dataclasses import dataclass, field
from typing import Optional

from . import wire
from .wire import Capability, Command, WireError

__all__ = ["Connection", "DbError", "ResultSet", "native_password_scramble"]


class DbError(Exception):
    """Connection, protocol, or server-reported failure."""


def native_password_scramble(password: bytes, salt: bytes) -> bytes:
    """Challenge response: SHA1(pw) XOR SHA1(salt + SHA1(SHA1(pw)))."""
    if not password:
        return b""
    stage1 = hashlib.sha1(password).digest()
    stage2 = hashlib.sha1(stage1).digest()
    mask = hashlib.sha1(salt[:20] + stage2).digest()
    return bytes(a ^ b for a, b in zip(stage1, mask))


@dataclass
class ResultSet:
    """One statement's outcome: rows if it produced any, else counters."""

    columns: list[str] = field(default_factory=list)
    rows: list[list[Optional[bytes]]] = field(default_factory=list)
    affected: int = 0
    more: list["ResultSet"] = field(default_factory=list)

    def single(self) -> list[Optional[bytes]]:
        if len(self.rows) != 1:
            raise DbError(f"expected one row, got {len(self.rows)}")
        return self.rows[0]


_CLIENT_CAPS = int(
    Capability.PROTOCOL_41
    | Capability.SECURE_CONNECTION
    | Capability.PLUGIN_AUTH
    | Capability.MULTI_RESULTS
)


class Connection:
    """A single authenticated session over one TCP connection."""

    def __init__(
        self,
        host: str,
        port: int,
        user: str = "app",
        password: str = "",
        database: str | None = None,
        timeout: float = 10.0,
    ) -> None:
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise DbError(f"connect failed: {exc}") from exc
        self._packets = wire.PacketAssembler()
        self._next_seq = 0
        self._closed = False
        try:
            self._handshake(user.encode(), password.encode(), database)
        except Exception:
            self._sock.close()
            raise

    # -- framing --------------------------------------------------------

    def _read_packet(self) -> bytes:
        while True:
            for packet in self._packets.packets():
                seq = wire.packet_sequence(packet)
                if seq != self._next_seq & 0xFF:
                    raise DbError(
                        f"out-of-order packet: got seq {seq}, "
                        f"expected {self._next_seq & 0xFF}"
                    )
                self._next_seq += 1
                return packet
            try:
                data = self._sock.recv(1 << 16)
            except OSError as exc:
                raise DbError(f"read failed: {exc}") from exc
            if not data:
                raise DbError("server closed the connection")
            self._packets.feed(data)

    def _read_message(self) -> bytes:
        assembler = wire.MessageAssembler()
        while True:
            message = assembler.add(self._read_packet())
            if message is not None:
                return message.payload

    def _send_message(self, payload: bytes, first_seq: int) -> None:
        framed, next_seq = wire.frame_message(payload, first_seq)
        self._next_seq = next_seq
        try:
            self._sock.sendall(framed)
        except OSError as exc:
            raise DbError(f"write failed: {exc}") from exc

    # -- handshake ------------------------------------------------------

    def _handshake(self, user: bytes, password: bytes, database: str | None) -> None:
        self._next_seq = 0
        greeting = self._read_message()
        if wire.is_err_packet(greeting):
            raise DbError(f"server refused connection: {greeting[3:]!r}")
        try:
            shake = wire.parse_server_handshake(greeting)
        except WireError as exc:
            raise DbError(str(exc)) from exc
        caps = _CLIENT_CAPS
        if database:
            caps |= Capability.CONNECT_WITH_DB
        response = bytearray()
        response += caps.to_bytes(4, "little")
        response += (2**24 - 1).to_bytes(4, "little")
        response.append(33)  # utf8_general_ci
        response += bytes(23)
        response += user + b"\x00"
        auth = native_password_scramble(password, shake.auth_data)
        response.append(len(auth))
        response += auth
        if database:
            response += database.encode() + b"\x00"
        response += b"mysql_native_password\x00"
        self._send_message(bytes(response), 1)
        self._auth_result(password)

    def _auth_result(self, password: bytes) -> None:
        reply = self._read_message()
        if wire.is_ok_header(reply):
            return
        if wire.is_err_packet(reply):
            raise DbError(f"authentication failed: {reply[3:]!r}")
        if reply[:1] == b"\xfe":
            # auth switch: only the native plugin is supported
            end = reply.find(b"\x00", 1)
            plugin = reply[1:end]
            if plugin != b"mysql_native_password":
                raise DbError(f"unsupported auth plugin {plugin!r}")
            salt = reply[end + 1 :].rstrip(b"\x00")
            self._send_message(
                native_password_scramble(password, salt), self._next_seq
            )
            return self._auth_result(password)
        raise DbError(f"unexpected authentication reply {reply[:1]!r}")

    # -- queries --------------------------------------------------------

    def query(self, sql: str | bytes) -> ResultSet:
        if self._closed:
            raise DbError("connection is closed")
        if isinstance(sql, str):
            sql = sql.encode()
        self._next_seq = 0
        self._send_message(bytes([Command.QUERY]) + sql, 0)
        result, more = self._read_result()
        while more:
            extra, more = self._read_result()
            result.more.append(extra)
        return result

    def _read_result(self) -> tuple[ResultSet, bool]:
        header = self._read_message()
        if wire.is_err_packet(header):
            raise DbError(self._err_text(header))
        if wire.is_ok_header(header):
            affected, _ = wire.read_lenenc_int(header, 1)
            status = wire.ok_status_flags(header)
            rs = ResultSet(affected=affected)
            return rs, bool(status & wire.SERVER_MORE_RESULTS_EXISTS)
        count, pos = wire.read_lenenc_int(header, 0)
        if pos != len(header) or count == 0:
            raise DbError("malformed result header")
        columns = []
        for _ in range(count):
            definition = wire.parse_column_definition(self._read_message())
            columns.append(definition.name.decode("utf-8", "replace"))
        eof = self._read_message()
        if not wire.is_eof_packet(eof):
            raise DbError("missing column list terminator")
        rows: list[list[Optional[bytes]]] = []
        while True:
            payload = self._read_message()
            if wire.is_eof_packet(payload):
                rs = ResultSet(columns=columns, rows=rows)
                status = wire.eof_status_flags(payload)
                return rs, bool(status & wire.SERVER_MORE_RESULTS_EXISTS)
            if wire.is_err_packet(payload):
                raise DbError(self._err_text(payload))
            rows.append(wire.parse_text_row(payload, count))

    @staticmethod
    def _err_text(payload: bytes) -> str:
        code = int.from_bytes(payload[1:3], "little")
        message = payload[3:]
        if message[:1] == b"#":
            message = message[6:]
        return f"server error {code}: {message.decode('utf-8', 'replace')}"

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            framed, _ = wire.frame_message(bytes([Command.QUIT]), 0)
            self._sock.sendall(framed)
        except OSError:
            pass
        finally:
            self._sock.close()

    def __enter__(self) -> "Connection":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
