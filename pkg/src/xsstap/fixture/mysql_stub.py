"""A tiny in-memory MySQL server, just enough for the bundled demo app.

Speaks protocol 4.1 over TCP: handshake, any-credentials auth, and the
text query path with classic EOF framing. The SQL dialect is the small
subset the demo app uses (CREATE/DROP/INSERT/SELECT/UPDATE/DELETE with
single-column equality WHERE). Cells are stored and served as bytes, so
whatever byte sequence goes in comes back out unchanged.
"""

from __future__ import annotations

import os
import re
import socket
import threading
from dataclasses import dataclass, field

from .. import wire
from ..wire import Capability, ColumnType, Command

__all__ = ["StubMySQL", "StubError"]

STUB_CAPS = int(
    Capability.PROTOCOL_41
    | Capability.SECURE_CONNECTION
    | Capability.PLUGIN_AUTH
    | Capability.MULTI_RESULTS
)

_TYPE_CODES = {
    "INT": int(ColumnType.LONG),
    "INTEGER": int(ColumnType.LONG),
    "VARCHAR": int(ColumnType.VAR_STRING),
    "TEXT": int(ColumnType.BLOB),
}

_BINARY_CHARSET = 63
_UTF8_CHARSET = 33


class StubError(Exception):
    """Maps to an ERR packet on the wire."""


@dataclass
class _Column:
    name: str
    type_code: int


@dataclass
class _Table:
    name: str
    columns: list[_Column]
    rows: list[list] = field(default_factory=list)

    def index_of(self, column: str) -> int:
        for i, col in enumerate(self.columns):
            if col.name == column:
                return i
        raise StubError(f"unknown column '{column}' in table '{self.name}'")


# -- literal scanning --------------------------------------------------------

_BACKSLASH_ESCAPES = {
    "n": b"\n",
    "t": b"\t",
    "r": b"\r",
    "0": b"\x00",
    "b": b"\x08",
    "Z": b"\x1a",
}

_NUMBER = re.compile(r"-?\d+")
_WORD = re.compile(r"[A-Za-z_]\w*")


def _skip_ws(text: str, i: int) -> int:
    while i < len(text) and text[i] in " \t\r\n":
        i += 1
    return i


def _scan_literal(text: str, i: int):
    """Parse one SQL literal at position i; returns (value, next position)."""
    i = _skip_ws(text, i)
    if i >= len(text):
        raise StubError("expected a literal")
    ch = text[i]
    if ch in "'\"":
        quote = ch
        out = bytearray()
        i += 1
        while i < len(text):
            c = text[i]
            if c == "\\" and i + 1 < len(text):
                esc = text[i + 1]
                out += _BACKSLASH_ESCAPES.get(esc, esc.encode("utf-8", "surrogateescape"))
                i += 2
                continue
            if c == quote:
                if i + 1 < len(text) and text[i + 1] == quote:  # doubled quote
                    out += quote.encode()
                    i += 2
                    continue
                return bytes(out), i + 1
            out += c.encode("utf-8", "surrogateescape")
            i += 1
        raise StubError("unterminated string literal")
    if text[i : i + 4].upper() == "NULL":
        return None, i + 4
    m = _NUMBER.match(text, i)
    if m:
        return int(m.group()), m.end()
    raise StubError(f"cannot parse literal at {text[i:i+20]!r}")


def _expect(text: str, i: int, token: str) -> int:
    i = _skip_ws(text, i)
    if text[i : i + len(token)].upper() != token:
        raise StubError(f"expected {token!r} at {text[i:i+20]!r}")
    return i + len(token)


def _scan_word(text: str, i: int) -> tuple[str, int]:
    i = _skip_ws(text, i)
    m = _WORD.match(text, i)
    if not m:
        raise StubError(f"expected an identifier at {text[i:i+20]!r}")
    return m.group(), m.end()


# -- the server ---------------------------------------------------------------


class StubMySQL:
    def __init__(self, host: str = "127.0.0.1", port: int = 0) -> None:
        self._host = host
        self._port = port
        self._tables: dict[str, _Table] = {}
        self._lock = threading.RLock()
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._closing = False

    # -- lifecycle ------------------------------------------------------

    @property
    def address(self) -> tuple[str, int]:
        assert self._listener is not None
        return self._listener.getsockname()[:2]

    def start(self) -> None:
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((self._host, self._port))
        self._listener.listen(64)
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="stub-mysql-accept", daemon=True
        )
        self._accept_thread.start()

    def stop(self) -> None:
        self._closing = True
        if self._listener is not None:
            # shutdown() wakes a thread blocked in accept(); close() alone
            # does not on Linux
            try:
                self._listener.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                self._listener.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)

    def __enter__(self) -> "StubMySQL":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._serve, args=(conn,), daemon=True
            ).start()

    # -- wire handling ----------------------------------------------------

    def _serve(self, sock: socket.socket) -> None:
        packets = wire.PacketAssembler()
        messages = wire.MessageAssembler()

        def read_message() -> wire.Message | None:
            while True:
                for packet in packets.packets():
                    message = messages.add(packet)
                    if message is not None:
                        return message
                try:
                    data = sock.recv(1 << 16)
                except OSError:
                    return None
                if not data:
                    return None
                packets.feed(data)

        try:
            salt = bytes(c % 94 + 33 for c in os.urandom(20))
            sock.sendall(self._handshake_bytes(salt))
            auth = read_message()
            if auth is None:
                return
            ok, _ = wire.frame_message(wire.encode_ok(), auth.last_seq + 1)
            sock.sendall(ok)
            while True:
                request = read_message()
                if request is None:
                    return
                payload = request.payload
                if not payload or payload[0] == Command.QUIT:
                    return
                sock.sendall(self._respond(payload, request.last_seq + 1))
        except OSError:
            pass
        finally:
            try:
                sock.close()
            except OSError:
                pass

    def _handshake_bytes(self, salt: bytes) -> bytes:
        payload = bytearray()
        payload.append(10)
        payload += b"5.7.99-stub\x00"
        payload += (1).to_bytes(4, "little")
        payload += salt[:8]
        payload.append(0)
        payload += (STUB_CAPS & 0xFFFF).to_bytes(2, "little")
        payload.append(_UTF8_CHARSET)
        payload += wire.SERVER_STATUS_AUTOCOMMIT.to_bytes(2, "little")
        payload += (STUB_CAPS >> 16).to_bytes(2, "little")
        payload.append(21)  # total auth data length
        payload += bytes(10)
        payload += salt[8:20] + b"\x00"
        payload += b"mysql_native_password\x00"
        framed, _ = wire.frame_message(bytes(payload), 0)
        return framed

    def _respond(self, payload: bytes, first_seq: int) -> bytes:
        command = payload[0]
        if command in (Command.PING, Command.INIT_DB):
            framed, _ = wire.frame_message(wire.encode_ok(), first_seq)
            return framed
        if command != Command.QUERY:
            framed, _ = wire.frame_message(
                wire.encode_err(1047, f"unsupported command 0x{command:02x}"),
                first_seq,
            )
            return framed
        sql = payload[1:].decode("utf-8", "surrogateescape")
        try:
            with self._lock:
                reply = self.execute(sql)
        except StubError as exc:
            reply = [wire.encode_err(1064, str(exc))]
        out = bytearray()
        seq = first_seq
        for message in reply:
            framed, seq = wire.frame_message(message, seq)
            out += framed
        return bytes(out)

    # -- SQL ----------------------------------------------------------------

    def execute(self, sql: str) -> list[bytes]:
        """Run one statement; returns the logical response payloads."""
        statement = sql.strip().rstrip(";").strip()
        head = statement.split(None, 1)[0].upper() if statement else ""
        if head == "SELECT":
            return self._select(statement)
        if head == "INSERT":
            return self._insert(statement)
        if head == "UPDATE":
            return self._update(statement)
        if head == "DELETE":
            return self._delete(statement)
        if head == "CREATE":
            return self._create(statement)
        if head == "DROP":
            return self._drop(statement)
        raise StubError(f"unsupported statement {head or sql!r}")

    def _table(self, name: str) -> _Table:
        try:
            return self._tables[name]
        except KeyError:
            raise StubError(f"unknown table '{name}'") from None

    def _coerce(self, column: _Column, value) :
        if value is None:
            return None
        if column.type_code == _TYPE_CODES["INT"]:
            if isinstance(value, bytes):
                try:
                    return int(value.decode("ascii", "replace"))
                except ValueError:
                    raise StubError(
                        f"bad integer for column '{column.name}'"
                    ) from None
            return int(value)
        if isinstance(value, int):
            return str(value).encode()
        return value

    def _where(self, table: _Table, text: str, i: int) -> tuple[list[int], int]:
        """Row indexes selected by an optional WHERE equality clause."""
        j = _skip_ws(text, i)
        if text[j : j + 5].upper() != "WHERE":
            return list(range(len(table.rows))), i
        column, j = _scan_word(text, j + 5)
        j = _expect(text, j, "=")
        literal, j = _scan_literal(text, j)
        idx = table.index_of(column)
        wanted = self._coerce(table.columns[idx], literal)
        matches = [
            r for r, row in enumerate(table.rows) if row[idx] == wanted
        ]
        return matches, j

    # CREATE TABLE name (col TYPE, ...)
    def _create(self, sql: str) -> list[bytes]:
        m = re.match(
            r"CREATE\s+TABLE\s+(?:IF\s+NOT\s+EXISTS\s+)?(\w+)\s*\((.*)\)\s*$",
            sql,
            re.IGNORECASE | re.DOTALL,
        )
        if not m:
            raise StubError("unsupported CREATE TABLE syntax")
        name, body = m.group(1), m.group(2)
        columns = []
        for part in body.split(","):
            cm = re.match(
                r"\s*(\w+)\s+(INT|INTEGER|VARCHAR(?:\s*\(\s*\d+\s*\))?|TEXT)",
                part,
                re.IGNORECASE,
            )
            if not cm:
                raise StubError(f"unsupported column definition {part.strip()!r}")
            base = re.sub(r"\s*\(.*", "", cm.group(2)).upper()
            columns.append(_Column(cm.group(1), _TYPE_CODES[base]))
        self._tables[name] = _Table(name, columns)
        return [wire.encode_ok()]

    def _drop(self, sql: str) -> list[bytes]:
        m = re.match(
            r"DROP\s+TABLE\s+(IF\s+EXISTS\s+)?(\w+)\s*$", sql, re.IGNORECASE
        )
        if not m:
            raise StubError("unsupported DROP TABLE syntax")
        name = m.group(2)
        if name not in self._tables and not m.group(1):
            raise StubError(f"unknown table '{name}'")
        self._tables.pop(name, None)
        return [wire.encode_ok()]

    def _insert(self, sql: str) -> list[bytes]:
        m = re.match(
            r"INSERT\s+INTO\s+(\w+)\s*\(([^)]*)\)\s*VALUES\s*",
            sql,
            re.IGNORECASE,
        )
        if not m:
            raise StubError("unsupported INSERT syntax")
        table = self._table(m.group(1))
        names = [n.strip() for n in m.group(2).split(",")]
        indexes = [table.index_of(n) for n in names]
        i = m.end()
        inserted = 0
        while True:
            i = _expect(sql, i, "(")
            values = []
            while True:
                value, i = _scan_literal(sql, i)
                values.append(value)
                i = _skip_ws(sql, i)
                if sql[i : i + 1] == ",":
                    i += 1
                    continue
                i = _expect(sql, i, ")")
                break
            if len(values) != len(names):
                raise StubError("column/value count mismatch")
            row = [None] * len(table.columns)
            for idx, value in zip(indexes, values):
                row[idx] = self._coerce(table.columns[idx], value)
            table.rows.append(row)
            inserted += 1
            i = _skip_ws(sql, i)
            if sql[i : i + 1] == ",":
                i += 1
                continue
            if i != len(sql):
                raise StubError(f"trailing content {sql[i:i+20]!r}")
            return [wire.encode_ok(affected=inserted)]

    def _update(self, sql: str) -> list[bytes]:
        m = re.match(r"UPDATE\s+(\w+)\s+SET\s+", sql, re.IGNORECASE)
        if not m:
            raise StubError("unsupported UPDATE syntax")
        table = self._table(m.group(1))
        i = m.end()
        assignments = []
        while True:
            column, i = _scan_word(sql, i)
            i = _expect(sql, i, "=")
            value, i = _scan_literal(sql, i)
            assignments.append((table.index_of(column), value))
            i = _skip_ws(sql, i)
            if sql[i : i + 1] == ",":
                i += 1
                continue
            break
        rows, i = self._where(table, sql, i)
        if _skip_ws(sql, i) != len(sql):
            raise StubError("trailing content after UPDATE")
        for r in rows:
            for idx, value in assignments:
                table.rows[r][idx] = self._coerce(table.columns[idx], value)
        return [wire.encode_ok(affected=len(rows))]

    def _delete(self, sql: str) -> list[bytes]:
        m = re.match(r"DELETE\s+FROM\s+(\w+)", sql, re.IGNORECASE)
        if not m:
            raise StubError("unsupported DELETE syntax")
        table = self._table(m.group(1))
        rows, i = self._where(table, sql, m.end())
        if _skip_ws(sql, i) != len(sql):
            raise StubError("trailing content after DELETE")
        for r in sorted(rows, reverse=True):
            del table.rows[r]
        return [wire.encode_ok(affected=len(rows))]

    def _select(self, sql: str) -> list[bytes]:
        m = re.match(
            r"SELECT\s+(.*?)\s+FROM\s+(\w+)", sql, re.IGNORECASE | re.DOTALL
        )
        if not m:
            raise StubError("unsupported SELECT syntax")
        table = self._table(m.group(2))
        selector = m.group(1).strip()
        if selector == "*":
            indexes = list(range(len(table.columns)))
        else:
            indexes = [
                table.index_of(name.strip()) for name in selector.split(",")
            ]
        rows, i = self._where(table, sql, m.end())
        j = _skip_ws(sql, i)
        if sql[j : j + 8].upper() == "ORDER BY":
            column, j = _scan_word(sql, j + 8)
            order_idx = table.index_of(column)
            rows.sort(key=lambda r: _sort_key(table.rows[r][order_idx]))
        if _skip_ws(sql, j) != len(sql):
            raise StubError(f"trailing content {sql[j:j+20]!r}")

        payloads = [wire.write_lenenc_int(len(indexes))]
        for idx in indexes:
            column = table.columns[idx]
            payloads.append(self._column_definition(table.name, column))
        payloads.append(wire.encode_eof())
        for r in rows:
            cells = []
            for idx in indexes:
                value = table.rows[r][idx]
                if value is None:
                    cells.append(None)
                elif isinstance(value, int):
                    cells.append(str(value).encode())
                else:
                    cells.append(value)
            payloads.append(wire.encode_text_row(cells))
        payloads.append(wire.encode_eof())
        return payloads

    @staticmethod
    def _column_definition(table_name: str, column: _Column) -> bytes:
        is_int = column.type_code == _TYPE_CODES["INT"]
        return wire.encode_column_definition(
            wire.ColumnDefinition(
                catalog=b"def",
                schema=b"fixture",
                table=table_name.encode(),
                org_table=table_name.encode(),
                name=column.name.encode(),
                org_name=column.name.encode(),
                charset=_BINARY_CHARSET if is_int else _UTF8_CHARSET,
                length=11 if is_int else 1020,
                type_code=column.type_code,
                flags=0,
                decimals=0,
            )
        )


def _sort_key(value):
    if value is None:
        return (0, b"")
    if isinstance(value, int):
        return (1, value.to_bytes(16, "big", signed=True))
    return (2, value)
