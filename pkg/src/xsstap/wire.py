"""MySQL client/server wire protocol primitives.

Covers exactly what a transparent relay needs: the 4-byte packet header
(3-byte little-endian length plus sequence number), the 16 MiB - 1
large-message continuation rule, length-encoded integers and strings,
column-definition packets, text-protocol rows, and the OK/EOF/ERR
framing of the text query path.  Everything operates on bytes; cell
values are never transcoded.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum, IntFlag
from typing import Iterator, Optional

MAX_PACKET = 0xFFFFFF  # payloads of exactly this size continue in the next packet
NULL_CELL = 0xFB  # text-row marker for SQL NULL
HEADER_LEN = 4


class Capability(IntFlag):
    LONG_PASSWORD = 1
    FOUND_ROWS = 1 << 1
    LONG_FLAG = 1 << 2
    CONNECT_WITH_DB = 1 << 3
    NO_SCHEMA = 1 << 4
    COMPRESS = 1 << 5
    LOCAL_FILES = 1 << 7
    PROTOCOL_41 = 1 << 9
    INTERACTIVE = 1 << 10
    SSL = 1 << 11
    TRANSACTIONS = 1 << 13
    SECURE_CONNECTION = 1 << 15
    MULTI_STATEMENTS = 1 << 16
    MULTI_RESULTS = 1 << 17
    PS_MULTI_RESULTS = 1 << 18
    PLUGIN_AUTH = 1 << 19
    CONNECT_ATTRS = 1 << 20
    PLUGIN_AUTH_LENENC = 1 << 21
    DEPRECATE_EOF = 1 << 24
    OPTIONAL_RESULTSET_METADATA = 1 << 25
    ZSTD_COMPRESSION = 1 << 26
    QUERY_ATTRIBUTES = 1 << 27


# Capabilities the relay refuses during handshake so both sides settle on
# the plain, uncompressed, classic-EOF text framing the interceptor parses.
RELAY_CLEARED_CAPABILITIES = (
    Capability.SSL
    | Capability.COMPRESS
    | Capability.ZSTD_COMPRESSION
    | Capability.DEPRECATE_EOF
    | Capability.OPTIONAL_RESULTSET_METADATA
)


class Command(IntEnum):
    QUIT = 0x01
    INIT_DB = 0x02
    QUERY = 0x03
    FIELD_LIST = 0x04
    STATISTICS = 0x09
    PING = 0x0E
    STMT_PREPARE = 0x16
    STMT_EXECUTE = 0x17
    STMT_CLOSE = 0x19


class ColumnType(IntEnum):
    DECIMAL = 0
    TINY = 1
    SHORT = 2
    LONG = 3
    FLOAT = 4
    DOUBLE = 5
    NULL = 6
    TIMESTAMP = 7
    LONGLONG = 8
    INT24 = 9
    DATE = 10
    TIME = 11
    DATETIME = 12
    YEAR = 13
    NEWDATE = 14
    VARCHAR = 15
    BIT = 16
    TIMESTAMP2 = 17
    DATETIME2 = 18
    TIME2 = 19
    JSON = 245
    NEWDECIMAL = 246
    ENUM = 247
    SET = 248
    TINY_BLOB = 249
    MEDIUM_BLOB = 250
    LONG_BLOB = 251
    BLOB = 252
    VAR_STRING = 253
    STRING = 254
    GEOMETRY = 255


# The only wire types whose cells can realistically carry markup; every
# other type code (including unknown/future ones) is left untouched.
STRING_FAMILY_TYPES = frozenset(
    {ColumnType.VARCHAR, ColumnType.VAR_STRING, ColumnType.STRING}
)

SERVER_STATUS_AUTOCOMMIT = 0x0002
SERVER_MORE_RESULTS_EXISTS = 0x0008


class WireError(ValueError):
    """A packet did not parse as the protocol element it should be."""


# ---------------------------------------------------------------------------
# length-encoded integers and strings


def read_lenenc_int(buf: bytes, pos: int) -> tuple[int, int]:
    if pos >= len(buf):
        raise WireError("truncated length-encoded integer")
    first = buf[pos]
    if first < 0xFB:
        return first, pos + 1
    if first == 0xFC:
        width = 2
    elif first == 0xFD:
        width = 3
    elif first == 0xFE:
        width = 8
    else:  # 0xFB is the NULL cell marker, 0xFF an error header
        raise WireError(f"invalid length-encoded integer prefix 0x{first:02x}")
    end = pos + 1 + width
    if end > len(buf):
        raise WireError("truncated length-encoded integer")
    return int.from_bytes(buf[pos + 1 : end], "little"), end


def write_lenenc_int(value: int) -> bytes:
    if value < 0:
        raise WireError("negative length-encoded integer")
    if value < 0xFB:
        return bytes((value,))
    if value <= 0xFFFF:
        return b"\xfc" + value.to_bytes(2, "little")
    if value <= 0xFFFFFF:
        return b"\xfd" + value.to_bytes(3, "little")
    return b"\xfe" + value.to_bytes(8, "little")


def read_lenenc_bytes(buf: bytes, pos: int) -> tuple[bytes, int]:
    length, pos = read_lenenc_int(buf, pos)
    end = pos + length
    if end > len(buf):
        raise WireError("truncated length-encoded string")
    return buf[pos:end], end


def write_lenenc_bytes(data: bytes) -> bytes:
    return write_lenenc_int(len(data)) + data


# ---------------------------------------------------------------------------
# packet and message framing


def split_payload(payload: bytes) -> Iterator[bytes]:
    """Chunk a logical payload per the large-message continuation rule.

    Every chunk but the last has length MAX_PACKET; a payload whose size
    is an exact multiple of MAX_PACKET is terminated by an empty chunk.
    """
    n = len(payload)
    if n == 0:
        yield b""
        return
    pos = 0
    while pos < n:
        chunk = payload[pos : pos + MAX_PACKET]
        yield chunk
        pos += len(chunk)
    if n % MAX_PACKET == 0:
        yield b""


def frame_message(payload: bytes, first_seq: int) -> tuple[bytes, int]:
    """Encode a logical payload as one or more packets; returns next seq."""
    out = bytearray()
    seq = first_seq & 0xFF
    for chunk in split_payload(payload):
        out += len(chunk).to_bytes(3, "little")
        out.append(seq)
        out += chunk
        seq = (seq + 1) & 0xFF
    return bytes(out), seq


def packet_payload_length(packet: bytes) -> int:
    return int.from_bytes(packet[:3], "little")


def packet_sequence(packet: bytes) -> int:
    return packet[3]


def with_sequence(packet: bytes, seq: int) -> bytes:
    return packet[:3] + bytes((seq & 0xFF,)) + packet[4:]


class PacketAssembler:
    """Reassembles raw packets (header + payload) from a byte stream."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> None:
        self._buf += data

    def packets(self) -> Iterator[bytes]:
        while True:
            if len(self._buf) < HEADER_LEN:
                return
            total = HEADER_LEN + int.from_bytes(self._buf[:3], "little")
            if len(self._buf) < total:
                return
            packet = bytes(self._buf[:total])
            del self._buf[:total]
            yield packet

    def pending(self) -> int:
        return len(self._buf)

    def drain(self) -> bytes:
        """Hand back any buffered partial packet and stop holding it."""
        data = bytes(self._buf)
        self._buf.clear()
        return data


@dataclass(frozen=True)
class Message:
    """A logical protocol message, possibly spanning several packets."""

    payload: bytes
    packets: tuple[bytes, ...]
    first_seq: int
    last_seq: int


class MessageAssembler:
    """Groups consecutive packets into messages per the continuation rule."""

    def __init__(self) -> None:
        self._parts: list[bytes] = []
        self._raw: list[bytes] = []

    def add(self, packet: bytes) -> Optional[Message]:
        payload = packet[HEADER_LEN:]
        self._parts.append(payload)
        self._raw.append(packet)
        if len(payload) == MAX_PACKET:
            return None
        message = Message(
            payload=b"".join(self._parts),
            packets=tuple(self._raw),
            first_seq=self._raw[0][3],
            last_seq=self._raw[-1][3],
        )
        self._parts = []
        self._raw = []
        return message

    @property
    def mid_message(self) -> bool:
        return bool(self._raw)


# ---------------------------------------------------------------------------
# OK / EOF / ERR classification (protocol 4.1, classic EOF framing)


def is_ok_header(payload: bytes) -> bool:
    return len(payload) >= 7 and payload[0] == 0x00


def is_err_packet(payload: bytes) -> bool:
    return len(payload) >= 3 and payload[0] == 0xFF


def is_eof_packet(payload: bytes) -> bool:
    # terminating EOF packets are short; a row may also start with 0xFE
    # but only when its first cell is >= 2**16 bytes, making the payload long
    return 0 < len(payload) < 9 and payload[0] == 0xFE


def eof_status_flags(payload: bytes) -> int:
    if len(payload) >= 5:
        return int.from_bytes(payload[3:5], "little")
    return 0


def ok_status_flags(payload: bytes) -> int:
    pos = 1
    _, pos = read_lenenc_int(payload, pos)  # affected rows
    _, pos = read_lenenc_int(payload, pos)  # last insert id
    if pos + 2 <= len(payload):
        return int.from_bytes(payload[pos : pos + 2], "little")
    return 0


def encode_ok(affected: int = 0, insert_id: int = 0, status: int = SERVER_STATUS_AUTOCOMMIT, warnings: int = 0) -> bytes:
    return (
        b"\x00"
        + write_lenenc_int(affected)
        + write_lenenc_int(insert_id)
        + status.to_bytes(2, "little")
        + warnings.to_bytes(2, "little")
    )


def encode_eof(status: int = SERVER_STATUS_AUTOCOMMIT, warnings: int = 0) -> bytes:
    return b"\xfe" + warnings.to_bytes(2, "little") + status.to_bytes(2, "little")


def encode_err(code: int, message: str, sqlstate: str = "HY000") -> bytes:
    return (
        b"\xff"
        + code.to_bytes(2, "little")
        + b"#"
        + sqlstate.encode("ascii")
        + message.encode("utf-8")
    )


# ---------------------------------------------------------------------------
# column definitions and text rows


@dataclass(frozen=True)
class ColumnDefinition:
    catalog: bytes
    schema: bytes
    table: bytes  # display alias
    org_table: bytes  # originating physical table, empty for derived values
    name: bytes  # display alias
    org_name: bytes
    charset: int
    length: int
    type_code: int
    flags: int
    decimals: int


def parse_column_definition(payload: bytes) -> ColumnDefinition:
    pos = 0
    fields = []
    for _ in range(6):
        value, pos = read_lenenc_bytes(payload, pos)
        fields.append(value)
    fixed_len, pos = read_lenenc_int(payload, pos)
    if fixed_len < 0x0C or pos + fixed_len > len(payload):
        raise WireError("malformed column definition fixed-length block")
    charset, length = struct.unpack_from("<HI", payload, pos)
    type_code = payload[pos + 6]
    flags = int.from_bytes(payload[pos + 7 : pos + 9], "little")
    decimals = payload[pos + 9]
    return ColumnDefinition(
        catalog=fields[0],
        schema=fields[1],
        table=fields[2],
        org_table=fields[3],
        name=fields[4],
        org_name=fields[5],
        charset=charset,
        length=length,
        type_code=type_code,
        flags=flags,
        decimals=decimals,
    )


def encode_column_definition(column: ColumnDefinition) -> bytes:
    out = bytearray()
    for part in (
        column.catalog,
        column.schema,
        column.table,
        column.org_table,
        column.name,
        column.org_name,
    ):
        out += write_lenenc_bytes(part)
    out += write_lenenc_int(0x0C)
    out += struct.pack("<HI", column.charset, column.length)
    out.append(column.type_code)
    out += column.flags.to_bytes(2, "little")
    out.append(column.decimals)
    out += b"\x00\x00"  # filler
    return bytes(out)


def parse_text_row(payload: bytes, n_columns: int) -> list[Optional[bytes]]:
    cells: list[Optional[bytes]] = []
    pos = 0
    for _ in range(n_columns):
        if pos >= len(payload):
            raise WireError("row has fewer cells than the column count")
        if payload[pos] == NULL_CELL:
            cells.append(None)
            pos += 1
        else:
            value, pos = read_lenenc_bytes(payload, pos)
            cells.append(value)
    if pos != len(payload):
        raise WireError("trailing bytes after the last row cell")
    return cells


def encode_text_row(cells: list[Optional[bytes]]) -> bytes:
    out = bytearray()
    for cell in cells:
        if cell is None:
            out.append(NULL_CELL)
        else:
            out += write_lenenc_bytes(cell)
    return bytes(out)


# ---------------------------------------------------------------------------
# handshake parsing and capability patching


@dataclass(frozen=True)
class ServerHandshake:
    protocol_version: int
    server_version: bytes
    connection_id: int
    auth_data: bytes
    capabilities: int
    charset: int
    status: int
    auth_plugin: bytes
    cap_low_offset: int
    cap_high_offset: Optional[int]


def parse_server_handshake(payload: bytes) -> ServerHandshake:
    if not payload or payload[0] != 10:
        raise WireError("unsupported handshake protocol version")
    nul = payload.find(b"\x00", 1)
    if nul < 0:
        raise WireError("unterminated server version")
    pos = nul + 1
    if pos + 13 > len(payload):
        raise WireError("truncated handshake")
    connection_id = int.from_bytes(payload[pos : pos + 4], "little")
    auth1 = payload[pos + 4 : pos + 12]
    cap_low_offset = pos + 13
    caps = int.from_bytes(payload[cap_low_offset : cap_low_offset + 2], "little")
    charset = 0
    status = 0
    cap_high_offset: Optional[int] = None
    auth2 = b""
    plugin = b""
    rest = cap_low_offset + 2
    if rest < len(payload):
        charset = payload[rest]
        status = int.from_bytes(payload[rest + 1 : rest + 3], "little")
        cap_high_offset = rest + 3
        caps |= int.from_bytes(payload[cap_high_offset : cap_high_offset + 2], "little") << 16
        auth_len = payload[cap_high_offset + 2] if cap_high_offset + 2 < len(payload) else 0
        pos2 = cap_high_offset + 3 + 10  # skip reserved bytes
        if caps & Capability.SECURE_CONNECTION and pos2 < len(payload):
            take = max(13, auth_len - 8)
            auth2 = payload[pos2 : pos2 + take].rstrip(b"\x00")
            pos2 += take
        if caps & Capability.PLUGIN_AUTH and pos2 < len(payload):
            end = payload.find(b"\x00", pos2)
            plugin = payload[pos2:] if end < 0 else payload[pos2:end]
    return ServerHandshake(
        protocol_version=payload[0],
        server_version=payload[1:nul],
        connection_id=connection_id,
        auth_data=auth1 + auth2,
        capabilities=caps,
        charset=charset,
        status=status,
        auth_plugin=plugin,
        cap_low_offset=cap_low_offset,
        cap_high_offset=cap_high_offset,
    )


def clear_server_capabilities(payload: bytes, mask: int) -> bytes:
    """Return the handshake payload with the masked capability bits cleared.

    Only the four capability bytes are touched so the relayed handshake
    stays byte-identical everywhere else.
    """
    shake = parse_server_handshake(payload)
    caps = shake.capabilities & ~mask
    patched = bytearray(payload)
    patched[shake.cap_low_offset : shake.cap_low_offset + 2] = (caps & 0xFFFF).to_bytes(2, "little")
    if shake.cap_high_offset is not None:
        patched[shake.cap_high_offset : shake.cap_high_offset + 2] = (caps >> 16).to_bytes(2, "little")
    return bytes(patched)


def client_capabilities(payload: bytes) -> int:
    if len(payload) < 2:
        raise WireError("truncated handshake response")
    low = int.from_bytes(payload[:2], "little")
    if low & Capability.PROTOCOL_41:
        if len(payload) < 4:
            raise WireError("truncated handshake response")
        return int.from_bytes(payload[:4], "little")
    return low


def is_ssl_request(payload: bytes) -> bool:
    # an SSLRequest is a 32-byte prefix of the normal response with SSL set
    try:
        caps = client_capabilities(payload)
    except WireError:
        return False
    return bool(caps & Capability.SSL) and len(payload) <= 36


def clear_client_capabilities(payload: bytes, mask: int) -> bytes:
    caps = client_capabilities(payload)
    patched = bytearray(payload)
    if caps & Capability.PROTOCOL_41:
        patched[:4] = (caps & ~mask).to_bytes(4, "little")
    else:
        patched[:2] = (caps & ~mask & 0xFFFF).to_bytes(2, "little")
    return bytes(patched)
