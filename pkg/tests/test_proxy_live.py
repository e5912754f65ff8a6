"""Live relay stack: stub server, socket proxy, real client, control plane."""

from __future__ import annotations

import json
import socket

import pytest

from xsstap.control import ControlClient, ControlError, handle_command
from xsstap.dbclient import Connection, DbError, native_password_scramble
from xsstap.fixture.mysql_stub import StubMySQL
from xsstap.intercept import InjectionSpec, ProxyMode, ProxyState
from xsstap.proxy import ProxyServer


def sql_quote(value: bytes) -> str:
    out = value.decode("utf-8", "surrogateescape")
    for raw, escaped in (("\\", "\\\\"), ("'", "\\'"), ('"', '\\"'), ("\x00", "\\0")):
        out = out.replace(raw, escaped)
    return "'" + out + "'"


TRICKY = b"abcdef<gh\"ij'kl&mn:op\\qr/stuv"


@pytest.fixture()
def stub():
    server = StubMySQL()
    server.start()
    seed = Connection(*server.address)
    # raw TEXT maps to a BLOB-family wire type; only VARCHAR cells are
    # observable, so the blob column doubles as a negative control
    seed.query(
        "CREATE TABLE posts (id INT, title VARCHAR(100), body VARCHAR(200), raw TEXT)"
    )
    seed.query(
        "INSERT INTO posts (id, title, body, raw) VALUES "
        f"(1, {sql_quote(b'hello')}, {sql_quote(b'world')}, 'blobbed'), "
        f"(2, {sql_quote(TRICKY)}, NULL, NULL)"
    )
    seed.close()
    yield server
    server.stop()


@pytest.fixture()
def stack(stub):
    proxy = ProxyServer(("127.0.0.1", 0), stub.address, control=("127.0.0.1", 0))
    proxy.start()
    control = ControlClient(*proxy.control_address)
    yield stub, proxy, control
    control.close()
    proxy.stop()


# ---------------------------------------------------------------------------
# client <-> stub directly


def test_client_round_trips_awkward_bytes(stub):
    with Connection(*stub.address) as conn:
        row = conn.query("SELECT title FROM posts WHERE id = 2").single()
        assert row == [TRICKY]


def test_client_sees_null_and_integers(stub):
    with Connection(*stub.address) as conn:
        result = conn.query("SELECT id, title, body FROM posts WHERE id = 2")
        assert result.columns == ["id", "title", "body"]
        assert result.single() == [b"2", TRICKY, None]


def test_wildcard_injection_skips_blob_family(stack):
    stub, proxy, control = stack
    control.set_mode(ProxyMode.INJECTING)
    control.set_specs([InjectionSpec(payload=b"EVERYWHERE")])
    with Connection(*proxy.listen_address) as conn:
        row = conn.query("SELECT id, title, raw FROM posts WHERE id = 1").single()
        assert row == [b"1", b"EVERYWHERE", b"blobbed"]


def test_client_dml_and_order(stub):
    with Connection(*stub.address) as conn:
        assert conn.query("UPDATE posts SET title = 'x' WHERE id = 1").affected == 1
        assert conn.query("DELETE FROM posts WHERE id = 2").affected == 1
        conn.query("INSERT INTO posts (id, title) VALUES (9, 'z')")
        result = conn.query("SELECT id FROM posts ORDER BY id")
        assert [r[0] for r in result.rows] == [b"1", b"9"]


def test_client_surfaces_server_errors(stub):
    with Connection(*stub.address) as conn:
        with pytest.raises(DbError, match="server error 1064"):
            conn.query("GRANT ALL ON *.*")
        with pytest.raises(DbError, match="unknown table"):
            conn.query("SELECT a FROM missing")


def test_scramble_golden():
    # independently computed with hashlib: pw 'secret', salt of 20 'A's
    import hashlib

    pw, salt = b"secret", b"A" * 20
    s1 = hashlib.sha1(pw).digest()
    expected = bytes(
        a ^ b
        for a, b in zip(s1, hashlib.sha1(salt + hashlib.sha1(s1).digest()).digest())
    )
    assert native_password_scramble(pw, salt) == expected
    assert native_password_scramble(b"", salt) == b""


# ---------------------------------------------------------------------------
# through the relay


def test_passthrough_relay_is_transparent(stack):
    stub, proxy, control = stack
    with Connection(*proxy.listen_address) as conn:
        assert conn.query("SELECT title FROM posts WHERE id = 2").single() == [TRICKY]
    assert control.get_events() == []


def test_recording_through_relay(stack):
    stub, proxy, control = stack
    control.set_mode(ProxyMode.RECORDING)
    with Connection(*proxy.listen_address) as conn:
        conn.query("SELECT id, title, body, raw FROM posts WHERE id = 1")
    events = control.get_events()
    # the INT and TEXT(BLOB) cells were fetched but are not observable
    assert [(e.table, e.column, e.value, e.ordinal) for e in events] == [
        ("posts", "title", b"hello", 0),
        ("posts", "body", b"world", 1),
    ]
    control.clear()
    assert control.get_events() == []
    with Connection(*proxy.listen_address) as conn:
        conn.query("SELECT title FROM posts WHERE id = 1")
    assert [e.ordinal for e in control.get_events()] == [0]


def test_injection_through_relay_reaches_real_client(stack):
    stub, proxy, control = stack
    control.set_mode(ProxyMode.INJECTING)
    control.set_specs([InjectionSpec(table="posts", column="title", payload=b"<PAYLOAD>")])
    with Connection(*proxy.listen_address) as conn:
        result = conn.query("SELECT id, title, body FROM posts WHERE id = 1")
        assert result.single() == [b"1", b"<PAYLOAD>", b"world"]
    # the backing store is untouched: only the wire stream was rewritten
    with Connection(*stub.address) as direct:
        assert direct.query("SELECT title FROM posts WHERE id = 1").single() == [b"hello"]


def test_injection_value_filter_through_relay(stack):
    stub, proxy, control = stack
    control.set_mode(ProxyMode.INJECTING)
    control.set_specs([InjectionSpec(value=TRICKY, payload=b"swapped")])
    with Connection(*proxy.listen_address) as conn:
        rows = conn.query("SELECT title FROM posts ORDER BY id").rows
        assert rows == [[b"hello"], [b"swapped"]]


def test_proxy_survives_many_sequential_connections(stack):
    stub, proxy, control = stack
    control.set_mode(ProxyMode.RECORDING)
    for _ in range(5):
        with Connection(*proxy.listen_address) as conn:
            conn.query("SELECT title FROM posts WHERE id = 1")
    ordinals = [e.ordinal for e in control.get_events()]
    assert ordinals == list(range(5))


# ---------------------------------------------------------------------------
# control plane edges


def test_control_rejects_unknown_commands(stack):
    _, proxy, control = stack
    with pytest.raises(ControlError, match="unknown command"):
        control._call({"cmd": "reboot"})


def test_control_rejects_bad_mode(stack):
    _, proxy, control = stack
    with pytest.raises(ControlError):
        control._call({"cmd": "set_mode", "mode": "loud"})


def test_control_malformed_json_line(stack):
    _, proxy, _ = stack
    with socket.create_connection(proxy.control_address, timeout=5) as sock:
        sock.sendall(b"this is not json\n")
        reply = json.loads(sock.makefile().readline())
    assert reply == {"ok": False, "error": "malformed JSON"}


def test_handle_command_shapes():
    state = ProxyState()
    state.record("t", "c", b"\x00\xffbytes")
    reply = handle_command(state, {"cmd": "get_events"})
    assert reply["ok"] is True
    assert reply["events"] == [
        {"table": "t", "column": "c", "value": "AP9ieXRlcw==", "ordinal": 0}
    ]
    assert handle_command(state, {"cmd": "set_specs", "specs": "nope"})["ok"] is False
    assert handle_command(state, ["not", "a", "dict"])["ok"] is False
    ok = handle_command(
        state,
        {"cmd": "set_specs", "specs": [{"column": "c", "payload": "eA=="}]},
    )
    assert ok == {"ok": True}
    assert state.snapshot()[1] == (InjectionSpec(column="c", payload=b"x"),)


# ---------------------------------------------------------------------------
# failure behavior


def test_dead_upstream_drops_client(stub):
    # grab a port that is then closed again: connecting to it must fail
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    dead = probe.getsockname()
    probe.close()
    proxy = ProxyServer(("127.0.0.1", 0), dead)
    proxy.start()
    try:
        with pytest.raises(DbError):
            Connection(*proxy.listen_address, timeout=5)
        assert proxy.state.diagnostics["upstream-connect-failed"] == 1
    finally:
        proxy.stop()


def test_listener_bind_conflict_raises(stub):
    first = ProxyServer(("127.0.0.1", 0), stub.address)
    first.start()
    try:
        with pytest.raises(OSError):
            ProxyServer(first.listen_address, stub.address)
    finally:
        first.stop()
