"""Socket plumbing: a transparent TCP relay around the interceptor.

Each accepted client gets its own upstream connection and its own
``ConnectionInterceptor``; two pump threads move bytes in either direction
through it. A per-connection lock serializes the two directions because
handshake phase transitions are driven from both sides.
"""

from __future__ import annotations

import socket
import threading

from .control import ControlServer
from .intercept import ConnectionInterceptor, ProxyState

__all__ = ["ProxyServer", "run_proxy"]

_BUFSIZE = 1 << 16


def _pump(
    source: socket.socket,
    sink: socket.socket,
    transform,
    lock: threading.Lock,
) -> None:
    try:
        while True:
            data = source.recv(_BUFSIZE)
            if not data:
                break
            with lock:
                out = transform(data)
            if out:
                sink.sendall(out)
    except Exception:
        # a relay thread must never take the process down; dropping the
        # connection is the worst allowed outcome
        pass
    finally:
        # half-close so the peer pump drains whatever is still in flight
        for sock, how in ((sink, socket.SHUT_WR), (source, socket.SHUT_RD)):
            try:
                sock.shutdown(how)
            except OSError:
                pass


class ProxyServer:
    """Accepts database clients and relays them to one upstream server."""

    def __init__(
        self,
        listen: tuple[str, int],
        upstream: tuple[str, int],
        control: tuple[str, int] | None = None,
        state: ProxyState | None = None,
        control_token: str | None = None,
    ) -> None:
        self.state = state or ProxyState()
        self._upstream = upstream
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._listener.bind(listen)
        except OSError:
            self._listener.close()
            raise
        self._control = None
        if control is not None:
            try:
                self._control = ControlServer(control, self.state, control_token)
            except OSError:
                self._listener.close()
                raise
        self._accept_thread: threading.Thread | None = None
        self._conns: set[socket.socket] = set()
        self._conns_lock = threading.Lock()
        self._closing = False

    @property
    def listen_address(self) -> tuple[str, int]:
        return self._listener.getsockname()[:2]

    @property
    def control_address(self) -> tuple[str, int] | None:
        return None if self._control is None else self._control.address

    def start(self) -> None:
        self._listener.listen(64)
        if self._control is not None:
            self._control.start()
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="relay-accept", daemon=True
        )
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        while not self._closing:
            try:
                client, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._serve_client, args=(client,), daemon=True
            ).start()

    def _track(self, *socks: socket.socket) -> None:
        with self._conns_lock:
            self._conns.update(socks)

    def _untrack(self, *socks: socket.socket) -> None:
        with self._conns_lock:
            self._conns.difference_update(socks)

    def _serve_client(self, client: socket.socket) -> None:
        try:
            upstream = socket.create_connection(self._upstream, timeout=10)
        except OSError:
            self.state.note("upstream-connect-failed")
            client.close()
            return
        upstream.settimeout(None)
        self._track(client, upstream)
        interceptor = ConnectionInterceptor(self.state)
        lock = threading.Lock()
        threads = [
            threading.Thread(
                target=_pump,
                args=(client, upstream, interceptor.from_client, lock),
                daemon=True,
            ),
            threading.Thread(
                target=_pump,
                args=(upstream, client, interceptor.from_server, lock),
                daemon=True,
            ),
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        self._untrack(client, upstream)
        for sock in (client, upstream):
            try:
                sock.close()
            except OSError:
                pass

    def stop(self) -> None:
        self._closing = True
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
        if self._control is not None:
            self._control.stop()
        with self._conns_lock:
            conns = list(self._conns)
        for sock in conns:
            try:
                sock.close()
            except OSError:
                pass
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)

    def __enter__(self) -> "ProxyServer":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()


def run_proxy(
    listen: tuple[str, int],
    upstream: tuple[str, int],
    control: tuple[str, int] | None = None,
    control_token: str | None = None,
) -> None:
    """Run the relay until interrupted; raises OSError if a bind fails."""
    server = ProxyServer(listen, upstream, control, control_token=control_token)
    server.start()
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
