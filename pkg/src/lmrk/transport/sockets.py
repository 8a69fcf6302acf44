"""Stream-socket backend: length-prefixed frames (u32 LE length, then body).

Bound sides accept any number of peers.  Patterns mirror the simulated
backend: a publisher copies every frame to all connected subscribers, a
push server hands frames to connected pullers round-robin, and a pull
server fans frames in from any number of connected pushers.
"""
from __future__ import annotations

import queue
import socket
import struct
import threading
import time

_LEN = struct.Struct("<I")
MAX_FRAME = 1 << 30


class TransportFailure(ConnectionError):
    pass


def parse_addr(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host:
        raise ValueError(f"address must be host:port, got {addr!r}")
    return host, int(port)


def format_addr(host: str, port: int) -> str:
    return f"{host}:{port}"


def send_frame(sock: socket.socket, body: bytes) -> None:
    sock.sendall(_LEN.pack(len(body)) + body)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            return None
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def recv_frame(sock: socket.socket) -> bytes | None:
    """Read one frame; ``None`` on a clean end of stream."""
    head = _recv_exact(sock, _LEN.size)
    if head is None:
        return None
    (n,) = _LEN.unpack(head)
    if n > MAX_FRAME:
        raise TransportFailure(f"frame of {n} bytes exceeds limit")
    body = _recv_exact(sock, n) if n else b""
    if body is None:
        raise TransportFailure("stream ended inside a frame")
    return body


def connect(addr: str, retries: int = 50, backoff: float = 0.05) -> socket.socket:
    """Connect with bounded retry and fixed backoff."""
    host, port = parse_addr(addr)
    last = None
    for _ in range(retries):
        try:
            sock = socket.create_connection((host, port))
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            return sock
        except OSError as exc:
            last = exc
            time.sleep(backoff)
    raise TransportFailure(f"could not connect to {addr}: {last}")


class _Server:
    def __init__(self, addr: str = "127.0.0.1:0"):
        host, port = parse_addr(addr)
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(128)
        self.address = format_addr(*self._listener.getsockname()[:2])
        self._peers: list[socket.socket] = []
        self._lock = threading.Condition()
        self._closed = False
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True)
        self._acceptor.start()

    def _accept_loop(self):
        while True:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with self._lock:
                self._peers.append(sock)
                self._lock.notify_all()
            self._on_peer(sock)

    def _on_peer(self, sock: socket.socket) -> None:
        pass

    @property
    def peer_count(self) -> int:
        with self._lock:
            return len(self._peers)

    def wait_for_peers(self, n: int, timeout: float = 10.0) -> None:
        with self._lock:
            if not self._lock.wait_for(lambda: len(self._peers) >= n, timeout):
                raise TransportFailure(f"only {len(self._peers)} of {n} peers connected")

    def close(self):
        self._closed = True
        try:
            self._listener.close()
        except OSError:
            pass
        with self._lock:
            for s in self._peers:
                try:
                    s.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                s.close()
            self._peers.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Publisher(_Server):
    def publish(self, body: bytes) -> int:
        with self._lock:
            peers = list(self._peers)
        for s in peers:
            try:
                send_frame(s, body)
            except OSError as exc:
                raise TransportFailure(f"publish failed: {exc}") from exc
        return len(peers)


class PushServer(_Server):
    """Round-robin over connected pullers, in connection order."""

    def __init__(self, addr: str = "127.0.0.1:0"):
        super().__init__(addr)
        self._next = 0

    def push(self, body: bytes, timeout: float = 10.0) -> None:
        with self._lock:
            if not self._lock.wait_for(lambda: self._peers, timeout):
                raise TransportFailure("no puller connected")
            s = self._peers[self._next % len(self._peers)]
            self._next += 1
        try:
            send_frame(s, body)
        except OSError as exc:
            raise TransportFailure(f"push failed: {exc}") from exc


class PullServer(_Server):
    """Fan-in from every connected pusher into one receive queue."""

    def __init__(self, addr: str = "127.0.0.1:0"):
        self._inbox: queue.Queue = queue.Queue()
        super().__init__(addr)

    def _on_peer(self, sock):
        threading.Thread(target=self._reader, args=(sock,), daemon=True).start()

    def _reader(self, sock):
        try:
            while True:
                body = recv_frame(sock)
                if body is None:
                    return
                self._inbox.put(body)
        except (OSError, TransportFailure):
            return

    def recv(self, timeout: float | None = None) -> bytes:
        try:
            return self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no frame received") from None


class _Client:
    def __init__(self, addr: str, retries: int = 50, backoff: float = 0.05):
        self.sock = connect(addr, retries, backoff)

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class Subscriber(_Client):
    def recv(self, timeout: float | None = None) -> bytes | None:
        self.sock.settimeout(timeout)
        try:
            return recv_frame(self.sock)
        except socket.timeout:
            raise TimeoutError("no frame received") from None


PullClient = Subscriber


class PushClient(_Client):
    def push(self, body: bytes) -> None:
        try:
            send_frame(self.sock, body)
        except OSError as exc:
            raise TransportFailure(f"push failed: {exc}") from exc
