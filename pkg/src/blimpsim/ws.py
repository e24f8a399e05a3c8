"""Minimal RFC 6455 WebSocket support over stdlib sockets (text frames only).

Just enough for the browser console channel: HTTP upgrade handshake, masked
client frames, ping/pong, clean close. No extensions, no fragmentation of
outgoing messages, no TLS. Both endpoints here are blocking and are meant to
be driven from dedicated reader/writer threads.
"""
from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
import threading

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WebSocketError(ConnectionError):
    pass


def _read_exact(sock: socket.socket, n: int) -> bytes:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise WebSocketError("connection closed mid-frame")
        buf += chunk
    return buf


def _read_http_head(sock: socket.socket) -> bytes:
    head = b""
    while b"\r\n\r\n" not in head:
        chunk = sock.recv(4096)
        if not chunk:
            raise WebSocketError("connection closed during handshake")
        head += chunk
        if len(head) > 65536:
            raise WebSocketError("oversized handshake")
    return head


def accept_handshake(sock: socket.socket) -> str:
    """Server side of the upgrade; returns the request path."""
    head = _read_http_head(sock)
    request, _, _ = head.partition(b"\r\n\r\n")
    lines = request.decode("latin-1").split("\r\n")
    try:
        _, path, _ = lines[0].split(" ", 2)
    except ValueError:
        raise WebSocketError(f"malformed request line: {lines[0]!r}") from None
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, value = line.split(":", 1)
            headers[name.strip().lower()] = value.strip()
    key = headers.get("sec-websocket-key")
    if key is None or "websocket" not in headers.get("upgrade", "").lower():
        sock.sendall(b"HTTP/1.1 400 Bad Request\r\nConnection: close\r\n\r\n")
        raise WebSocketError("not a websocket upgrade request")
    accept = base64.b64encode(hashlib.sha1((key + WS_GUID).encode()).digest()).decode()
    sock.sendall(
        (
            "HTTP/1.1 101 Switching Protocols\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Accept: {accept}\r\n\r\n"
        ).encode()
    )
    return path


def client_handshake(sock: socket.socket, host: str, port: int, path: str = "/") -> None:
    key = base64.b64encode(os.urandom(16)).decode()
    sock.sendall(
        (
            f"GET {path} HTTP/1.1\r\n"
            f"Host: {host}:{port}\r\n"
            "Upgrade: websocket\r\n"
            "Connection: Upgrade\r\n"
            f"Sec-WebSocket-Key: {key}\r\n"
            "Sec-WebSocket-Version: 13\r\n\r\n"
        ).encode()
    )
    head = _read_http_head(sock)
    status = head.split(b"\r\n", 1)[0]
    if b"101" not in status:
        raise WebSocketError(f"upgrade refused: {status!r}")
    expect = base64.b64encode(hashlib.sha1((key + WS_GUID).encode()).digest())
    if expect not in head:
        raise WebSocketError("bad Sec-WebSocket-Accept")


class WSConn:
    """One established WebSocket. recv_text() returns None once closed."""

    def __init__(self, sock: socket.socket, *, mask_outgoing: bool) -> None:
        self.sock = sock
        self.mask_outgoing = mask_outgoing
        self._closed = False
        self._send_lock = threading.Lock()  # pongs may race app sends

    def _send_frame(self, opcode: int, payload: bytes) -> None:
        head = bytes([0x80 | opcode])
        n = len(payload)
        mask_bit = 0x80 if self.mask_outgoing else 0
        if n < 126:
            head += bytes([mask_bit | n])
        elif n < 1 << 16:
            head += bytes([mask_bit | 126]) + struct.pack(">H", n)
        else:
            head += bytes([mask_bit | 127]) + struct.pack(">Q", n)
        if self.mask_outgoing:
            mask = os.urandom(4)
            payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            head += mask
        with self._send_lock:
            self.sock.sendall(head + payload)

    def send_text(self, text: str) -> None:
        self._send_frame(OP_TEXT, text.encode())

    def recv_text(self) -> str | None:
        """Next text message; answers pings; None when the peer closes."""
        fragments: list[bytes] = []
        while True:
            b0, b1 = _read_exact(self.sock, 2)
            fin, opcode = b0 & 0x80, b0 & 0x0F
            masked, length = b1 & 0x80, b1 & 0x7F
            if length == 126:
                (length,) = struct.unpack(">H", _read_exact(self.sock, 2))
            elif length == 127:
                (length,) = struct.unpack(">Q", _read_exact(self.sock, 8))
            mask = _read_exact(self.sock, 4) if masked else None
            payload = _read_exact(self.sock, length)
            if mask:
                payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            if opcode == OP_CLOSE:
                self.close()
                return None
            if opcode == OP_PING:
                self._send_frame(OP_PONG, payload)
                continue
            if opcode == OP_PONG:
                continue
            if opcode in (OP_TEXT, OP_BINARY, OP_CONT):
                fragments.append(payload)
                if fin:
                    return b"".join(fragments).decode()
                continue
            raise WebSocketError(f"unsupported opcode {opcode:#x}")

    def close(self) -> None:
        if not self._closed:
            self._closed = True
            try:
                self._send_frame(OP_CLOSE, b"")
            except OSError:
                pass
            try:
                self.sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self.sock.close()


def connect(host: str, port: int, path: str = "/", timeout: float = 5.0) -> WSConn:
    """Client connection helper (used by tests and tooling)."""
    sock = socket.create_connection((host, port), timeout=timeout)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    client_handshake(sock, host, port, path)
    sock.settimeout(None)
    return WSConn(sock, mask_outgoing=True)
