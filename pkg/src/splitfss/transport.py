"""Channels between roles: in-process queues or framed TCP, with byte counters.

Both backends share the same semantics: send enqueues a complete frame
and never blocks the protocol thread; recv blocks until a whole frame is
available (subject to a timeout).  Frames are all-or-nothing and FIFO
per channel.  Every frame's exact byte length is counted against
(peer, direction, phase), where the phase tag is taken from the message
header, so preprocessing traffic never mixes with training traffic.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
from collections import defaultdict
from dataclasses import dataclass, field

from .errors import ChannelClosed, FrameCorrupt, Timeout
from .wire import HEADER_BYTES, PHASE_NAMES, ProtocolMessage, parse_header

DEFAULT_TIMEOUT = 30.0


class PhaseCounters:
    """Bytes sent/received per (peer role, phase name)."""

    def __init__(self, role: str):
        self.role = role
        self.sent = defaultdict(int)
        self.received = defaultdict(int)
        self._lock = threading.Lock()

    def add_sent(self, peer: str, phase: str, nbytes: int):
        with self._lock:
            self.sent[(peer, phase)] += nbytes

    def add_received(self, peer: str, phase: str, nbytes: int):
        with self._lock:
            self.received[(peer, phase)] += nbytes

    def sent_total(self, phases=None, peer=None) -> int:
        return self._total(self.sent, phases, peer)

    def received_total(self, phases=None, peer=None) -> int:
        return self._total(self.received, phases, peer)

    @staticmethod
    def _total(table, phases, peer) -> int:
        total = 0
        for (p, phase), n in table.items():
            if phases is not None and phase not in phases:
                continue
            if peer is not None and p != peer:
                continue
            total += n
        return total

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "sent": {f"{p}/{ph}": n for (p, ph), n in sorted(self.sent.items())},
                "received": {f"{p}/{ph}": n for (p, ph), n in sorted(self.received.items())},
            }


@dataclass
class WiretapEntry:
    direction: str  # "sent" | "received"
    message: ProtocolMessage
    frame_bytes: int


class Channel:
    """One endpoint of a point-to-point channel.

    Channels carry a (session, epoch, batch, phase) context that stamps
    outgoing messages built with post()/expect(); sub-protocols such as
    Beaver openings inherit it.
    """

    def __init__(self, local_role: str, peer_role: str, counters: PhaseCounters):
        self.local_role = local_role
        self.peer_role = peer_role
        self.counters = counters
        self.wiretap: list[WiretapEntry] | None = None
        self.timeout = DEFAULT_TIMEOUT
        self._context = (0, 0, 0, 0)

    def set_context(self, session: int, epoch: int, batch: int, phase: int):
        self._context = (session, epoch, batch, int(phase))

    def message_context(self) -> tuple[int, int, int, int]:
        return self._context

    def post(self, kind: int, payload: bytes = b""):
        session, epoch, batch, phase = self._context
        self.send(ProtocolMessage(session, epoch, batch, phase, int(kind), payload))

    def expect(self, kind: int) -> ProtocolMessage:
        from .errors import ProtocolOrderError

        msg = self.recv()
        session, epoch, batch, phase = self._context
        if (msg.kind, msg.epoch, msg.batch, msg.phase) != (int(kind), epoch, batch, phase):
            raise ProtocolOrderError(
                f"{self.local_role}<-{self.peer_role}: expected kind={int(kind)} "
                f"epoch={epoch} batch={batch} phase={phase}, got kind={msg.kind} "
                f"epoch={msg.epoch} batch={msg.batch} phase={msg.phase}"
            )
        return msg

    def enable_wiretap(self):
        self.wiretap = []

    def send(self, msg: ProtocolMessage):
        frame = msg.pack()
        self._send_frame(frame)
        phase = PHASE_NAMES[msg.phase]
        self.counters.add_sent(self.peer_role, phase, len(frame))
        if self.wiretap is not None:
            self.wiretap.append(WiretapEntry("sent", msg, len(frame)))

    def recv(self) -> ProtocolMessage:
        header = self._recv_exact(HEADER_BYTES)
        session, epoch, batch, phase, kind, length = parse_header(header)
        payload = self._recv_exact(length) if length else b""
        msg = ProtocolMessage(session, epoch, batch, phase, kind, payload)
        self.counters.add_received(self.peer_role, PHASE_NAMES[phase], HEADER_BYTES + length)
        if self.wiretap is not None:
            self.wiretap.append(WiretapEntry("received", msg, HEADER_BYTES + length))
        return msg

    def exchange(self, msg: ProtocolMessage) -> ProtocolMessage:
        """Symmetric one-round exchange: send ours, then receive the peer's."""
        self.send(msg)
        return self.recv()

    def _send_frame(self, frame: bytes):
        raise NotImplementedError

    def _recv_exact(self, n: int) -> bytes:
        raise NotImplementedError

    def close(self):
        pass


class InProcessChannel(Channel):
    """Deterministic queue-backed channel for single-process sessions."""

    def __init__(self, local_role, peer_role, counters, inbox: queue.Queue, outbox: queue.Queue):
        super().__init__(local_role, peer_role, counters)
        self._inbox = inbox
        self._outbox = outbox
        self._buffer = b""
        self._closed = False

    def _send_frame(self, frame: bytes):
        if self._closed:
            raise ChannelClosed(f"{self.local_role}->{self.peer_role} closed")
        self._outbox.put(frame)

    def _recv_exact(self, n: int) -> bytes:
        while len(self._buffer) < n:
            try:
                chunk = self._inbox.get(timeout=self.timeout)
            except queue.Empty:
                raise Timeout(f"{self.local_role}<-{self.peer_role} recv timed out") from None
            if chunk is None:
                raise ChannelClosed(f"{self.peer_role} closed the channel")
            self._buffer += chunk
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        return out

    def close(self):
        if not self._closed:
            self._closed = True
            self._outbox.put(None)


def make_channel_pair(
    role_a: str, role_b: str, counters_a: PhaseCounters, counters_b: PhaseCounters
) -> tuple[InProcessChannel, InProcessChannel]:
    q_ab: queue.Queue = queue.Queue()
    q_ba: queue.Queue = queue.Queue()
    a = InProcessChannel(role_a, role_b, counters_a, inbox=q_ba, outbox=q_ab)
    b = InProcessChannel(role_b, role_a, counters_b, inbox=q_ab, outbox=q_ba)
    return a, b


class TcpChannel(Channel):
    """Framed TCP channel; sends go through a writer thread so a
    symmetric exchange can never deadlock on full socket buffers."""

    def __init__(self, local_role, peer_role, counters, sock: socket.socket):
        super().__init__(local_role, peer_role, counters)
        self._sock = sock
        self._sock.settimeout(self.timeout)
        self._sendq: queue.Queue = queue.Queue()
        self._send_error: Exception | None = None
        self._writer = threading.Thread(target=self._writer_loop, daemon=True)
        self._writer.start()

    def _writer_loop(self):
        while True:
            frame = self._sendq.get()
            if frame is None:
                try:
                    self._sock.shutdown(socket.SHUT_WR)
                except OSError:
                    pass
                return
            try:
                self._sock.sendall(frame)
            except OSError as exc:
                self._send_error = exc
                return

    def _send_frame(self, frame: bytes):
        if self._send_error is not None:
            raise ChannelClosed(str(self._send_error))
        self._sendq.put(frame)

    def _recv_exact(self, n: int) -> bytes:
        parts = []
        remaining = n
        while remaining:
            try:
                chunk = self._sock.recv(min(remaining, 1 << 20))
            except socket.timeout:
                raise Timeout(f"{self.local_role}<-{self.peer_role} recv timed out") from None
            if not chunk:
                raise ChannelClosed(f"{self.peer_role} closed the connection")
            parts.append(chunk)
            remaining -= len(chunk)
        return b"".join(parts)

    def close(self):
        self._sendq.put(None)
        self._writer.join(timeout=5)
        try:
            self._sock.close()
        except OSError:
            pass


_HELLO = struct.Struct("<16s")


def tcp_listen(host: str, port: int, backlog: int = 8) -> socket.socket:
    srv = socket.create_server((host, port), backlog=backlog, reuse_port=False)
    return srv


def tcp_accept(srv: socket.socket, local_role: str, counters, timeout=DEFAULT_TIMEOUT) -> TcpChannel:
    """Accept one connection; the connector announces its role first."""
    srv.settimeout(timeout)
    try:
        sock, _ = srv.accept()
    except socket.timeout:
        raise Timeout(f"{local_role} accept timed out") from None
    sock.settimeout(timeout)
    raw = b""
    while len(raw) < _HELLO.size:
        chunk = sock.recv(_HELLO.size - len(raw))
        if not chunk:
            raise ChannelClosed("peer vanished during hello")
        raw += chunk
    peer_role = _HELLO.unpack(raw)[0].rstrip(b"\x00").decode()
    return TcpChannel(local_role, peer_role, counters, sock)


def tcp_connect(
    host: str, port: int, local_role: str, peer_role: str, counters,
    timeout=DEFAULT_TIMEOUT, retries: int = 50, retry_delay: float = 0.1,
) -> TcpChannel:
    import time

    last = None
    for _ in range(retries):
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
            break
        except OSError as exc:
            last = exc
            time.sleep(retry_delay)
    else:
        raise ChannelClosed(f"cannot reach {peer_role} at {host}:{port}: {last}")
    sock.sendall(_HELLO.pack(local_role.encode()))
    return TcpChannel(local_role, peer_role, counters, sock)
