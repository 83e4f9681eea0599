"""Dealer-generated multiplication triples and the two-message secure
multiplication / matmul protocol used for the server-side FC layers.

A triple shares (a, b, c=a*b); multiplying shared x, y costs one
symmetric exchange of the masked openings d = x - a and e = y - b, after
which z_j = c_j + d*b_j + a_j*e (+ d*e added by party 0 only)
reconstructs to x*y exactly, before any fixed-point truncation.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigMismatch, ShapeMismatch, TripleExhausted
from .ring import FixedConfig, _mask, ring_matmul
from .sharing import Share, random_ring
from .wire import Kind, ProtocolMessage, decode_tensor, encode_tensor


@dataclass
class BeaverTriple:
    """Elementwise triple: a, b, c arrays of one shape with c = a (*) b."""

    party: int
    cfg: FixedConfig
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    consumed: bool = field(default=False)

    @property
    def shape(self):
        return self.a.shape

    def mark_used(self):
        if self.consumed:
            raise TripleExhausted("beaver triple already consumed")
        self.consumed = True

    def to_bytes(self) -> bytes:
        eb = self.cfg.elem_bytes
        head = struct.pack("<BBB", 0, self.party, self.cfg.bit_width)
        return head + encode_tensor(self.a, eb) + encode_tensor(self.b, eb) + encode_tensor(self.c, eb)


@dataclass
class MatTriple:
    """Matrix triple: A [m,k], B [k,p], C = A @ B mod 2^n."""

    party: int
    cfg: FixedConfig
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    consumed: bool = field(default=False)

    def mark_used(self):
        if self.consumed:
            raise TripleExhausted("matrix triple already consumed")
        self.consumed = True

    def to_bytes(self) -> bytes:
        eb = self.cfg.elem_bytes
        head = struct.pack("<BBB", 1, self.party, self.cfg.bit_width)
        return head + encode_tensor(self.a, eb) + encode_tensor(self.b, eb) + encode_tensor(self.c, eb)


def triple_from_bytes(raw: bytes, cfg: FixedConfig):
    tkind, party, bit_width = struct.unpack_from("<BBB", raw, 0)
    if bit_width != cfg.bit_width:
        raise ConfigMismatch(f"triple width {bit_width} != session {cfg.bit_width}")
    a, off = decode_tensor(raw, 3)
    b, off = decode_tensor(raw, off)
    c, _ = decode_tensor(raw, off)
    cls = BeaverTriple if tkind == 0 else MatTriple
    return cls(party, cfg, a, b, c)


def gen_triple(
    cfg: FixedConfig, rng: np.random.Generator, shape=()
) -> tuple[BeaverTriple, BeaverTriple]:
    """Elementwise triple shares for both parties; a, b uniform, c exact."""
    shape = tuple(shape) if shape else (1,)
    a = random_ring(rng, shape, cfg)
    b = random_ring(rng, shape, cfg)
    c = _mask(a * b, cfg)
    a0 = random_ring(rng, shape, cfg)
    b0 = random_ring(rng, shape, cfg)
    c0 = random_ring(rng, shape, cfg)
    t0 = BeaverTriple(0, cfg, a0, b0, c0)
    t1 = BeaverTriple(1, cfg, _mask(a - a0, cfg), _mask(b - b0, cfg), _mask(c - c0, cfg))
    return t0, t1


def gen_mat_triple(
    m: int, k: int, p: int, cfg: FixedConfig, rng: np.random.Generator
) -> tuple[MatTriple, MatTriple]:
    a = random_ring(rng, (m, k), cfg)
    b = random_ring(rng, (k, p), cfg)
    c = _mask(a @ b, cfg)
    a0 = random_ring(rng, (m, k), cfg)
    b0 = random_ring(rng, (k, p), cfg)
    c0 = random_ring(rng, (m, p), cfg)
    t0 = MatTriple(0, cfg, a0, b0, c0)
    t1 = MatTriple(1, cfg, _mask(a - a0, cfg), _mask(b - b0, cfg), _mask(c - c0, cfg))
    return t0, t1


def _context(channel):
    """(session, epoch, batch, phase) the openings are tagged with."""
    get = getattr(channel, "message_context", None)
    return get() if get else (0, 0, 0, 2)


def _open_pair(x_masked: np.ndarray, y_masked: np.ndarray, cfg, channel):
    eb = cfg.elem_bytes
    payload = encode_tensor(x_masked, eb) + encode_tensor(y_masked, eb)
    session, epoch, batch, phase = _context(channel)
    peer = channel.exchange(ProtocolMessage(session, epoch, batch, phase, Kind.OPENING, payload))
    if peer.kind != Kind.OPENING:
        raise ShapeMismatch(f"expected opening, got kind {peer.kind}")
    d_peer, off = decode_tensor(peer.payload)
    e_peer, _ = decode_tensor(peer.payload, off)
    return d_peer, e_peer


def secure_mul(x: Share, y: Share, triple: BeaverTriple, channel) -> Share:
    """Elementwise product of shared tensors; exact mod 2^n."""
    if x.cfg != y.cfg or x.cfg != triple.cfg:
        raise ConfigMismatch("mixed configs in secure_mul")
    if x.shape != y.shape or triple.shape != x.shape:
        raise ShapeMismatch(f"x {x.shape}, y {y.shape}, triple {triple.shape}")
    if x.party != triple.party or y.party != x.party:
        raise ConfigMismatch("share/triple party mismatch")
    triple.mark_used()
    cfg = x.cfg
    d_mine = _mask(x.data - triple.a, cfg)
    e_mine = _mask(y.data - triple.b, cfg)
    d_peer, e_peer = _open_pair(d_mine, e_mine, cfg, channel)
    d = _mask(d_mine + d_peer, cfg)
    e = _mask(e_mine + e_peer, cfg)
    z = _mask(triple.c + d * triple.b + triple.a * e, cfg)
    if x.party == 0:
        z = _mask(z + d * e, cfg)
    return Share(x.party, z, cfg)


def secure_matmul(x: Share, w: Share, triple: MatTriple, channel) -> Share:
    """Matrix product of shared tensors via one masked-opening round.

    Transmits exactly m*k + k*p ring elements per party plus framing.
    """
    if x.cfg != w.cfg or x.cfg != triple.cfg:
        raise ConfigMismatch("mixed configs in secure_matmul")
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"matmul {x.shape} @ {w.shape}")
    if triple.a.shape != x.shape or triple.b.shape != w.shape:
        raise ShapeMismatch(
            f"triple {triple.a.shape}x{triple.b.shape} does not fit {x.shape}@{w.shape}"
        )
    if x.party != triple.party or w.party != x.party:
        raise ConfigMismatch("share/triple party mismatch")
    triple.mark_used()
    cfg = x.cfg
    d_mine = _mask(x.data - triple.a, cfg)
    e_mine = _mask(w.data - triple.b, cfg)
    d_peer, e_peer = _open_pair(d_mine, e_mine, cfg, channel)
    d = _mask(d_mine + d_peer, cfg)
    e = _mask(e_mine + e_peer, cfg)
    z = _mask(
        triple.c + ring_matmul(d, triple.b, cfg) + ring_matmul(triple.a, e, cfg), cfg
    )
    if x.party == 0:
        z = _mask(z + ring_matmul(d, e, cfg), cfg)
    return Share(x.party, z, cfg)
