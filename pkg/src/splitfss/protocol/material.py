"""Preprocessed correlated randomness: what the dealer makes per batch
step and how the other roles consume it.

Generation and parsing live side by side because they must walk the
server segment in exactly the same order:

    mask (client gets alpha, servers get additive shares), then per
    server layer: fc -> forward triple [+ two backward triples when
    training]; relu -> comparison keys + select triple [+ backward
    select triple when training].

The dealer streams material in chunks of `preprocess_chunk` steps and
waits for a CREDIT from every consumer before the next chunk, which
bounds everyone's buffering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..beaver import gen_mat_triple, gen_triple, triple_from_bytes
from ..fss import ComparisonKey, KeyBundle, keygen_comparison
from ..ring import FixedConfig
from ..sharing import random_ring, split
from ..wire import Kind, Phase, ProtocolMessage, decode_tensor, encode_tensor


@dataclass
class ServerLayerPlan:
    index: int
    kind: str  # "fc" | "relu"
    in_dim: int = 0
    out_dim: int = 0
    width: int = 0  # relu fan-out per sample


def server_plan(network) -> list:
    """Ordered description of the server segment's secure operations."""
    plan = []
    shapes = network.shapes()
    for idx in network.indices("server"):
        layer = network.layers[idx]
        if layer.kind == "fc":
            plan.append(ServerLayerPlan(idx, "fc", in_dim=layer.in_dim, out_dim=layer.out_dim))
        elif layer.kind == "relu":
            width = shapes[idx]
            width = int(np.prod(width)) if isinstance(width, tuple) else int(width)
            plan.append(ServerLayerPlan(idx, "relu", width=width))
        else:
            raise ValueError(f"layer kind {layer.kind} cannot run on the servers")
    return plan


@dataclass
class StepMaterial:
    """One step's dealt randomness as held by one server."""

    mask_share: np.ndarray | None = None
    fc: dict = field(default_factory=dict)  # idx -> [fwd, gx, gw] MatTriples
    relu: dict = field(default_factory=dict)  # idx -> dict(keys, select, backward)


def _msg(session, epoch, batch, kind, payload) -> ProtocolMessage:
    return ProtocolMessage(session, epoch, batch, Phase.PREPROCESSING, kind, payload)


def dealer_build_step(
    session_id: int,
    epoch: int,
    batch_idx: int,
    batch_size: int,
    cut_dim: int,
    plan: list,
    cfg: FixedConfig,
    rng: np.random.Generator,
    training: bool,
):
    """Generate one step's material; returns (client_msgs, p0_msgs, p1_msgs)."""
    eb = cfg.elem_bytes
    alpha = random_ring(rng, (batch_size, cut_dim), cfg)
    a0, a1 = split(alpha, cfg, rng)
    client_msgs = [_msg(session_id, epoch, batch_idx, Kind.MASK, encode_tensor(alpha, eb))]
    p_msgs = (
        [_msg(session_id, epoch, batch_idx, Kind.MASK_SHARE, encode_tensor(a0.data, eb))],
        [_msg(session_id, epoch, batch_idx, Kind.MASK_SHARE, encode_tensor(a1.data, eb))],
    )

    def send_triple_pair(pair):
        for party, msgs in enumerate(p_msgs):
            msgs.append(_msg(session_id, epoch, batch_idx, Kind.TRIPLES, pair[party].to_bytes()))

    for entry in plan:
        if entry.kind == "fc":
            send_triple_pair(gen_mat_triple(batch_size, entry.in_dim, entry.out_dim, cfg, rng))
            if training:
                send_triple_pair(gen_mat_triple(batch_size, entry.out_dim, entry.in_dim, cfg, rng))
                send_triple_pair(gen_mat_triple(entry.in_dim, batch_size, entry.out_dim, cfg, rng))
        else:
            count = batch_size * entry.width
            _, k0, k1 = keygen_comparison(cfg, rng, count=count)
            for party, key in enumerate((k0, k1)):
                p_msgs[party].append(
                    _msg(session_id, epoch, batch_idx, Kind.KEYS, key.to_bytes())
                )
            send_triple_pair(gen_triple(cfg, rng, shape=(count,)))
            if training:
                send_triple_pair(gen_triple(cfg, rng, shape=(count,)))
    return client_msgs, p_msgs[0], p_msgs[1]


def server_recv_step(channel, plan: list, cfg: FixedConfig, training: bool) -> StepMaterial:
    """Consume one step's preprocessing messages in dealer order."""
    out = StepMaterial()
    msg = channel.recv()
    assert msg.kind == Kind.MASK_SHARE, f"expected mask share, got kind {msg.kind}"
    out.mask_share, _ = decode_tensor(msg.payload)

    def next_triple():
        m = channel.recv()
        assert m.kind == Kind.TRIPLES, f"expected triple, got kind {m.kind}"
        return triple_from_bytes(m.payload, cfg)

    for entry in plan:
        if entry.kind == "fc":
            triples = [next_triple()]
            if training:
                triples.append(next_triple())
                triples.append(next_triple())
            out.fc[entry.index] = triples
        else:
            m = channel.recv()
            assert m.kind == Kind.KEYS, f"expected keys, got kind {m.kind}"
            bundle = KeyBundle(ComparisonKey.from_bytes(m.payload))
            relu = {"keys": bundle, "select": next_triple()}
            if training:
                relu["backward"] = next_triple()
            out.relu[entry.index] = relu
    return out


def client_recv_mask(channel) -> np.ndarray:
    msg = channel.recv()
    assert msg.kind == Kind.MASK, f"expected mask, got kind {msg.kind}"
    mask, _ = decode_tensor(msg.payload)
    return mask


class MaterialFeed:
    """Consumer-side pacing: pulls one step at a time and credits the
    dealer at chunk boundaries so it may stream the next chunk."""

    def __init__(self, channel, total_steps: int, chunk: int, parser):
        self.channel = channel
        self.total = total_steps
        self.chunk = max(1, chunk)
        self.parser = parser
        self.consumed = 0

    def next_step(self):
        if self.consumed >= self.total:
            raise RuntimeError("material feed exhausted")
        if self.consumed and self.consumed % self.chunk == 0:
            session = self.channel.message_context()[0]
            self.channel.send(
                ProtocolMessage(session, 0, 0, Phase.PREPROCESSING, Kind.CREDIT, b"")
            )
        item = self.parser(self.channel)
        self.consumed += 1
        return item
