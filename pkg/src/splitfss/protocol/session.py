"""Session configuration, run modes, seed derivation, and the
synchronization handshake."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import SyncMismatch
from ..nn.specs import NetworkSpec, TrainConfig
from ..ring import FixedConfig, encode
from ..wire import Kind, Phase

# Seed-derivation domains: every source of randomness in a session hangs
# off (seed, domain[, extras]) so public and private runs draw identical
# weights and data orders while dealer/share randomness stays disjoint.
DOMAIN_WEIGHTS = 1
DOMAIN_DATA = 2
DOMAIN_DEALER = 3
DOMAIN_CLIENT_SHARES = 4


class Mode(str, Enum):
    LOCAL_PUBLIC = "local-public"
    VANILLA_PUBLIC = "vanilla-public"
    USHAPED_PUBLIC = "ushaped-public"
    USHAPED_PRIVATE = "ushaped-private"

    @property
    def private(self) -> bool:
        return self is Mode.USHAPED_PRIVATE

    @property
    def n_servers(self) -> int:
        return {
            Mode.LOCAL_PUBLIC: 0,
            Mode.VANILLA_PUBLIC: 1,
            Mode.USHAPED_PUBLIC: 1,
            Mode.USHAPED_PRIVATE: 2,
        }[self]

    @property
    def ushaped(self) -> bool:
        return self in (Mode.USHAPED_PUBLIC, Mode.USHAPED_PRIVATE)


MODE_INDEX = {m: i for i, m in enumerate(Mode)}


def derive_rng(seed: int, domain: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, domain, *extra]))


@dataclass(frozen=True)
class SessionConfig:
    mode: Mode
    network: NetworkSpec
    train: TrainConfig
    fixed: FixedConfig = field(default_factory=FixedConfig)
    session_id: int = 1
    preprocess_chunk: int = 16

    @property
    def eta_enc(self) -> int:
        return encode(self.train.lr, self.fixed)

    def rng(self, domain: int, *extra: int) -> np.random.Generator:
        return derive_rng(self.train.seed, domain, *extra)

    def agreed_blob(self) -> bytes:
        """The byte string every role must agree on during synchronize."""
        return struct.pack(
            "<QIIQBBBBII",
            self.eta_enc,
            self.train.batch_size,
            self.train.epochs,
            self.train.seed & 0xFFFFFFFFFFFFFFFF,
            self.fixed.bit_width,
            self.fixed.frac_bits,
            self.fixed.lambda_bits // 8,
            MODE_INDEX[self.mode],
            self.network.fingerprint(),
            self.preprocess_chunk,
        )


_RUNTIME = struct.Struct("<IIII")  # train steps/epoch, n_test, test_batch, test steps


@dataclass(frozen=True)
class RunPlan:
    """Client-announced step counts every role derives its loops from."""

    train_steps: int
    n_test: int
    test_batch: int

    @property
    def test_steps(self) -> int:
        if self.n_test == 0:
            return 0
        return -(-self.n_test // self.test_batch)

    def test_batch_size(self, step: int) -> int:
        if step < self.n_test // self.test_batch:
            return self.test_batch
        return self.n_test - step * self.test_batch

    def pack(self) -> bytes:
        return _RUNTIME.pack(self.train_steps, self.n_test, self.test_batch, self.test_steps)

    @classmethod
    def unpack(cls, raw: bytes) -> "RunPlan":
        train_steps, n_test, test_batch, _ = _RUNTIME.unpack(raw)
        return cls(train_steps, n_test, test_batch)


def sync_request(channel, session: SessionConfig, plan: RunPlan):
    """Client side: one round-trip per peer; aborts on disagreement."""
    channel.set_context(session.session_id, 0, 0, Phase.SYNC)
    channel.post(Kind.SYNC_REQ, session.agreed_blob() + plan.pack())
    reply = channel.expect(Kind.SYNC_ACK)
    if reply.payload != session.agreed_blob():
        raise SyncMismatch(f"{channel.peer_role} disagrees with session configuration")


def sync_respond(channel, session: SessionConfig) -> RunPlan:
    """Server/dealer side of the handshake."""
    channel.set_context(session.session_id, 0, 0, Phase.SYNC)
    msg = channel.expect(Kind.SYNC_REQ)
    mine = session.agreed_blob()
    theirs = msg.payload[: len(mine)]
    channel.post(Kind.SYNC_ACK, mine)
    if theirs != mine:
        raise SyncMismatch(f"client configuration disagrees with {channel.local_role}")
    return RunPlan.unpack(msg.payload[len(mine):])
