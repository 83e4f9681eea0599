"""Two-party additive secret sharing over Z_{2^n}.

A secret x splits into (r, x - r) with r uniform; either share alone is
marginally uniform and carries nothing about x.  Linear operations are
local; public constants are applied by party 0 only so reconstruction
never double-counts them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigMismatch, PartyMismatch, ShapeMismatch
from .ring import FixedConfig, _mask


def random_ring(rng: np.random.Generator, shape, cfg: FixedConfig) -> np.ndarray:
    """Uniform ring elements as a uint64 array."""
    raw = rng.integers(0, 1 << 64, size=shape, dtype=np.uint64, endpoint=False)
    return _mask(raw, cfg)


@dataclass
class Share:
    """One party's additive share of a ring element or tensor."""

    party: int
    data: np.ndarray
    cfg: FixedConfig

    def __post_init__(self):
        if self.party not in (0, 1):
            raise PartyMismatch(f"party must be 0 or 1, got {self.party}")
        self.data = np.asarray(self.data, dtype=np.uint64)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def reshape(self, *shape) -> "Share":
        return Share(self.party, self.data.reshape(*shape), self.cfg)

    def copy(self) -> "Share":
        return Share(self.party, self.data.copy(), self.cfg)


def split(x, cfg: FixedConfig, rng: np.random.Generator) -> tuple[Share, Share]:
    """Split a ring value (scalar or array) into two uniform shares."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.uint64))
    r = random_ring(rng, arr.shape, cfg)
    return Share(0, r, cfg), Share(1, _mask(arr - r, cfg), cfg)


def _pair_check(s0: Share, s1: Share):
    if s0.party != 0 or s1.party != 1:
        raise PartyMismatch(f"expected parties (0, 1), got ({s0.party}, {s1.party})")
    if s0.cfg != s1.cfg:
        raise ConfigMismatch("shares from different configs")
    if s0.shape != s1.shape:
        raise ShapeMismatch(f"{s0.shape} vs {s1.shape}")


def reconstruct(s0: Share, s1: Share) -> np.ndarray:
    _pair_check(s0, s1)
    return _mask(s0.data + s1.data, s0.cfg)


def share_add(a: Share, b: Share) -> Share:
    if a.party != b.party:
        raise PartyMismatch("share_add needs shares held by the same party")
    if a.cfg != b.cfg:
        raise ConfigMismatch("shares from different configs")
    return Share(a.party, _mask(a.data + b.data, a.cfg), a.cfg)


def share_sub(a: Share, b: Share) -> Share:
    if a.party != b.party:
        raise PartyMismatch("share_sub needs shares held by the same party")
    if a.cfg != b.cfg:
        raise ConfigMismatch("shares from different configs")
    return Share(a.party, _mask(a.data - b.data, a.cfg), a.cfg)


def share_neg(a: Share) -> Share:
    return Share(a.party, _mask(np.uint64(0) - a.data, a.cfg), a.cfg)


def share_add_public(a: Share, c) -> Share:
    """Add a public constant; only party 0 applies it."""
    if a.party != 0:
        return a.copy()
    c = np.asarray(c, dtype=np.uint64)
    return Share(0, _mask(a.data + c, a.cfg), a.cfg)


def share_mul_public(a: Share, c) -> Share:
    """Multiply by a public constant (both parties, linear in the share)."""
    c = np.asarray(c, dtype=np.uint64)
    return Share(a.party, _mask(a.data * c, a.cfg), a.cfg)
