"""Deterministic length-doubling seed expansion for the comparison-gate trees.

Expansion is Matyas-Meyer-Oseas over AES-128 with a fixed public key:
PRG(s) block t = AES_K(s XOR tweak_t) XOR (s XOR tweak_t).  Keyed only by
the seed, byte-stable across platforms, and batchable: expanding R seeds
costs one ECB call over 4R blocks.

Layout of the 4 output blocks per seed:
  block 0 -> left child seed (16 bytes)
  block 1 -> right child seed (16 bytes)
  block 2 -> left value word (bytes 0..7, LE) | right value word (bytes 8..15)
  block 3 -> byte 0 bit 0: left control bit, bit 1: right control bit
"""

from __future__ import annotations

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

SEED_BYTES = 16

# First 16 bytes of the hex expansion of pi; fixed and public.
_AES_KEY = bytes.fromhex("243f6a8885a308d313198a2e03707344")

_TWEAKS = np.zeros((4, SEED_BYTES), dtype=np.uint8)
for _t in range(4):
    _TWEAKS[_t, 0] = _t
    _TWEAKS[_t, 8] = 0xA5 ^ _t


def _aes_ecb(buf: bytes) -> bytes:
    enc = Cipher(algorithms.AES(_AES_KEY), modes.ECB()).encryptor()
    return enc.update(buf) + enc.finalize()


def expand(seeds: np.ndarray):
    """Expand seeds [R, 16] u8 -> (sL, sR, vL, vR, tL, tR).

    sL/sR: [R, 16] u8; vL/vR: [R] u64 little-endian; tL/tR: [R] u8 in {0,1}.
    """
    seeds = np.ascontiguousarray(seeds, dtype=np.uint8)
    r = seeds.shape[0]
    blocks = seeds[:, None, :] ^ _TWEAKS[None, :, :]  # [R, 4, 16]
    flat = np.ascontiguousarray(blocks).reshape(-1)
    out = np.frombuffer(_aes_ecb(flat.tobytes()), dtype=np.uint8).reshape(r, 4, 16)
    out = out ^ blocks  # MMO feed-forward
    s_l = out[:, 0, :]
    s_r = out[:, 1, :]
    v = np.ascontiguousarray(out[:, 2, :]).view("<u8")
    v_l = v[:, 0].copy()
    v_r = v[:, 1].copy()
    t_l = out[:, 3, 0] & np.uint8(1)
    t_r = (out[:, 3, 0] >> np.uint8(1)) & np.uint8(1)
    return np.ascontiguousarray(s_l), np.ascontiguousarray(s_r), v_l, v_r, t_l, t_r


def convert(seeds: np.ndarray, mask: int) -> np.ndarray:
    """Map seeds [R, 16] to ring elements: low 8 bytes LE, reduced mod 2^n."""
    v = np.ascontiguousarray(seeds[:, :8]).view("<u8")[:, 0].copy()
    if mask != (1 << 64) - 1:
        v &= np.uint64(mask)
    return v


def random_seeds(rng: np.random.Generator, count: int) -> np.ndarray:
    return rng.integers(0, 256, size=(count, SEED_BYTES), dtype=np.uint8)
