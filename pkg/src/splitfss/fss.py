"""Function secret sharing for the masked sign test behind secure ReLU.

KeyGen hides a uniform mask alpha; two servers evaluating their keys on
the public masked input x_pub = x + alpha obtain additive shares of
[signed(x_pub - alpha) >= 0], i.e. the sign bit of x, with signed(0)
counting as non-negative.

Construction: the sign test reduces to one strict comparison of the low
n-1 bits.  With m = msb(x_pub), s = msb(alpha), w = [low(x_pub) <
low(alpha)], the sign bit is 1 - (m XOR s XOR w).  A GGM-style
comparison tree over the n-1 low bits yields additive shares of
(2s-1) * w; the keys additionally carry an additive sharing of 1 - s so
each party can finish the affine combination locally for either value
of the public bit m.

The comparison tree expands a lambda-bit seed per node into two child
seeds, two value words and two control bits (prg.expand); per-level
correction words (seed, value, two control bits) make the two parties'
states diverge exactly on the path determined by the hidden threshold.

Key serialization (little-endian, eb = bit_width/8 bytes per ring
element, L = bit_width - 1 levels):

    party u8 | bit_width u8 | frac_bits u8 | count u32
    then per key:
      alpha_share  eb
      branch_share eb
      root_seed    16
      L x (seed_cw 16 | value_cw eb | tbits u8: bit0=left, bit1=right)
      leaf_cw      eb
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import prg
from .beaver import BeaverTriple, secure_mul
from .errors import KeyExhausted
from .ring import FixedConfig, _mask
from .sharing import Share, random_ring, split


def _neg_where(cond: np.ndarray, val: np.ndarray, cfg: FixedConfig) -> np.ndarray:
    """val where cond==0, ring negation of val where cond==1."""
    return np.where(cond.astype(bool), _mask(np.uint64(0) - val, cfg), val)


@dataclass
class ComparisonKey:
    """One server's key material for a batch of sign-test gates.

    Arrays are stacked over `count` independent gates so a whole
    activation tensor evaluates in one vectorized pass.
    """

    party: int
    cfg: FixedConfig
    alpha_share: np.ndarray  # [K] u64
    branch_share: np.ndarray  # [K] u64, additive share of 1 - msb(alpha)
    root_seed: np.ndarray  # [K, 16] u8
    seed_cw: np.ndarray  # [K, L, 16] u8
    value_cw: np.ndarray  # [K, L] u64
    tcw_left: np.ndarray  # [K, L] u8
    tcw_right: np.ndarray  # [K, L] u8
    leaf_cw: np.ndarray  # [K] u64

    @property
    def count(self) -> int:
        return self.alpha_share.shape[0]

    @property
    def levels(self) -> int:
        return self.cfg.bit_width - 1

    def key_bytes(self) -> int:
        """Serialized size: header + count * per-key record."""
        eb = self.cfg.elem_bytes
        per = 2 * eb + 16 + self.levels * (16 + eb + 1) + eb
        return 7 + self.count * per

    def to_bytes(self) -> bytes:
        eb = self.cfg.elem_bytes
        k, levels = self.count, self.levels
        out = bytearray(struct.pack("<BBBI", self.party, self.cfg.bit_width, self.cfg.frac_bits, k))
        elem = lambda a: a.astype("<u8").view(np.uint8).reshape(-1, 8)[:, :eb]
        tbits = (self.tcw_left | (self.tcw_right << np.uint8(1))).astype(np.uint8)
        for i in range(k):
            out += elem(self.alpha_share[i : i + 1]).tobytes()
            out += elem(self.branch_share[i : i + 1]).tobytes()
            out += self.root_seed[i].tobytes()
            for lv in range(levels):
                out += self.seed_cw[i, lv].tobytes()
                out += elem(self.value_cw[i, lv : lv + 1]).tobytes()
                out += bytes([tbits[i, lv]])
            out += elem(self.leaf_cw[i : i + 1]).tobytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ComparisonKey":
        party, bit_width, frac_bits, k = struct.unpack_from("<BBBI", raw, 0)
        cfg = FixedConfig(bit_width=bit_width, frac_bits=frac_bits)
        eb = cfg.elem_bytes
        levels = bit_width - 1
        pos = 7

        def elem():
            nonlocal pos
            buf = raw[pos : pos + eb] + b"\x00" * (8 - eb)
            pos += eb
            return np.frombuffer(buf, dtype="<u8")[0]

        alpha = np.zeros(k, dtype=np.uint64)
        branch = np.zeros(k, dtype=np.uint64)
        root = np.zeros((k, 16), dtype=np.uint8)
        scw = np.zeros((k, levels, 16), dtype=np.uint8)
        vcw = np.zeros((k, levels), dtype=np.uint64)
        tl = np.zeros((k, levels), dtype=np.uint8)
        tr = np.zeros((k, levels), dtype=np.uint8)
        leaf = np.zeros(k, dtype=np.uint64)
        for i in range(k):
            alpha[i] = elem()
            branch[i] = elem()
            root[i] = np.frombuffer(raw[pos : pos + 16], dtype=np.uint8)
            pos += 16
            for lv in range(levels):
                scw[i, lv] = np.frombuffer(raw[pos : pos + 16], dtype=np.uint8)
                pos += 16
                vcw[i, lv] = elem()
                bits = raw[pos]
                pos += 1
                tl[i, lv] = bits & 1
                tr[i, lv] = (bits >> 1) & 1
            leaf[i] = elem()
        return cls(party, cfg, alpha, branch, root, scw, vcw, tl, tr, leaf)


@dataclass
class KeyBundle:
    """Single-use container for one secure-ReLU evaluation's keys."""

    key: ComparisonKey
    consumed: bool = field(default=False)

    def take(self) -> ComparisonKey:
        if self.consumed:
            raise KeyExhausted("comparison key bundle already consumed")
        self.consumed = True
        return self.key


def keygen_comparison(
    cfg: FixedConfig, rng: np.random.Generator, count: int = 1
) -> tuple[np.ndarray, ComparisonKey, ComparisonKey]:
    """Generate `count` independent masks and key pairs.

    Returns (alpha [count] u64, key for party 0, key for party 1).
    """
    n = cfg.bit_width
    levels = n - 1
    low_mask = (1 << levels) - 1

    alpha = random_ring(rng, count, cfg)
    a0, a1 = split(alpha, cfg, rng)
    msb = (alpha >> np.uint64(levels)).astype(np.uint64)
    branch = _mask(np.uint64(1) - msb, cfg)  # 1 - s
    b0, b1 = split(branch, cfg, rng)
    # Payload of the comparison tree: +1 when msb(alpha)=1, -1 otherwise.
    beta = _mask(np.uint64(2) * msb - np.uint64(1), cfg)
    threshold = alpha & np.uint64(low_mask)

    s0 = prg.random_seeds(rng, count)
    s1 = prg.random_seeds(rng, count)
    root0, root1 = s0.copy(), s1.copy()
    t0 = np.zeros(count, dtype=np.uint8)
    t1 = np.ones(count, dtype=np.uint8)
    v_alpha = np.zeros(count, dtype=np.uint64)

    seed_cw = np.zeros((count, levels, 16), dtype=np.uint8)
    value_cw = np.zeros((count, levels), dtype=np.uint64)
    tcw_l = np.zeros((count, levels), dtype=np.uint8)
    tcw_r = np.zeros((count, levels), dtype=np.uint8)

    for lv in range(levels):
        e0 = prg.expand(s0)
        e1 = prg.expand(s1)
        abit = ((threshold >> np.uint64(levels - 1 - lv)) & np.uint64(1)).astype(np.uint8)
        keep_right = abit.astype(bool)  # bit 1 -> path goes right, left loses

        s0_lose = np.where(keep_right[:, None], e0[0], e0[1])
        s1_lose = np.where(keep_right[:, None], e1[0], e1[1])
        v0_lose = _mask(np.where(keep_right, e0[2], e0[3]), cfg)
        v1_lose = _mask(np.where(keep_right, e1[2], e1[3]), cfg)
        v0_keep = _mask(np.where(keep_right, e0[3], e0[2]), cfg)
        v1_keep = _mask(np.where(keep_right, e1[3], e1[2]), cfg)

        scw = s0_lose ^ s1_lose
        vcw = _neg_where(t1, _mask(v1_lose - v0_lose - v_alpha, cfg), cfg)
        # When the lost child is the left one, inputs diverging there are
        # below the threshold, so the payload lands on that subtree.
        vcw = np.where(keep_right, _mask(vcw + _neg_where(t1, beta, cfg), cfg), vcw)
        v_alpha = _mask(v_alpha - v1_keep + v0_keep + _neg_where(t1, vcw, cfg), cfg)

        tl = e0[4] ^ e1[4] ^ abit ^ np.uint8(1)
        tr = e0[5] ^ e1[5] ^ abit

        seed_cw[:, lv] = scw
        value_cw[:, lv] = vcw
        tcw_l[:, lv] = tl
        tcw_r[:, lv] = tr

        s0_keep = np.where(keep_right[:, None], e0[1], e0[0])
        s1_keep = np.where(keep_right[:, None], e1[1], e1[0])
        t0_keep = np.where(keep_right, e0[5], e0[4])
        t1_keep = np.where(keep_right, e1[5], e1[4])
        tcw_keep = np.where(keep_right, tr, tl)

        s0 = s0_keep ^ (t0[:, None] * scw)
        s1 = s1_keep ^ (t1[:, None] * scw)
        t0, t1 = t0_keep ^ (t0 & tcw_keep), t1_keep ^ (t1 & tcw_keep)

    leaf = _neg_where(
        t1, _mask(prg.convert(s1, cfg.mask) - prg.convert(s0, cfg.mask) - v_alpha, cfg), cfg
    )

    k0 = ComparisonKey(0, cfg, a0.data, b0.data, root0, seed_cw, value_cw, tcw_l, tcw_r, leaf)
    k1 = ComparisonKey(
        1, cfg, a1.data, b1.data, root1, seed_cw.copy(), value_cw.copy(),
        tcw_l.copy(), tcw_r.copy(), leaf.copy(),
    )
    return alpha, k0, k1


def _compare_tree_eval(key: ComparisonKey, x_low: np.ndarray) -> np.ndarray:
    """Additive share of payload * [x_low < threshold], vectorized over keys."""
    cfg = key.cfg
    levels = key.levels
    party = key.party
    s = key.root_seed.copy()
    t = np.full(key.count, party, dtype=np.uint8)
    acc = np.zeros(key.count, dtype=np.uint64)
    for lv in range(levels):
        s_l, s_r, v_l, v_r, t_l, t_r = prg.expand(s)
        scw = key.seed_cw[:, lv]
        s_l = s_l ^ (t[:, None] * scw)
        s_r = s_r ^ (t[:, None] * scw)
        t_l = t_l ^ (t & key.tcw_left[:, lv])
        t_r = t_r ^ (t & key.tcw_right[:, lv])
        xbit = ((x_low >> np.uint64(levels - 1 - lv)) & np.uint64(1)).astype(bool)
        v_cur = _mask(np.where(xbit, v_r, v_l), cfg)
        term = _mask(v_cur + t.astype(np.uint64) * key.value_cw[:, lv], cfg)
        if party == 1:
            term = _mask(np.uint64(0) - term, cfg)
        acc = _mask(acc + term, cfg)
        s = np.where(xbit[:, None], s_r, s_l)
        t = np.where(xbit, t_r, t_l)
    term = _mask(prg.convert(s, cfg.mask) + t.astype(np.uint64) * key.leaf_cw, cfg)
    if party == 1:
        term = _mask(np.uint64(0) - term, cfg)
    return _mask(acc + term, cfg)


def eval_comparison(party: int, key: ComparisonKey, x_pub) -> Share:
    """Evaluate the sign test on public input; returns an additive share
    of the bit [signed(x_pub - alpha) >= 0] as an un-scaled ring element.

    Deterministic: same (key, x_pub) always yields the same share.
    """
    assert party == key.party
    cfg = key.cfg
    x = np.atleast_1d(np.asarray(x_pub, dtype=np.uint64))
    levels = cfg.bit_width - 1
    m = (x >> np.uint64(levels)).astype(bool)
    x_low = x & np.uint64((1 << levels) - 1)
    w = _compare_tree_eval(key, x_low)
    # sign bit = branch + w when msb(x_pub)=0, 1 - branch - w when it is 1
    flipped = _mask(np.uint64(1 if party == 0 else 0) - key.branch_share - w, cfg)
    straight = _mask(key.branch_share + w, cfg)
    return Share(party, np.where(m, flipped, straight), cfg)


def relu_sign_to_select(
    bit_share: Share, x_share: Share, triple: BeaverTriple, channel
) -> Share:
    """Multiply a shared value by a shared 0/1 bit: x if bit else 0.

    The bit is un-scaled so the product needs no truncation.
    """
    return secure_mul(x_share, bit_share, triple, channel)
