"""Fixed-point arithmetic over the power-of-two ring Z_{2^n}.

Values live in numpy uint64 arrays (or python ints for scalars) reduced
mod 2^n.  Values >= 2^(n-1) are interpreted as negatives (two's
complement).  Reals are encoded as round(x * 2^f) with
round-half-away-from-zero, and every fixed-point product must be
followed by a truncation (arithmetic right shift by f in the signed
interpretation).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigMismatch, ShapeMismatch

_ALLOWED_WIDTHS = (8, 16, 32, 64)

# Exact float64 integer arithmetic is safe strictly below 2^53; keep a
# margin bit so rounding at the boundary can never bite.
_F64_EXACT_BOUND = float(1 << 52)


@dataclass(frozen=True)
class FixedConfig:
    """Ring width, fractional precision and security parameter of a session."""

    bit_width: int = 64
    frac_bits: int = 13
    lambda_bits: int = 128

    def __post_init__(self):
        if self.bit_width not in _ALLOWED_WIDTHS:
            raise ValueError(f"bit_width must be one of {_ALLOWED_WIDTHS}")
        if not 0 < self.frac_bits < self.bit_width - 2:
            raise ValueError("need 0 < frac_bits < bit_width - 2")
        if self.lambda_bits != 128:
            raise ValueError("only lambda_bits=128 is supported")

    @property
    def modulus(self) -> int:
        return 1 << self.bit_width

    @property
    def mask(self) -> int:
        return (1 << self.bit_width) - 1

    @property
    def half(self) -> int:
        return 1 << (self.bit_width - 1)

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def elem_bytes(self) -> int:
        return self.bit_width // 8

    @property
    def max_real(self) -> float:
        """Largest magnitude encodable without overflow."""
        return float(1 << (self.bit_width - self.frac_bits - 1))

    def fingerprint(self) -> bytes:
        return bytes([self.bit_width, self.frac_bits, self.lambda_bits // 8])


def _mask(v, cfg: FixedConfig):
    if cfg.bit_width == 64:
        return v
    return v & np.uint64(cfg.mask)


def encode(x, cfg: FixedConfig):
    """Encode a real (scalar or array) as round(x * 2^f) mod 2^n.

    Rounding is half-away-from-zero.  Raises OverflowError when any
    |x| >= 2^(n-f-1).
    """
    arr = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(arr) >= cfg.max_real):
        raise OverflowError(
            f"{np.max(np.abs(arr))} out of range for n={cfg.bit_width}, f={cfg.frac_bits}"
        )
    scaled = np.sign(arr) * np.floor(np.abs(arr) * cfg.scale + 0.5)
    out = _mask(scaled.astype(np.int64).astype(np.uint64), cfg)
    if np.isscalar(x) or arr.ndim == 0:
        return int(out)
    return out


def to_signed(v, cfg: FixedConfig) -> np.ndarray:
    """Two's-complement reinterpretation as int64 (exact for all widths)."""
    arr = np.asarray(v, dtype=np.uint64)
    if cfg.bit_width == 64:
        return arr.view(np.int64) if arr.ndim else arr.reshape(1).view(np.int64)[0]
    half = np.uint64(cfg.half)
    signed = arr.astype(np.int64)
    return np.where(arr >= half, signed - np.int64(cfg.modulus), signed)


def from_signed(s, cfg: FixedConfig):
    arr = np.asarray(s, dtype=np.int64)
    if arr.ndim:
        return _mask(arr.view(np.uint64), cfg)
    return _mask(np.uint64(int(arr) % (1 << 64)), cfg)


def decode(v, cfg: FixedConfig):
    """Inverse of encode under the signed interpretation."""
    signed = to_signed(v, cfg)
    out = np.asarray(signed, dtype=np.float64) / cfg.scale
    if np.isscalar(v) or np.asarray(v).ndim == 0:
        return float(out)
    return out


def _as_u64(x):
    return x if isinstance(x, np.ndarray) else np.uint64(x & ((1 << 64) - 1))


def ring_add(a, b, cfg: FixedConfig):
    out = _mask(_as_u64(a) + _as_u64(b), cfg)
    return out if isinstance(out, np.ndarray) else int(out)


def ring_sub(a, b, cfg: FixedConfig):
    out = _mask(_as_u64(a) - _as_u64(b), cfg)
    return out if isinstance(out, np.ndarray) else int(out)


def ring_mul(a, b, cfg: FixedConfig):
    out = _mask(_as_u64(a) * _as_u64(b), cfg)
    return out if isinstance(out, np.ndarray) else int(out)


def ring_neg(a, cfg: FixedConfig):
    out = _mask(np.uint64(0) - _as_u64(a), cfg)
    return out if isinstance(out, np.ndarray) else int(out)


def trunc(v, cfg: FixedConfig):
    """Arithmetic right shift by f in the signed interpretation.

    Applied after multiplying two encoded values to bring the scale back
    from 2^(2f) to 2^f.
    """
    shifted = to_signed(v, cfg) >> np.int64(cfg.frac_bits)
    out = from_signed(shifted, cfg)
    return out if isinstance(out, np.ndarray) else int(out)


def trunc_share(v, party: int, cfg: FixedConfig):
    """Local (per-share) truncation.

    Party 0 floor-divides its share as an unsigned value; party 1
    negates, floor-divides, negates.  The reconstruction differs from
    trunc() of the reconstruction by at most 1 ulp, except with
    probability ~ |value| / 2^(n-f) when the shares straddle the ring
    boundary.
    """
    arr = np.asarray(v, dtype=np.uint64)
    f = np.uint64(cfg.frac_bits)
    if party == 0:
        out = _mask(arr >> f, cfg)
    else:
        neg = _mask(np.uint64(0) - arr, cfg)
        out = _mask(np.uint64(0) - (neg >> f), cfg)
    return out if isinstance(v, np.ndarray) else int(out)


def ring_matmul(a: np.ndarray, b: np.ndarray, cfg: FixedConfig) -> np.ndarray:
    """Exact matrix product mod 2^n.

    Uses a float64 fast path when the operands' signed magnitudes prove
    every accumulated dot product stays below 2^52; otherwise falls back
    to wrapped integer arithmetic.
    """
    if a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    sa = to_signed(a, cfg)
    sb = to_signed(b, cfg)
    k = a.shape[-1]
    bound = (
        float(np.max(np.abs(sa), initial=0))
        * float(np.max(np.abs(sb), initial=0))
        * k
    )
    if bound < _F64_EXACT_BOUND:
        prod = np.rint(sa.astype(np.float64) @ sb.astype(np.float64)).astype(np.int64)
        return from_signed(prod, cfg)
    return _mask(np.asarray(a, dtype=np.uint64) @ np.asarray(b, dtype=np.uint64), cfg)


@dataclass
class FixedTensor:
    """A shaped block of ring elements tied to one FixedConfig."""

    data: np.ndarray
    cfg: FixedConfig

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.uint64)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @classmethod
    def encode(cls, values, cfg: FixedConfig) -> "FixedTensor":
        return cls(np.atleast_1d(np.asarray(encode(values, cfg), dtype=np.uint64)), cfg)

    @classmethod
    def zeros(cls, shape, cfg: FixedConfig) -> "FixedTensor":
        return cls(np.zeros(shape, dtype=np.uint64), cfg)

    def decode(self) -> np.ndarray:
        return decode(self.data, self.cfg)

    def _check(self, other: "FixedTensor"):
        if self.cfg != other.cfg:
            raise ConfigMismatch("mixing FixedConfigs")
        if self.shape != other.shape:
            raise ShapeMismatch(f"{self.shape} vs {other.shape}")

    def __add__(self, other: "FixedTensor") -> "FixedTensor":
        self._check(other)
        return FixedTensor(_mask(self.data + other.data, self.cfg), self.cfg)

    def __sub__(self, other: "FixedTensor") -> "FixedTensor":
        self._check(other)
        return FixedTensor(_mask(self.data - other.data, self.cfg), self.cfg)

    def reshape(self, *shape) -> "FixedTensor":
        return FixedTensor(self.data.reshape(*shape), self.cfg)

    def copy(self) -> "FixedTensor":
        return FixedTensor(self.data.copy(), self.cfg)
