import numpy as np
import pytest

from splitfss.errors import ConfigMismatch, ShapeMismatch
from splitfss.ring import (
    FixedConfig,
    FixedTensor,
    decode,
    encode,
    ring_add,
    ring_matmul,
    ring_mul,
    ring_neg,
    ring_sub,
    to_signed,
    trunc,
    trunc_share,
)


class TestEncode:
    def test_zero_maps_to_zero(self, cfg64):
        assert encode(0.0, cfg64) == 0

    def test_exact_value(self, cfg64):
        assert encode(1.5, cfg64) == 12288  # 1.5 * 2^13

    def test_negative_two_complement(self, cfg32):
        assert encode(-1.0, cfg32) == 2**32 - 8192

    def test_overflow_raises(self, cfg32):
        with pytest.raises(OverflowError):
            encode(2.0 ** 19, cfg32)

    def test_round_half_away_from_zero(self, cfg64):
        # 0.5 ulp cases round away from zero symmetrically
        half_ulp = 0.5 / cfg64.scale
        assert encode(half_ulp, cfg64) == 1
        assert encode(-half_ulp, cfg64) == cfg64.mask  # -1 mod 2^64


class TestDecode:
    def test_inverse_of_encode(self, cfg64):
        assert decode(12288, cfg64) == 1.5

    def test_signed_interpretation(self, cfg32):
        assert decode(2**32 - 8192, cfg32) == -1.0

    def test_round_trip_error_bound(self, cfg64, rng):
        xs = rng.uniform(-4, 4, size=10_000)
        back = decode(np.asarray(encode(xs, cfg64), dtype=np.uint64), cfg64)
        assert np.max(np.abs(back - xs)) <= 2.0 ** -14

    def test_exact_multiples_round_trip(self, cfg16):
        xs = np.arange(-50, 50) / cfg16.scale
        back = decode(np.asarray(encode(xs, cfg16)), cfg16)
        np.testing.assert_array_equal(back, xs)


class TestRingOps:
    def test_add_identity(self, cfg64, rng):
        x = int(rng.integers(0, 2**63))
        assert ring_add(x, 0, cfg64) == x

    def test_wrap_around(self, cfg8):
        assert ring_add(2**8 - 1, 1, cfg8) == 0

    def test_associativity(self, cfg64, rng):
        a = rng.integers(0, 2**64, size=1000, dtype=np.uint64)
        b = rng.integers(0, 2**64, size=1000, dtype=np.uint64)
        c = rng.integers(0, 2**64, size=1000, dtype=np.uint64)
        left = ring_add(ring_add(a, b, cfg64), c, cfg64)
        right = ring_add(a, ring_add(b, c, cfg64), cfg64)
        np.testing.assert_array_equal(left, right)

    def test_exhaustive_n8_against_python_ints(self, cfg8):
        a = np.repeat(np.arange(256, dtype=np.uint64), 256)
        b = np.tile(np.arange(256, dtype=np.uint64), 256)
        np.testing.assert_array_equal(
            ring_add(a, b, cfg8), (a.astype(object) + b.astype(object)) % 256
        )
        np.testing.assert_array_equal(
            ring_mul(a, b, cfg8), (a.astype(object) * b.astype(object)) % 256
        )
        np.testing.assert_array_equal(
            ring_sub(a, b, cfg8), (a.astype(object) - b.astype(object)) % 256
        )

    def test_neg(self, cfg16):
        assert ring_neg(1, cfg16) == 2**16 - 1
        assert ring_neg(0, cfg16) == 0


class TestTrunc:
    def test_product_matches_rational_oracle(self, cfg64):
        prod = ring_mul(encode(2.0, cfg64), encode(3.0, cfg64), cfg64)
        got = trunc(prod, cfg64)
        assert abs(int(got) - encode(6.0, cfg64)) <= 1

    def test_zero_annihilates(self, cfg64):
        prod = ring_mul(encode(1.75, cfg64), encode(0.0, cfg64), cfg64)
        assert trunc(prod, cfg64) == 0

    def test_signed_product(self, cfg64):
        prod = ring_mul(encode(-1.5, cfg64), encode(2.0, cfg64), cfg64)
        got = to_signed(trunc(prod, cfg64), cfg64)
        assert abs(int(got) - (-3 * cfg64.scale)) <= 1

    def test_exhaustive_small_ring(self):
        # every product of in-range operands at n=16, f=4: error <= 1 ulp
        cfg = FixedConfig(bit_width=16, frac_bits=4)
        lim = 1 << 11  # |x| < 2^(n-f-1) = 2^11 as raw encoded magnitudes
        vals = np.arange(-lim + 1, lim, 7, dtype=np.int64)  # stride keeps it dense but fast
        a = np.repeat(vals, vals.size)
        b = np.tile(vals, vals.size)
        prod = (a % (1 << 16)).astype(np.uint64) * (b % (1 << 16)).astype(np.uint64)
        got = to_signed(trunc(prod & np.uint64(0xFFFF), cfg), cfg).astype(np.int64)
        want = (a * b) >> 4  # arithmetic shift of the exact product
        assert np.max(np.abs(got - want)) <= 1

    def test_local_trunc_share_pair(self, cfg64, rng):
        from splitfss.sharing import reconstruct, split

        xs = np.asarray(encode(rng.uniform(-100, 100, size=2000), cfg64), dtype=np.uint64)
        s0, s1 = split(xs, cfg64, rng)
        t0 = trunc_share(s0.data, 0, cfg64)
        t1 = trunc_share(s1.data, 1, cfg64)
        got = to_signed((t0 + t1) & np.uint64(cfg64.mask), cfg64)
        want = to_signed(trunc(xs, cfg64), cfg64)
        assert np.max(np.abs(got - want)) <= 1


class TestRingMatmul:
    def test_matches_integer_path(self, cfg64, rng):
        # small-magnitude operands take the float64 fast path; cross-check
        a = rng.integers(-1000, 1000, size=(9, 7)).astype(np.int64).view(np.uint64)
        b = rng.integers(-1000, 1000, size=(7, 5)).astype(np.int64).view(np.uint64)
        fast = ring_matmul(a, b, cfg64)
        slow = (a @ b)  # uint64 wraps mod 2^64
        np.testing.assert_array_equal(fast, slow)

    def test_uniform_operands_exact(self, cfg32, rng):
        a = rng.integers(0, 2**32, size=(6, 6), dtype=np.uint64)
        b = rng.integers(0, 2**32, size=(6, 6), dtype=np.uint64)
        got = ring_matmul(a, b, cfg32)
        want = np.zeros((6, 6), dtype=object)
        for i in range(6):
            for j in range(6):
                want[i, j] = int(sum(int(a[i, k]) * int(b[k, j]) for k in range(6)) % 2**32)
        np.testing.assert_array_equal(got.astype(object), want)

    def test_shape_mismatch(self, cfg64):
        with pytest.raises(ShapeMismatch):
            ring_matmul(np.zeros((2, 3), dtype=np.uint64), np.zeros((2, 3), dtype=np.uint64), cfg64)


class TestFixedConfig:
    def test_invalid_width(self):
        with pytest.raises(ValueError):
            FixedConfig(bit_width=24)

    def test_invalid_frac(self):
        with pytest.raises(ValueError):
            FixedConfig(bit_width=8, frac_bits=7)

    def test_tensor_config_mismatch(self, cfg64, cfg32):
        a = FixedTensor.encode([1.0], cfg64)
        b = FixedTensor.encode([1.0], cfg32)
        with pytest.raises(ConfigMismatch):
            _ = a + b

    def test_exactly_representable_round_trip(self, cfg64):
        for x in (0.0, 1.0, -1.0, 0.5, -2.25, 100.125):
            assert decode(encode(x, cfg64), cfg64) == x
