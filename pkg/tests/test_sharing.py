import numpy as np
import pytest
from scipy import stats

from splitfss.errors import PartyMismatch
from splitfss.ring import encode, ring_mul
from splitfss.sharing import (
    Share,
    reconstruct,
    share_add,
    share_add_public,
    share_mul_public,
    split,
)


class TestSplitReconstruct:
    def test_shares_of_zero_sum_to_zero(self, cfg64, rng):
        s0, s1 = split(0, cfg64, rng)
        assert reconstruct(s0, s1)[0] == 0
        assert s0.data[0] != 0  # overwhelming probability on a 64-bit ring

    def test_round_trip_random(self, cfg64, rng):
        xs = rng.integers(0, 2**64, size=10_000, dtype=np.uint64)
        s0, s1 = split(xs, cfg64, rng)
        np.testing.assert_array_equal(reconstruct(s0, s1), xs)

    def test_exhaustive_n8(self, cfg8, rng):
        # every ring value, many fresh randomness draws each
        xs = np.tile(np.arange(256, dtype=np.uint64), 64)
        s0, s1 = split(xs, cfg8, rng)
        np.testing.assert_array_equal(reconstruct(s0, s1), xs)

    def test_share_marginal_uniform(self, cfg8, rng):
        xs = np.full(100_000, 42, dtype=np.uint64)
        s0, _ = split(xs, cfg8, rng)
        hist = np.bincount(s0.data.astype(np.int64), minlength=256)
        _, p = stats.chisquare(hist)
        assert p > 0.001

    def test_share_independent_of_secret(self, cfg8, rng):
        h = []
        for value in (0, 255):
            s0, _ = split(np.full(100_000, value, dtype=np.uint64), cfg8, rng)
            h.append(np.bincount(s0.data.astype(np.int64), minlength=256))
        _, p, _, _ = stats.chi2_contingency(np.vstack(h))
        assert p > 0.001

    def test_party_mismatch(self, cfg64, rng):
        s0, s1 = split(7, cfg64, rng)
        with pytest.raises(PartyMismatch):
            reconstruct(s1, s0)
        with pytest.raises(PartyMismatch):
            reconstruct(s0, Share(0, s1.data, cfg64))


class TestLinearOps:
    def test_add_homomorphic(self, cfg64, rng):
        x = rng.integers(0, 2**64, size=100, dtype=np.uint64)
        y = rng.integers(0, 2**64, size=100, dtype=np.uint64)
        x0, x1 = split(x, cfg64, rng)
        y0, y1 = split(y, cfg64, rng)
        np.testing.assert_array_equal(
            reconstruct(share_add(x0, y0), share_add(x1, y1)), x + y
        )

    def test_mul_public(self, cfg64, rng):
        s0, s1 = split(3, cfg64, rng)
        got = reconstruct(share_mul_public(s0, 2), share_mul_public(s1, 2))
        assert got[0] == 6

    def test_add_public_identity(self, cfg64, rng):
        x = int(rng.integers(0, 2**64))
        s0, s1 = split(x, cfg64, rng)
        got = reconstruct(share_add_public(s0, 0), share_add_public(s1, 0))
        assert got[0] == x

    def test_add_public_applied_once(self, cfg16, rng):
        s0, s1 = split(10, cfg16, rng)
        got = reconstruct(share_add_public(s0, 5), share_add_public(s1, 5))
        assert got[0] == 15  # party 1 must not add the constant again

    def test_random_affine(self, cfg64, rng):
        for _ in range(1000):
            x = int(rng.integers(0, 2**64))
            c = int(rng.integers(0, 2**64))
            s0, s1 = split(x, cfg64, rng)
            got = reconstruct(share_mul_public(s0, c), share_mul_public(s1, c))
            assert got[0] == ring_mul(x, c, cfg64)

    def test_linearity_full_combination(self, cfg16, rng):
        # alpha * a + b + c for public alpha, c
        a, b, alpha, c = 1234, 4321, 7, 99
        a0, a1 = split(a, cfg16, rng)
        b0, b1 = split(b, cfg16, rng)
        t0 = share_add_public(share_add(share_mul_public(a0, alpha), b0), c)
        t1 = share_add_public(share_add(share_mul_public(a1, alpha), b1), c)
        assert reconstruct(t0, t1)[0] == (alpha * a + b + c) % 2**16
