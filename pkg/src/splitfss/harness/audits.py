"""Privacy audits: executable experiments over the masking and sharing
machinery (statistical consequences, not proofs)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..ring import FixedConfig, encode
from ..sharing import random_ring, split


@dataclass
class MaskUniformityReport:
    samples: int
    statistics: list  # chi-square statistic per probed value
    p_values: list
    two_sample_p: float

    @property
    def all_uniform(self) -> bool:
        return all(p > 0.001 for p in self.p_values)


def audit_mask_uniformity(
    samples: int = 100_000,
    cfg: FixedConfig = FixedConfig(bit_width=8, frac_bits=2),
    values=(42, 200),
    seed: int = 0,
    constant_mask: bool = False,
) -> MaskUniformityReport:
    """For fixed activations, histogram x_pub = value + alpha over fresh
    masks and chi-square it against uniform; also compare the two
    histograms against each other.  constant_mask=True is the negative
    control (the mask never changes, so x_pub is a point mass)."""
    if cfg.bit_width != 8:
        raise ValueError("exact binning audit runs on the 8-bit ring")
    rng = np.random.default_rng(seed)
    bins = cfg.modulus
    hists = []
    stats_out = []
    ps = []
    for value in values:
        if constant_mask:
            masks = np.full(samples, 77, dtype=np.uint64)
        else:
            masks = random_ring(rng, samples, cfg)
        x_pub = (np.uint64(value) + masks) & np.uint64(cfg.mask)
        hist = np.bincount(x_pub.astype(np.int64), minlength=bins)
        chi, p = stats.chisquare(hist)
        hists.append(hist)
        stats_out.append(float(chi))
        ps.append(float(p))
    table = np.vstack(hists[:2])
    nonzero = table.sum(axis=0) > 0
    if nonzero.sum() < 2:  # degenerate (e.g. constant masks): point masses
        two_p = 1.0 if np.array_equal(hists[0], hists[1]) else 0.0
    else:
        two_p = float(stats.chi2_contingency(table[:, nonzero])[1])
    return MaskUniformityReport(samples, stats_out, ps, two_p)


@dataclass
class LiaGameReport:
    trials: int
    classes: int
    plain_accuracy: float
    share_accuracy: float
    share_std_error: float
    chance: float

    @property
    def share_within_3_sigma_of_chance(self) -> bool:
        return abs(self.share_accuracy - self.chance) <= 3 * self.share_std_error


def audit_lia_game(
    trials: int = 5000,
    classes: int = 10,
    cfg: FixedConfig = FixedConfig(),
    seed: int = 0,
    head_inputs: int = 32,
) -> LiaGameReport:
    """Label-inference game: a random one-layer client head produces MSE
    output gradients for random inputs and hidden labels; the adversary
    guesses the label as the largest-magnitude gradient entry, applied to
    (a) the plaintext cut gradient and (b) the single additive share a
    server would actually receive."""
    if classes < 1:
        raise ValueError("classes must be >= 1")
    rng = np.random.default_rng(seed)
    w = rng.uniform(-1, 1, size=(head_inputs, classes)) / np.sqrt(head_inputs)
    x = rng.uniform(0, 1, size=(trials, head_inputs))
    labels = rng.integers(0, classes, size=trials)
    y_hat = x @ w
    onehot = np.zeros((trials, classes))
    onehot[np.arange(trials), labels] = 1.0
    grad = 2.0 * (y_hat - onehot) / classes

    plain_guess = np.argmax(np.abs(grad), axis=1)
    plain_acc = float(np.mean(plain_guess == labels))

    grad_enc = np.asarray(encode(grad, cfg), dtype=np.uint64)
    share_rng = np.random.default_rng(seed + 1)
    s0, _ = split(grad_enc, cfg, share_rng)
    signed = s0.data.astype(np.int64)  # a share is uniform; sign view is arbitrary
    share_guess = np.argmax(np.abs(signed), axis=1)
    share_acc = float(np.mean(share_guess == labels))

    chance = 1.0 / classes
    se = float(np.sqrt(chance * (1 - chance) / trials)) if classes > 1 else 0.0
    return LiaGameReport(trials, classes, plain_acc, share_acc, se, chance)
