"""Mean-squared-error loss, its gradient, and SGD updates in fixed point."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from ..ring import FixedConfig, FixedTensor, _mask, encode, trunc, trunc_share
from ..sharing import Share


def mse_loss(y_hat: FixedTensor, y_onehot: FixedTensor):
    """J = mean((y_hat - y)^2), grad = 2 (y_hat - y) / (batch * classes).

    Both returned in fixed point; J as a single-element tensor.
    """
    if y_hat.shape != y_onehot.shape:
        raise ShapeMismatch(f"{y_hat.shape} vs {y_onehot.shape}")
    cfg = y_hat.cfg
    batch, classes = y_hat.shape
    diff = _mask(y_hat.data - y_onehot.data, cfg)
    sq = trunc(_mask(diff * diff, cfg), cfg)
    total = _mask(sq.reshape(-1).sum(dtype=np.uint64), cfg)
    inv = np.uint64(encode(1.0 / (batch * classes), cfg))
    loss = trunc(_mask(total * inv, cfg), cfg)
    gscale = np.uint64(encode(2.0 / (batch * classes), cfg))
    grad = trunc(_mask(diff * gscale, cfg), cfg)
    return FixedTensor(np.atleast_1d(loss), cfg), FixedTensor(grad, cfg)


def sgd_update(param: FixedTensor, grad: FixedTensor, eta_enc: int) -> FixedTensor:
    """param - eta * grad in fixed point (eta public, already encoded)."""
    if param.shape != grad.shape:
        raise ShapeMismatch(f"{param.shape} vs {grad.shape}")
    cfg = param.cfg
    step = trunc(_mask(grad.data * np.uint64(eta_enc), cfg), cfg)
    return FixedTensor(_mask(param.data - step, cfg), cfg)


def sgd_update_share(param: Share, grad: Share, eta_enc: int) -> Share:
    """Share-domain SGD step; local truncation, so within 1 ulp of the
    plaintext update per element."""
    if param.shape != grad.shape:
        raise ShapeMismatch(f"{param.shape} vs {grad.shape}")
    cfg = param.cfg
    step = trunc_share(_mask(grad.data * np.uint64(eta_enc), cfg), param.party, cfg)
    return Share(param.party, _mask(param.data - step, cfg), cfg)
