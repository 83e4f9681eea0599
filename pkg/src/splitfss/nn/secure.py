"""Secret-shared FC and ReLU layers evaluated jointly by the two servers.

FC layers ride on Beaver matrix triples (one opening round per matmul);
ReLU opens the masked pre-activation with the comparison key's mask,
evaluates the sign test locally, and selects through an elementwise
triple.  Sign-bit shares are cached so backward is a single select.
"""

from __future__ import annotations

import numpy as np

from ..beaver import BeaverTriple, MatTriple, secure_matmul
from ..errors import ShapeMismatch
from ..fss import KeyBundle, eval_comparison, relu_sign_to_select
from ..ring import _mask, trunc_share
from ..sharing import Share
from ..wire import Kind, ProtocolMessage, decode_tensor, encode_tensor


def open_tensor(data: np.ndarray, cfg, channel) -> np.ndarray:
    """Both parties send their share and add the peer's: a public value."""
    session, epoch, batch, phase = channel.message_context()
    msg = ProtocolMessage(
        session, epoch, batch, phase, Kind.OPENING, encode_tensor(data, cfg.elem_bytes)
    )
    peer = channel.exchange(msg)
    other, _ = decode_tensor(peer.payload)
    return _mask(data + other, cfg)


def fc_secure_forward(
    x: Share, w: Share, bias: Share, triple: MatTriple, channel
):
    """Shared affine layer: trunc(x @ w) + bias, one opening round."""
    z = secure_matmul(x, w, triple, channel)
    y = _mask(trunc_share(z.data, z.party, z.cfg) + bias.data[None, :], z.cfg)
    return Share(z.party, y, z.cfg), {"x": x, "w": w}


def fc_secure_backward(
    grad: Share, cache, t_gx: MatTriple, t_gw: MatTriple, channel
):
    """Returns (grad_x, grad_w, grad_b) shares; two opening rounds."""
    x, w = cache["x"], cache["w"]
    cfg = grad.cfg
    w_t = Share(w.party, np.ascontiguousarray(w.data.T), cfg)
    gx = secure_matmul(grad, w_t, t_gx, channel)
    gx = Share(gx.party, trunc_share(gx.data, gx.party, cfg), cfg)
    x_t = Share(x.party, np.ascontiguousarray(x.data.T), cfg)
    gw = secure_matmul(x_t, grad, t_gw, channel)
    gw = Share(gw.party, trunc_share(gw.data, gw.party, cfg), cfg)
    gb = Share(grad.party, _mask(grad.data.sum(axis=0, dtype=np.uint64), cfg), cfg)
    return gx, gw, gb


def relu_secure_forward(
    x: Share, bundle: KeyBundle, select_triple: BeaverTriple, channel
):
    """Masked sign test + select; returns (y, cache with sign-bit shares)."""
    cfg = x.cfg
    key = bundle.take()
    flat = x.data.reshape(-1)
    if key.count != flat.shape[0]:
        raise ShapeMismatch(f"key bundle of {key.count} gates for {flat.shape[0]} values")
    x_pub = open_tensor(_mask(flat + key.alpha_share, cfg), cfg, channel)
    bits = eval_comparison(x.party, key, x_pub)
    y = relu_sign_to_select(bits, Share(x.party, flat, cfg), select_triple, channel)
    return Share(x.party, y.data.reshape(x.shape), cfg), {"bits": bits, "shape": x.shape}


def relu_secure_backward(grad: Share, cache, triple: BeaverTriple, channel):
    """grad * sign-bit, elementwise; bits are un-scaled so no truncation."""
    flat = Share(grad.party, grad.data.reshape(-1), grad.cfg)
    g = relu_sign_to_select(cache["bits"], flat, triple, channel)
    return Share(grad.party, g.data.reshape(cache["shape"]), grad.cfg)
