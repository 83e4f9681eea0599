"""Server roles: the plaintext middle segment in public modes, or one of
the two share-holding parties in the private mode."""

from __future__ import annotations

import numpy as np

from ..errors import ProtocolOrderError
from ..nn.loss import mse_loss, sgd_update_share
from ..nn.secure import (
    fc_secure_backward,
    fc_secure_forward,
    relu_secure_backward,
    relu_secure_forward,
)
from ..ring import FixedTensor, _mask
from ..sharing import Share
from ..wire import Kind, Phase, decode_tensor, encode_tensor
from .material import MaterialFeed, server_plan, server_recv_step
from .plain import apply_sgd, init_segment_params, segment_backward, segment_forward
from .session import Mode, sync_respond


class PublicServerRole:
    """Single plaintext server for vanilla and U-shaped public modes."""

    def __init__(self, session, ch_client, initial_params=None):
        self.session = session
        self.cfg = session.fixed
        self.ch_client = ch_client
        self.mode = session.mode
        net = session.network
        placemap = net.placement_map(self.mode.value)
        self.layer_idx = [i for i, p in enumerate(placemap) if p == "server"]
        self.params = init_segment_params(net, self.layer_idx, self.cfg, session.train.seed)
        if initial_params:
            for idx, pair in initial_params.items():
                if idx in self.params:
                    self.params[idx] = pair

    def run(self) -> dict:
        plan = sync_respond(self.ch_client, self.session)
        train = self.session.train
        for epoch in range(train.epochs):
            for step in range(plan.train_steps):
                self._train_step(epoch, step)
        for tstep in range(plan.test_steps):
            self._test_step(train.epochs, tstep)
        return {"params": self.params}

    def _train_step(self, epoch, step):
        cfg = self.cfg
        net = self.session.network
        ch = self.ch_client
        ch.set_context(self.session.session_id, epoch, step, Phase.TRAIN_FORWARD)
        x_raw, _ = decode_tensor(ch.expect(Kind.X_PUB).payload)
        x = FixedTensor(x_raw, cfg)
        if self.mode is Mode.VANILLA_PUBLIC:
            labels_raw, _ = decode_tensor(ch.expect(Kind.LABELS).payload)
            y_onehot = FixedTensor(labels_raw, cfg)
        out, caches = segment_forward(net, self.layer_idx, self.params, x)
        if self.mode is Mode.VANILLA_PUBLIC:
            _, grad = mse_loss(out, y_onehot)
            ch.set_context(self.session.session_id, epoch, step, Phase.TRAIN_BACKWARD)
        else:
            ch.post(Kind.CUT_ACT, encode_tensor(out.data, cfg.elem_bytes))
            ch.set_context(self.session.session_id, epoch, step, Phase.TRAIN_BACKWARD)
            grad_raw, _ = decode_tensor(ch.expect(Kind.GRAD_SHARE).payload)
            grad = FixedTensor(grad_raw, cfg)
        grad_in, grads = segment_backward(net, self.layer_idx, self.params, caches, grad)
        apply_sgd(self.params, grads, self.session.eta_enc)
        ch.post(Kind.CUT_GRAD, encode_tensor(grad_in.data.reshape(x.shape), cfg.elem_bytes))

    def _test_step(self, epoch, tstep):
        cfg = self.cfg
        ch = self.ch_client
        ch.set_context(self.session.session_id, epoch, tstep, Phase.TEST)
        x_raw, _ = decode_tensor(ch.expect(Kind.X_PUB).payload)
        out, _ = segment_forward(self.session.network, self.layer_idx, self.params, FixedTensor(x_raw, cfg))
        kind = Kind.PREDICTION if self.mode is Mode.VANILLA_PUBLIC else Kind.CUT_ACT
        ch.post(kind, encode_tensor(out.data, cfg.elem_bytes))


class PrivateServerRole:
    """One of the two share-holding servers in the private mode."""

    def __init__(self, party: int, session, ch_client, ch_dealer, ch_peer):
        self.party = party
        self.session = session
        self.cfg = session.fixed
        self.ch_client = ch_client
        self.ch_dealer = ch_dealer
        self.ch_peer = ch_peer
        self.plan_layers = server_plan(session.network)
        self.params = {}  # idx -> (w Share, b Share)

    def run(self) -> dict:
        plan = sync_respond(self.ch_client, self.session)
        self.ch_dealer.set_context(self.session.session_id, 0, 0, Phase.PREPROCESSING)
        self._recv_weight_shares()
        train = self.session.train
        feed = MaterialFeed(
            self.ch_dealer,
            train.epochs * plan.train_steps,
            self.session.preprocess_chunk,
            lambda ch: server_recv_step(ch, self.plan_layers, self.cfg, training=True),
        )
        for epoch in range(train.epochs):
            for step in range(plan.train_steps):
                self._train_step(epoch, step, feed.next_step())
        if plan.test_steps:
            test_feed = MaterialFeed(
                self.ch_dealer,
                plan.test_steps,
                self.session.preprocess_chunk,
                lambda ch: server_recv_step(ch, self.plan_layers, self.cfg, training=False),
            )
            for tstep in range(plan.test_steps):
                self._test_step(train.epochs, tstep, test_feed.next_step())
        return {"params": self.params, "party": self.party}

    def _recv_weight_shares(self):
        for entry in self.plan_layers:
            if entry.kind != "fc":
                continue
            msg = self.ch_dealer.recv()
            if msg.kind != Kind.WEIGHT_SHARE:
                raise ProtocolOrderError(f"expected weight share, got kind {msg.kind}")
            w_raw, off = decode_tensor(msg.payload)
            b_raw, _ = decode_tensor(msg.payload, off)
            self.params[entry.index] = (
                Share(self.party, w_raw, self.cfg),
                Share(self.party, b_raw, self.cfg),
            )

    def _share_of_public(self, x_pub: np.ndarray, mask_share: np.ndarray) -> Share:
        """Re-share x = x_pub - alpha locally: party 0 holds x_pub minus
        its mask share, party 1 just negates its mask share."""
        base = x_pub if self.party == 0 else np.uint64(0)
        return Share(self.party, _mask(base - mask_share, self.cfg), self.cfg)

    def _set_context(self, epoch, step, phase):
        self.ch_client.set_context(self.session.session_id, epoch, step, phase)
        self.ch_peer.set_context(self.session.session_id, epoch, step, phase)

    def _forward(self, x: Share, material, training: bool):
        caches = {}
        for entry in self.plan_layers:
            if entry.kind == "fc":
                w, b = self.params[entry.index]
                x, caches[entry.index] = fc_secure_forward(
                    x, w, b, material.fc[entry.index][0], self.ch_peer
                )
            else:
                relu = material.relu[entry.index]
                x, caches[entry.index] = relu_secure_forward(
                    x, relu["keys"], relu["select"], self.ch_peer
                )
        return x, caches

    def _train_step(self, epoch, step, material):
        cfg = self.cfg
        self._set_context(epoch, step, Phase.TRAIN_FORWARD)
        x_pub, _ = decode_tensor(self.ch_client.expect(Kind.X_PUB).payload)
        x = self._share_of_public(x_pub, material.mask_share)
        out, caches = self._forward(x, material, training=True)
        self.ch_client.post(Kind.CUT_ACT, encode_tensor(out.data, cfg.elem_bytes))

        self._set_context(epoch, step, Phase.TRAIN_BACKWARD)
        g_raw, _ = decode_tensor(self.ch_client.expect(Kind.GRAD_SHARE).payload)
        grad = Share(self.party, g_raw, cfg)
        updates = {}
        for entry in reversed(self.plan_layers):
            if entry.kind == "relu":
                grad = relu_secure_backward(
                    grad, caches[entry.index], material.relu[entry.index]["backward"], self.ch_peer
                )
            else:
                _, t_gx, t_gw = material.fc[entry.index]
                grad, gw, gb = fc_secure_backward(
                    grad, caches[entry.index], t_gx, t_gw, self.ch_peer
                )
                updates[entry.index] = (gw, gb)
        eta = self.session.eta_enc
        for idx, (gw, gb) in updates.items():
            w, b = self.params[idx]
            self.params[idx] = (sgd_update_share(w, gw, eta), sgd_update_share(b, gb, eta))
        self.ch_client.post(Kind.CUT_GRAD, encode_tensor(grad.data, cfg.elem_bytes))

    def _test_step(self, epoch, tstep, material):
        self._set_context(epoch, tstep, Phase.TEST)
        x_pub, _ = decode_tensor(self.ch_client.expect(Kind.X_PUB).payload)
        x = self._share_of_public(x_pub, material.mask_share)
        out, _ = self._forward(x, material, training=False)
        self.ch_client.post(Kind.CUT_ACT, encode_tensor(out.data, self.cfg.elem_bytes))
