"""The client role: owns the data and labels, runs the front (and, in
U-shaped modes, the output) layers in plaintext, and drives the epoch,
batch and phase cadence for every other role.

Labels never leave the client in any U-shaped mode; the only
label-dependent bytes it emits are fresh additive shares of the cut
gradient, each marginally uniform.
"""

from __future__ import annotations

import numpy as np

from ..nn.loss import mse_loss
from ..nn.specs import NetworkSpec
from ..ring import FixedTensor, _mask
from ..sharing import Share, reconstruct, split
from ..wire import Kind, Phase, decode_tensor, encode_tensor
from .material import MaterialFeed, client_recv_mask
from .plain import apply_sgd, init_segment_params, one_hot, segment_backward, segment_forward
from .session import DOMAIN_CLIENT_SHARES, DOMAIN_DATA, Mode, RunPlan, derive_rng, sync_request


class ClientRole:
    def __init__(self, session, ds_train, ds_test, channels: dict, initial_params=None):
        self.session = session
        self.cfg = session.fixed
        self.ds_train = ds_train
        self.ds_test = ds_test
        self.channels = channels
        self.mode = session.mode
        net: NetworkSpec = session.network
        placemap = net.placement_map(self.mode.value)
        self.front_idx = [i for i, p in enumerate(placemap) if p == "client_front"]
        self.output_idx = [i for i, p in enumerate(placemap) if p == "client_output"]
        self.params = init_segment_params(
            net, self.front_idx + self.output_idx, self.cfg, session.train.seed
        )
        if initial_params:
            for idx, pair in initial_params.items():
                if idx in self.params:
                    self.params[idx] = pair
        n_train = ds_train.size if ds_train is not None else 0
        bsz = session.train.batch_size
        self.plan = RunPlan(
            train_steps=n_train // bsz if n_train else 0,
            n_test=ds_test.size if ds_test is not None else 0,
            test_batch=session.train.test_batch_size,
        )
        self.accuracy = None
        self.loss_curve = []

    # -- helpers -------------------------------------------------------

    def _peers(self):
        return [self.channels[k] for k in ("p0", "p1", "dealer") if k in self.channels]

    def _servers(self):
        return [self.channels[k] for k in ("p0", "p1") if k in self.channels]

    def _set_context(self, epoch, batch, phase):
        for ch in self._servers():
            ch.set_context(self.session.session_id, epoch, batch, phase)

    def _front_forward(self, xb: FixedTensor):
        return segment_forward(self.session.network, self.front_idx, self.params, xb)

    def _predict(self, epoch, step, xb: FixedTensor):
        """Forward to logits for one test batch, per mode."""
        atm, _ = self._front_forward(xb)
        net = self.session.network
        if self.mode is Mode.LOCAL_PUBLIC:
            return atm
        self._set_context(epoch, step, Phase.TEST)
        flat = atm.data.reshape(atm.shape[0], -1)
        if self.mode is Mode.USHAPED_PRIVATE:
            mask = self.test_feed.next_step()
            x_pub = _mask(flat + mask, self.cfg)
            payload = encode_tensor(x_pub, self.cfg.elem_bytes)
            for ch in self._servers():
                ch.post(Kind.X_PUB, payload)
            parts = []
            for party, ch in enumerate(self._servers()):
                data, _ = decode_tensor(ch.expect(Kind.CUT_ACT).payload)
                parts.append(Share(party, data, self.cfg))
            cut = FixedTensor(reconstruct(*parts), self.cfg)
        else:
            self.channels["p0"].post(Kind.X_PUB, encode_tensor(flat, self.cfg.elem_bytes))
            if self.mode is Mode.VANILLA_PUBLIC:
                pred, _ = decode_tensor(self.channels["p0"].expect(Kind.PREDICTION).payload)
                return FixedTensor(pred, self.cfg)
            cut_raw, _ = decode_tensor(self.channels["p0"].expect(Kind.CUT_ACT).payload)
            cut = FixedTensor(cut_raw, self.cfg)
        y_hat, _ = segment_forward(net, self.output_idx, self.params, cut)
        return y_hat

    # -- protocol ------------------------------------------------------

    def synchronize(self):
        for ch in self._peers():
            sync_request(ch, self.session, self.plan)

    def run(self) -> dict:
        self.synchronize()
        train = self.session.train
        if self.mode is Mode.USHAPED_PRIVATE:
            dealer = self.channels["dealer"]
            dealer.set_context(self.session.session_id, 0, 0, Phase.PREPROCESSING)
            self.train_feed = MaterialFeed(
                dealer, train.epochs * self.plan.train_steps,
                self.session.preprocess_chunk, client_recv_mask,
            )
            self.test_feed = MaterialFeed(
                dealer, self.plan.test_steps, self.session.preprocess_chunk, client_recv_mask
            )
        for epoch in range(train.epochs):
            order = derive_rng(train.seed, DOMAIN_DATA, epoch).permutation(self.ds_train.size)
            order = order[: self.plan.train_steps * train.batch_size]
            batches = order.reshape(self.plan.train_steps, train.batch_size)
            for step, idx in enumerate(batches):
                self._train_step(epoch, step, idx)
        if self.ds_test is not None and self.plan.test_steps:
            self._test_loop()
        return {
            "accuracy": self.accuracy,
            "params": self.params,
            "plan": self.plan,
            "loss_curve": self.loss_curve,
        }

    def _train_step(self, epoch, step, idx):
        cfg = self.cfg
        net = self.session.network
        xb = FixedTensor(self.ds_train.images[idx], cfg)
        yb = one_hot(self.ds_train.labels[idx], net.classes, cfg)
        atm, front_caches = self._front_forward(xb)

        if self.mode is Mode.LOCAL_PUBLIC:
            loss, grad = mse_loss(atm, yb)
            self.loss_curve.append(float(loss.decode()[0]))
            grad_in, grads = segment_backward(net, self.front_idx, self.params, front_caches, grad)
            apply_sgd(self.params, grads, self.session.eta_enc)
            return

        flat = atm.data.reshape(atm.shape[0], -1)
        self._set_context(epoch, step, Phase.TRAIN_FORWARD)

        if self.mode is Mode.VANILLA_PUBLIC:
            ch = self.channels["p0"]
            ch.post(Kind.X_PUB, encode_tensor(flat, cfg.elem_bytes))
            ch.post(Kind.LABELS, encode_tensor(yb.data, cfg.elem_bytes))
            ch.set_context(self.session.session_id, epoch, step, Phase.TRAIN_BACKWARD)
            cut_grad_raw, _ = decode_tensor(ch.expect(Kind.CUT_GRAD).payload)
            cut_grad = FixedTensor(cut_grad_raw.reshape(atm.shape), cfg)
        elif self.mode is Mode.USHAPED_PUBLIC:
            ch = self.channels["p0"]
            ch.post(Kind.X_PUB, encode_tensor(flat, cfg.elem_bytes))
            cut_raw, _ = decode_tensor(ch.expect(Kind.CUT_ACT).payload)
            grad_cut = self._output_and_loss(FixedTensor(cut_raw, cfg), yb)
            ch.set_context(self.session.session_id, epoch, step, Phase.TRAIN_BACKWARD)
            ch.post(Kind.GRAD_SHARE, encode_tensor(grad_cut.data, cfg.elem_bytes))
            cut_grad_raw, _ = decode_tensor(ch.expect(Kind.CUT_GRAD).payload)
            cut_grad = FixedTensor(cut_grad_raw.reshape(atm.shape), cfg)
        else:  # USHAPED_PRIVATE
            mask = self.train_feed.next_step()
            x_pub = _mask(flat + mask, cfg)
            payload = encode_tensor(x_pub, cfg.elem_bytes)
            for ch in self._servers():
                ch.post(Kind.X_PUB, payload)
            parts = []
            for party, ch in enumerate(self._servers()):
                data, _ = decode_tensor(ch.expect(Kind.CUT_ACT).payload)
                parts.append(Share(party, data, cfg))
            grad_cut = self._output_and_loss(FixedTensor(reconstruct(*parts), cfg), yb)
            self._set_context(epoch, step, Phase.TRAIN_BACKWARD)
            g0, g1 = split(grad_cut.data, cfg, self.share_rng(epoch, step))
            for share, ch in zip((g0, g1), self._servers()):
                ch.post(Kind.GRAD_SHARE, encode_tensor(share.data, cfg.elem_bytes))
            parts = []
            for party, ch in enumerate(self._servers()):
                data, _ = decode_tensor(ch.expect(Kind.CUT_GRAD).payload)
                parts.append(Share(party, data, cfg))
            cut_grad = FixedTensor(reconstruct(*parts).reshape(atm.shape), cfg)

        _, grads = segment_backward(net, self.front_idx, self.params, front_caches, cut_grad)
        apply_sgd(self.params, grads, self.session.eta_enc)

    def _output_and_loss(self, cut: FixedTensor, yb: FixedTensor) -> FixedTensor:
        """Output layer forward + MSE + output backward; updates output
        params and returns the gradient at the cut."""
        net = self.session.network
        y_hat, caches = segment_forward(net, self.output_idx, self.params, cut)
        loss, grad = mse_loss(y_hat, yb)
        self.loss_curve.append(float(loss.decode()[0]))
        grad_cut, grads = segment_backward(net, self.output_idx, self.params, caches, grad)
        apply_sgd(self.params, grads, self.session.eta_enc)
        return grad_cut

    def share_rng(self, epoch, step):
        return derive_rng(self.session.train.seed, DOMAIN_CLIENT_SHARES, epoch, step)

    def _test_loop(self):
        correct = 0
        epoch = self.session.train.epochs
        for tstep in range(self.plan.test_steps):
            size = self.plan.test_batch_size(tstep)
            start = tstep * self.plan.test_batch
            xb = FixedTensor(self.ds_test.images[start : start + size], self.cfg)
            labels = self.ds_test.labels[start : start + size]
            y_hat = self._predict(epoch, tstep, xb)
            pred = np.argmax(y_hat.decode(), axis=1)
            correct += int(np.sum(pred == labels))
        self.accuracy = 100.0 * correct / self.plan.n_test
