"""The trusted offline dealer: initializes the servers' weight shares
and streams masks, comparison keys and Beaver triples during the
preprocessing phase.  It never sees live activations, gradients or
labels."""

from __future__ import annotations

from ..errors import ProtocolOrderError
from ..sharing import split
from ..wire import Kind, Phase, ProtocolMessage, encode_tensor
from .material import dealer_build_step, server_plan
from .plain import init_segment_params
from .session import DOMAIN_DEALER, derive_rng, sync_respond


class DealerRole:
    def __init__(self, session, ch_client, ch_p0, ch_p1, initial_params=None):
        self.session = session
        self.cfg = session.fixed
        self.ch_client = ch_client
        self.servers = (ch_p0, ch_p1)
        self.rng = derive_rng(session.train.seed, DOMAIN_DEALER)
        self.initial_params = initial_params or {}

    def run(self) -> dict:
        plan = sync_respond(self.ch_client, self.session)
        sid = self.session.session_id
        for ch in self.servers:
            ch.set_context(sid, 0, 0, Phase.PREPROCESSING)
        self._deal_weight_shares()
        train = self.session.train
        bsz = train.batch_size
        steps = plan.train_steps
        self._stream(
            [(s // steps, s % steps, bsz, True) for s in range(train.epochs * steps)]
        )
        self._stream(
            [
                (train.epochs, t, plan.test_batch_size(t), False)
                for t in range(plan.test_steps)
            ]
        )
        return {}

    def _deal_weight_shares(self):
        """Server-segment weights: same per-layer derivation as a public
        run, split once so each server holds one share."""
        net = self.session.network
        sid = self.session.session_id
        layer_plan = server_plan(net)
        fc_indices = [e.index for e in layer_plan if e.kind == "fc"]
        plain = init_segment_params(net, fc_indices, self.cfg, self.session.train.seed)
        plain.update({i: p for i, p in self.initial_params.items() if i in plain})
        eb = self.cfg.elem_bytes
        for idx in fc_indices:
            w, b = plain[idx]
            w0, w1 = split(w.data, self.cfg, self.rng)
            b0, b1 = split(b.data, self.cfg, self.rng)
            for ch, ws, bs in ((self.servers[0], w0, b0), (self.servers[1], w1, b1)):
                payload = encode_tensor(ws.data, eb) + encode_tensor(bs.data, eb)
                ch.send(
                    ProtocolMessage(sid, 0, 0, Phase.PREPROCESSING, Kind.WEIGHT_SHARE, payload)
                )

    def _stream(self, steps: list):
        """Send material for the given (epoch, batch, size, training)
        steps in chunks, pausing for credits in between."""
        chunk = max(1, self.session.preprocess_chunk)
        net = self.session.network
        plan_layers = server_plan(net)
        cut = net.cut_dim()
        consumers = (self.ch_client, *self.servers)
        for start in range(0, len(steps), chunk):
            for epoch, batch, size, training in steps[start : start + chunk]:
                client_msgs, p0_msgs, p1_msgs = dealer_build_step(
                    self.session.session_id, epoch, batch, size, cut,
                    plan_layers, self.cfg, self.rng, training,
                )
                for msg in client_msgs:
                    self.ch_client.send(msg)
                for msg in p0_msgs:
                    self.servers[0].send(msg)
                for msg in p1_msgs:
                    self.servers[1].send(msg)
            if start + chunk < len(steps):
                for ch in consumers:
                    msg = ch.recv()
                    if msg.kind != Kind.CREDIT:
                        raise ProtocolOrderError(
                            f"dealer expected credit from {ch.peer_role}, got kind {msg.kind}"
                        )
