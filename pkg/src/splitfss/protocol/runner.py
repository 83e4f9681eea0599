"""Session orchestration: builds channels for the roles a mode needs,
runs each role on its own thread, and aggregates counters, wiretaps and
results."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

from ..sharing import Share, reconstruct
from ..transport import (
    PhaseCounters,
    make_channel_pair,
    tcp_accept,
    tcp_connect,
    tcp_listen,
)
from .client import ClientRole
from .dealer import DealerRole
from .server import PrivateServerRole, PublicServerRole
from .session import Mode, SessionConfig

TRAIN_PHASES = ("train-forward", "train-backward")


@dataclass
class SessionResult:
    session: SessionConfig
    accuracy: float | None
    elapsed_s: float
    counters: dict
    channels: dict = field(default_factory=dict)
    client_params: dict = field(default_factory=dict)
    server_params: dict = field(default_factory=dict)
    server_share_params: dict = field(default_factory=dict)
    loss_curve: list = field(default_factory=list)
    plan: object = None

    def reconstructed_server_params(self) -> dict:
        """Private mode: combine both servers' parameter shares."""
        if self.server_params:
            return self.server_params
        p0 = self.server_share_params.get(0, {})
        p1 = self.server_share_params.get(1, {})
        out = {}
        for idx in p0:
            w = reconstruct(p0[idx][0], p1[idx][0])
            b = reconstruct(p0[idx][1], p1[idx][1])
            out[idx] = (w, b)
        return out

    def comm_bytes(self) -> dict:
        """Report columns, in bytes.  client/server figures count bytes
        each side sent during the training phases."""
        get = lambda role: self.counters.get(role)
        client = get("client")
        servers = [c for r, c in self.counters.items() if r in ("p0", "p1")]
        out = {
            "client_comm": client.sent_total(TRAIN_PHASES) if client else 0,
            "server_comm": sum(c.sent_total(TRAIN_PHASES) for c in servers),
            "testing_comm": sum(c.sent_total(("test",)) for c in self.counters.values()),
            "preprocessing_comm": sum(
                c.sent_total(("preprocessing",)) for c in self.counters.values()
            ),
            "sync_comm": sum(c.sent_total(("sync",)) for c in self.counters.values()),
        }
        out["training_comm"] = out["client_comm"] + out["server_comm"]
        return out


def _channel_pairs(mode: Mode) -> list:
    pairs = []
    if mode.n_servers >= 1:
        pairs.append(("client", "p0"))
    if mode.n_servers == 2:
        pairs.append(("client", "p1"))
        pairs.append(("p0", "p1"))
        pairs.append(("client", "dealer"))
        pairs.append(("dealer", "p0"))
        pairs.append(("dealer", "p1"))
    return pairs


def _build_channels(mode: Mode, backend: str, counters: dict) -> dict:
    """Returns {role: {peer: channel}} for every pair the mode needs."""
    ends: dict = {}
    for a, b in _channel_pairs(mode):
        if backend == "inprocess":
            ch_a, ch_b = make_channel_pair(a, b, counters[a], counters[b])
        elif backend == "tcp":
            ch_a, ch_b = _tcp_pair(a, b, counters[a], counters[b])
        else:
            raise ValueError(f"unknown backend {backend!r}")
        ends.setdefault(a, {})[b] = ch_a
        ends.setdefault(b, {})[a] = ch_b
    return ends


def _tcp_pair(role_a, role_b, counters_a, counters_b):
    srv = tcp_listen("127.0.0.1", 0)
    port = srv.getsockname()[1]
    result = {}

    def connect():
        result["b"] = tcp_connect("127.0.0.1", port, role_b, role_a, counters_b)

    t = threading.Thread(target=connect)
    t.start()
    ch_a = tcp_accept(srv, role_a, counters_a)
    t.join()
    srv.close()
    return ch_a, result["b"]


def run_training(
    session: SessionConfig,
    ds_train,
    ds_test=None,
    backend: str = "inprocess",
    wiretap: bool = False,
    initial_params=None,
) -> SessionResult:
    """Run a full training + testing session with all roles in-process.

    With wiretap=True every channel records its frames for audits.
    """
    mode = session.mode
    roles = ["client"] + [f"p{i}" for i in range(mode.n_servers)]
    if mode.private:
        roles.append("dealer")
    counters = {r: PhaseCounters(r) for r in roles}
    ends = _build_channels(mode, backend, counters)
    if wiretap:
        for chans in ends.values():
            for ch in chans.values():
                ch.enable_wiretap()

    client = ClientRole(
        session, ds_train, ds_test, ends.get("client", {}), initial_params=initial_params
    )
    workers = []
    if mode.private:
        workers.append(
            ("p0", PrivateServerRole(0, session, ends["p0"]["client"], ends["p0"]["dealer"], ends["p0"]["p1"]))
        )
        workers.append(
            ("p1", PrivateServerRole(1, session, ends["p1"]["client"], ends["p1"]["dealer"], ends["p1"]["p0"]))
        )
        workers.append(
            ("dealer", DealerRole(session, ends["dealer"]["client"], ends["dealer"]["p0"], ends["dealer"]["p1"], initial_params=initial_params))
        )
    elif mode.n_servers == 1:
        workers.append(("p0", PublicServerRole(session, ends["p0"]["client"], initial_params=initial_params)))

    outcomes: dict = {}
    errors: dict = {}

    def drive(name, role):
        try:
            outcomes[name] = role.run()
        except BaseException as exc:  # noqa: BLE001 - surfaced to the caller below
            errors[name] = exc

    threads = [threading.Thread(target=drive, args=(n, r), name=n) for n, r in workers]
    start = time.perf_counter()
    for t in threads:
        t.start()
    drive("client", client)
    for t in threads:
        t.join(timeout=120)
    elapsed = time.perf_counter() - start
    for chans in ends.values():
        for ch in chans.values():
            ch.close()
    if errors:
        role, exc = next(iter(errors.items()))
        raise RuntimeError(f"role {role} failed: {exc!r}") from exc

    result = SessionResult(
        session=session,
        accuracy=outcomes["client"].get("accuracy"),
        elapsed_s=elapsed,
        counters=counters,
        channels=ends,
        client_params=outcomes["client"]["params"],
        loss_curve=outcomes["client"].get("loss_curve", []),
        plan=outcomes["client"].get("plan"),
    )
    if mode.private:
        result.server_share_params = {
            outcomes["p0"]["party"]: outcomes["p0"]["params"],
            outcomes["p1"]["party"]: outcomes["p1"]["params"],
        }
    elif mode.n_servers == 1:
        result.server_params = {
            idx: (w.data, b.data) for idx, (w, b) in outcomes["p0"]["params"].items()
        }
    return result
